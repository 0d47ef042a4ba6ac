import argparse
import logging
import sys
from typing import Optional, Sequence

from typeguard import typechecked

from ricci_lab.logging_tools import logging_format

USAGE_EXIT_STATUS = 5


class _ConfigErrorParser(argparse.ArgumentParser):
    """ Bad command lines are invalid configs, they exit with USAGE_EXIT_STATUS instead of 2 """
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT_STATUS, f"{self.prog}: error: {message}\n")


@typechecked
class ArgParser:
    """
    Create parser with debug and warning options and set logging. Parser can be modified as argparse.ArgumentParser via
    'self.parser'.
    Most commonly used "add_argument" method can be used directly and will proxy args and kwargs to 'self.parser',
    "add_command" registers a subcommand sharing the logging options.
    """
    def __init__(self, description: str = ""):
        self.parser = self._default_parser(description)
        self._commands = None

    @staticmethod
    def _logging_options(suppress_defaults: bool = False) -> argparse.ArgumentParser:
        # subcommand copies must not overwrite values given before the subcommand
        parser = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS if suppress_defaults else None)
        logging_level = parser.add_mutually_exclusive_group()
        logging_level.add_argument("--debug", action="store_true", help="Print debug logging")
        logging_level.add_argument("--warning", action="store_true", help="Print only warning logging")
        parser.add_argument("--log", help="Log all into file", metavar="LOGFILE")
        return parser

    @classmethod
    def _default_parser(cls, description: str = "") -> argparse.ArgumentParser:
        return _ConfigErrorParser(description=description, formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                                  parents=[cls._logging_options()])

    def add_argument(self, *args, **kwargs):
        """ Proxy to argparse's add_argument method """
        self.parser.add_argument(*args, **kwargs)

    def add_command(self, name: str, help: str = "") -> argparse.ArgumentParser:
        """ New subcommand parser, the chosen name lands in args.command """
        if self._commands is None:
            self._commands = self.parser.add_subparsers(dest="command", metavar="COMMAND",
                                                        parser_class=_ConfigErrorParser)
            self._commands.required = True
        return self._commands.add_parser(name, help=help, description=help,
                                         formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                                         parents=[self._logging_options(suppress_defaults=True)])

    def __call__(self, argv: Optional[Sequence[str]] = None):
        args = self.parser.parse_args(argv)
        logging.basicConfig(format=logging_format(),
                            level=logging.DEBUG if args.debug else (logging.WARNING if args.warning else logging.INFO),
                            filename=args.log,
                            filemode="w")
        return args
