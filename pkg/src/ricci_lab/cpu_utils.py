import argparse
import multiprocessing

from typeguard import typechecked


@typechecked
def check_cores(cores: int, autocorrect: bool = True):
    """
    Validate a worker count for parallel sweeps, 0 means all local cores
    """
    max_local_cores = multiprocessing.cpu_count()
    if cores < 0:
        raise ValueError("Parameter 'workers' must be higher or equal to 0")
    if cores > max_local_cores:
        if not autocorrect:
            raise ValueError(f"Parameter 'workers' must be less or equal to actual cpu cores ({max_local_cores})")
        cores = max_local_cores
    if cores == 0:
        cores = max_local_cores
    return cores


class ArgparseCoreType(argparse.Action):
    def __init__(self, option_strings, dest, nargs=None, **kwargs):
        if nargs is not None:
            raise ValueError("nargs not allowed")
        super().__init__(option_strings, dest, **kwargs)

    def __call__(self, parser, namespace, values, option_string=None):
        try:
            values = int(values)
        except ValueError:
            parser.error(f"Parameter '{option_string}' must be an integer")
        try:
            check_cores(values, autocorrect=True)
        except ValueError as e:
            parser.error(str(e).replace("'workers'", option_string))
        setattr(namespace, self.dest, values)
