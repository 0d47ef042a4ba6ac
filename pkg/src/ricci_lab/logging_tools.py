def logging_format():
    return '%(asctime)s %(levelname)s %(name)s: %(message)s'
