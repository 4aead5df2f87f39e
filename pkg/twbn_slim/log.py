import logging

import coloredlogs

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


def setup_logging(verbose: int = 0) -> None:
    """Install coloured console logging on the root logger.

    :param verbose: 0 for warnings only, 1 for info, 2 or more for debug.
    """
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    coloredlogs.install(level=level, fmt=LOG_FORMAT)
