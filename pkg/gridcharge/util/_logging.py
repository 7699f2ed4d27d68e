"""Logging configuration for :mod:`gridcharge`."""
import logging
import logging.config
from contextlib import contextmanager
from copy import deepcopy
from pathlib import Path
from typing import Iterator

__all__ = ["Formatter", "log_file", "preserve_log_level", "setup"]

PACKAGE = __name__.split(".")[0]


class Formatter(logging.Formatter):
    """Console formatter.

    Records print as the module path relative to the package, the calling function and
    the message::

        model.ucp.solve_ucp  Dispatch cost 1.23e+09 VND after 311 pivots
          ...solve_ucp  Hydro share 0.284
        harness.run_single  WARNING Run 3: FIFS leaves 2.5 kWh undelivered

    Consecutive records from one module abbreviate the path. With :mod:`colorama`
    available, paths are cyan and abbreviations dim.
    """

    def __init__(self):
        super().__init__()
        try:
            import colorama
        except ImportError:  # pragma: no cover
            self.colours = ("", "", "")
        else:
            colorama.init()
            self.colours = (
                colorama.Fore.CYAN,
                colorama.Style.DIM,
                colorama.Style.RESET_ALL,
            )
        self._last_module = None

    def format(self, record: logging.LogRecord) -> str:
        cyan, dim, reset = self.colours

        module = record.name
        if module.startswith(PACKAGE + "."):
            module = module[len(PACKAGE) + 1 :]

        if module == self._last_module:
            where = f"  {dim}...{record.funcName}{reset}"
        else:
            where = f"{cyan}{module}.{record.funcName}{reset}"
        self._last_module = module

        level = f"{record.levelname} " if record.levelno >= logging.WARNING else ""
        text = f"{where}  {level}{record.getMessage()}"
        if record.exc_info:
            text += "\n" + self.formatException(record.exc_info)
        return text


CONFIG = dict(
    version=1,
    disable_existing_loggers=False,
    formatters=dict(console={"()": Formatter}),
    handlers=dict(
        console={
            "class": "logging.StreamHandler",
            "formatter": "console",
            "stream": "ext://sys.stdout",
        }
    ),
    loggers={PACKAGE: dict(level="NOTSET", handlers=[], propagate=True)},
)


def setup(level: str = "NOTSET", console: bool = True) -> None:
    """Set the level of the package logger and, optionally, print its records.

    Called with ``console=False`` on import, so that library use prints nothing; the
    :program:`gridcharge` CLI enables the console at INFO or DEBUG.
    """
    config = deepcopy(CONFIG)
    config["loggers"][PACKAGE].update(
        level=level, handlers=["console"] if console else []
    )
    logging.config.dictConfig(config)


@contextmanager
def log_file(path: Path) -> Iterator[Path]:
    """Also write package log records to `path` within the block.

    Records pass at the level of the package logger. The file has one plain line per
    record, with time stamp and level, and is overwritten if it exists.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(
        logging.Formatter("%(asctime)s %(levelname)-7s %(name)s  %(message)s")
    )

    logger = logging.getLogger(PACKAGE)
    logger.addHandler(handler)
    try:
        yield path
    finally:
        logger.removeHandler(handler)
        handler.close()


@contextmanager
def preserve_log_level():
    """Restore the level of the package logger on leaving the block."""
    logger = logging.getLogger(PACKAGE)
    level = logger.level
    try:
        yield
    finally:
        logger.setLevel(level)
