"""Emissions-aware smart charging of electric vehicle fleets."""
from importlib.metadata import PackageNotFoundError, version

from gridcharge.util._logging import setup as _setup_logging
from gridcharge.util.context import Context

__all__ = ["Context", "__version__"]

try:
    __version__ = version(__name__)
except PackageNotFoundError:  # pragma: no cover
    __version__ = "999"

# Silent until the CLI enables the console
_setup_logging(console=False)

#: Root Context; the CLI and the test fixtures work on it or on copies of it.
Context()
