"""Settings shared by the :program:`gridcharge` commands.

Contexts form a stack. The root is created on import; the CLI works on the most recent
instance, and test fixtures push and pop copies of the root.
"""
import logging
import os
from copy import deepcopy
from pathlib import Path
from typing import ClassVar, List, Optional

from gridcharge.util import PathLike, package_data_path

log = logging.getLogger(__name__)

#: Environment variables overriding the default of each path setting.
ENV = dict(config_path="GRIDCHARGE_CONFIG", local_data="GRIDCHARGE_LOCAL_DATA")


def _default(key: str) -> Path:
    value = os.environ.get(ENV[key])
    if value:
        return Path(value)
    elif key == "config_path":
        return package_data_path("experiment", "default.yaml")
    return Path.cwd()


class Context(dict):
    """Experiment settings, available as keys or as attributes.

    ``config_path``
       Experiment configuration file. From ``GRIDCHARGE_CONFIG``, else the bundled
       :file:`data/experiment/default.yaml`.
    ``local_data``
       Base directory for outputs. From ``GRIDCHARGE_LOCAL_DATA``, else the working
       directory.
    """

    _stack: ClassVar[List["Context"]] = []

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        for key in ENV:
            if key not in self:
                self[key] = _default(key)

        if not self._stack:
            log.debug("Create root Context")
        self._stack.append(self)

    @classmethod
    def get_instance(cls, index: int = 0) -> "Context":
        """The Context at `index` in the stack; ``-1`` for the most recent."""
        return cls._stack[index]

    @classmethod
    def only(cls) -> "Context":
        """The single Context.

        Raises
        ------
        IndexError
            if copies of the root exist.
        """
        if len(cls._stack) != 1:
            raise IndexError(f"{len(cls._stack)} Context instances; expected 1")
        return cls._stack[0]

    def __getattr__(self, name):
        try:
            return self[name]
        except KeyError:
            raise AttributeError(name) from None

    def __setattr__(self, name, value):
        self[name] = value

    def __deepcopy__(self, memo):
        return Context(deepcopy(dict(self), memo))

    def delete(self) -> None:
        """Remove this Context from the stack. The root is never removed."""
        index = next(i for i, c in enumerate(self._stack) if c is self)
        if index == 0:
            log.warning("Won't delete the root Context")
        else:
            self._stack.pop(index)

    def get_local_path(self, *parts: str, suffix: Optional[str] = None) -> Path:
        """Path under ``local_data``, optionally with `suffix`."""
        result = Path(self.local_data).joinpath(*parts)
        return result.with_suffix(suffix) if suffix else result

    def get_config(self, reload: bool = False):
        """The :class:`.ExperimentConfig` in ``config_path``, parsed once."""
        from gridcharge.harness import ExperimentConfig

        if reload or "_config" not in self:
            log.info(f"Load configuration from {self.config_path}")
            self["_config"] = ExperimentConfig.from_file(self.config_path)
        return self["_config"]

    def handle_cli_args(
        self, config: Optional[PathLike] = None, local_data: Optional[PathLike] = None
    ) -> None:
        """Apply the ``--config`` and ``--local-data`` options of the CLI."""
        if local_data:
            self.local_data = Path(local_data)

        if config and Path(config) != self.config_path:
            self.config_path = Path(config)
            self.pop("_config", None)
