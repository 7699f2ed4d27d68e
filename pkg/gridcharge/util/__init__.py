"""Helpers shared across :mod:`gridcharge`.

Package data
   YAML files under :file:`gridcharge/data/`, each parsed once per process.
Configuration
   Resolution of data references, and a stable hash of a configuration document.
Random streams
   One independent :class:`numpy.random.Generator` per run and purpose.
"""
import hashlib
import json
import logging
import zlib
from functools import lru_cache
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import yaml

log = logging.getLogger(__name__)

#: Package data directory.
DATA_PATH = Path(__file__).parents[1].joinpath("data")

PathLike = Union[str, Path]


def load_yaml(path: PathLike) -> Any:
    """Parse the YAML file at `path`.

    Raises
    ------
    ValueError
        if `path` does not have a :file:`.yaml` or :file:`.yml` suffix.
    """
    path = Path(path)
    if path.suffix not in (".yaml", ".yml"):
        raise ValueError(f"{path.name}: expected .yaml or .yml, got {path.suffix!r}")
    return yaml.safe_load(path.read_text(encoding="utf-8"))


def package_data_path(*parts: str) -> Path:
    """Path to a file or directory under :file:`gridcharge/data/`."""
    return DATA_PATH.joinpath(*parts)


@lru_cache(maxsize=None)
def load_package_data(*parts: str, suffix: str = ".yaml") -> Any:
    """Parsed contents of the package data file named by `parts`.

    `suffix` is added if the last part has none, so
    ``load_package_data("sources", "vietnam_2023")`` reads
    :file:`data/sources/vietnam_2023.yaml`. Repeated calls return the same object;
    callers that modify it should copy it first.
    """
    path = package_data_path(*parts)
    path = path.with_suffix(path.suffix or suffix)
    log.debug(f"Load {path.relative_to(DATA_PATH)}")
    return load_yaml(path)


def resolve_data(kind: str, value: PathLike, base: Optional[Path] = None):
    """Resolve a data reference from a configuration document.

    A bare name without suffix, e.g. ``vietnam_2023``, refers to the package data file
    :file:`data/{kind}/vietnam_2023.yaml`; its parsed contents are returned. Anything
    else is a path, relative to `base` if not absolute, and is returned as a
    :class:`~pathlib.Path` for the caller to read.
    """
    p = Path(value)
    if not p.suffix and len(p.parts) == 1:
        return load_package_data(kind, str(value))

    if not p.is_absolute() and base is not None:
        p = base.joinpath(p)

    if not p.exists():
        raise FileNotFoundError(f"{kind} data file {p} does not exist")

    return p


def config_hash(data: Any) -> str:
    """Return the SHA-256 of the canonical JSON representation of `data`."""
    text = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def as_float_array(values, name: str, length: Optional[int] = None) -> np.ndarray:
    """Convert `values` to a 1-D float array, checking finiteness and `length`."""
    result = np.asarray(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(result)):
        raise ValueError(f"{name} contains NaN or infinite values")
    if length is not None and len(result) != length:
        raise ValueError(f"{name} has length {len(result)}; expected {length}")
    return result


def seed_sequence(master_seed: int, run_index: int, tag: str) -> np.random.SeedSequence:
    """Return the seed sequence for one named random stream of one run.

    The entropy is ``(master_seed, run_index, crc32(tag))``, so streams for different
    runs or tags are independent, and adding runs never changes earlier ones.
    """
    return np.random.SeedSequence(
        [int(master_seed), int(run_index), zlib.crc32(tag.encode("utf-8"))]
    )


def random_stream(master_seed: int, run_index: int, tag: str) -> np.random.Generator:
    """Return a :class:`numpy.random.Generator` for :func:`seed_sequence`."""
    return np.random.default_rng(seed_sequence(master_seed, run_index, tag))
