"""Tests of :mod:`gridcharge.util`."""
import zlib
from pathlib import Path

import numpy as np
import pytest

from gridcharge.util import (
    as_float_array,
    config_hash,
    load_package_data,
    load_yaml,
    package_data_path,
    random_stream,
    resolve_data,
    seed_sequence,
)

_actual_package_data = Path(__file__).parents[1].joinpath("data")


def test_load_package_data():
    # Loads a file
    result = load_package_data("sources", "vietnam_2023")
    assert "VND" == result["currency"]

    # Parsed once
    hits = load_package_data.cache_info().hits
    assert result is load_package_data("sources", "vietnam_2023")
    assert hits + 1 == load_package_data.cache_info().hits

    # Explicit suffix
    assert result == load_package_data("sources", "vietnam_2023.yaml")


def test_load_yaml(tmp_path):
    with pytest.raises(ValueError, match="expected .yaml or .yml, got '.csv'"):
        load_yaml(tmp_path / "foo.csv")


def test_package_data_path():
    assert _actual_package_data.joinpath("experiment", "default.yaml") == (
        package_data_path("experiment", "default.yaml")
    )


def test_resolve_data(tmp_path):
    # Bare name: contents of package data
    assert load_package_data("wind", "vietnam_2023") is resolve_data(
        "wind", "vietnam_2023"
    )

    # Relative path
    (tmp_path / "demand.csv").write_text("timestamp,power_mw\n")
    assert tmp_path / "demand.csv" == resolve_data("demand", "demand.csv", tmp_path)

    with pytest.raises(FileNotFoundError, match="demand data file .* does not exist"):
        resolve_data("demand", "missing.csv", tmp_path)


def test_config_hash():
    a = config_hash(dict(x=1, y=[1, 2], z=dict(p=Path("a"))))
    b = config_hash(dict(z=dict(p="a"), y=[1, 2], x=1))

    assert a == b
    assert a != config_hash(dict(x=1, y=[2, 1], z=dict(p="a")))


@pytest.mark.parametrize(
    "values, kwargs, match",
    [
        ([1.0, np.nan], {}, "NaN or infinite"),
        ([1.0, np.inf], {}, "NaN or infinite"),
        ([1.0, 2.0], dict(length=3), "has length 2; expected 3"),
    ],
)
def test_as_float_array_invalid(values, kwargs, match):
    with pytest.raises(ValueError, match=match):
        as_float_array(values, "foo", **kwargs)


def test_as_float_array():
    result = as_float_array([[1, 2], [3, 4]], "foo")
    assert (4,) == result.shape and np.float64 == result.dtype


class TestSeeds:
    def test_entropy(self):
        ss = seed_sequence(42, 7, "fleet")
        assert [42, 7, zlib.crc32(b"fleet")] == list(ss.entropy)

    def test_streams(self):
        a = random_stream(0, 1, "prices").random(5)

        assert np.array_equal(a, random_stream(0, 1, "prices").random(5))
        for other in ((1, 1, "prices"), (0, 2, "prices"), (0, 1, "fleet")):
            assert not np.array_equal(a, random_stream(*other).random(5))
