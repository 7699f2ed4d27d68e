"""Test suite for :mod:`gridcharge`."""
