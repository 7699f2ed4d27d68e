"""Tests of submodules of :mod:`gridcharge.util`."""
