"""Tests of :mod:`gridcharge.model` and submodules."""
