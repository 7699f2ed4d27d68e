"""Optimization models for power dispatch and EV charging."""
