"""Terrain-adaptive locomotion planning."""
