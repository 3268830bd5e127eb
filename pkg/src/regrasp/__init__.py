"""Regrasp planning with precomputed grasps, placements and a relational store."""

__version__ = "0.1.0"
