"""Automorphic word maps on finite groups: fibers, checkers, and bound formulas."""

__version__ = "0.1.0"
