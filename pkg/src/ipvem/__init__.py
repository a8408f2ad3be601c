"""Interior-penalty virtual elements for Kirchhoff plates with adaptive refinement."""

__version__ = "0.1.0"
