"""Criticality of locally perturbed Kitaev and color codes on cylinders."""

__version__ = "0.1.0"
