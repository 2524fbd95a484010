"""Conditional GAN fast simulation for the proton Zero Degree Calorimeter."""

__version__ = "0.1.0"
