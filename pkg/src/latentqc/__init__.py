"""Diffusion-residual outlier detection for image quality control."""

__version__ = "0.1.0"
