"""Fact-checked captioning for 2D images and 3D objects, plus the evaluation harness."""

__version__ = "0.1.0"
