"""Numerical laboratory for circulant channels with random phases and the delocalisation of circle sums."""

__version__ = "0.1.0"
