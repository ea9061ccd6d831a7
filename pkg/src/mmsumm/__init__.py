"""Multimodal abstractive summarization in numpy."""

__version__ = "0.1.0"
