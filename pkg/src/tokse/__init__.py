"""Discrete-token speech enhancement: codec, tokenizers, and token language models."""

__version__ = "0.1.0"
