"""Topic-space opinion dynamics from hashtag co-occurrence networks."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
