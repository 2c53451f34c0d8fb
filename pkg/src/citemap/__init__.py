"""Journal co-citation maps over moving windows: parsing, networks, communities, factors, flows and layouts."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402,F401
