"""Spectra of Sturmian Hamiltonians through trace-map dynamics.

The subpackages are importable on their own.  The most used names are
re-exported here for convenience.
"""

__version__ = "0.1.0"

from .contfrac import *  # noqa: F401,F403
from .contfrac import __all__ as _cf_all
from .exceptions import *  # noqa: F401,F403
from .exceptions import __all__ as _exc_all
from .fractal import *  # noqa: F401,F403
from .fractal import __all__ as _fr_all
from .surface import *  # noqa: F401,F403
from .surface import __all__ as _sf_all
from .torus import *  # noqa: F401,F403
from .torus import __all__ as _tr_all

__all__ = sorted(set(_cf_all) | set(_exc_all) | set(_fr_all) | set(_sf_all) | set(_tr_all) | {"__version__"})
