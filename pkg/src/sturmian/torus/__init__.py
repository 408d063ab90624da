"""Torus model of the trace maps: linear automorphisms, perturbed factor maps and stable manifolds."""

from . import linear as _linear, manifold as _manifold, perturbed as _perturbed
from .linear import *  # noqa: F401,F403
from .manifold import *  # noqa: F401,F403
from .perturbed import *  # noqa: F401,F403

__all__ = list(_linear.__all__) + list(_perturbed.__all__) + list(_manifold.__all__)
