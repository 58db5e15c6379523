"""Numerical toolkit for a multiscale varifold counterexample.

A flat plane ``T`` carries dyadically placed, rescaled copies of a closed
revolved bump accumulating at ``T``.  The package builds that object,
brackets dyadic-ball integrals of it, fits scaling exponents and runs
isoperimetric and excess-set experiments on it and on canonical shapes.
"""
__version__ = "0.1.0"

from .exceptions import *  # noqa: F401,F403
from .dyadic import *  # noqa: F401,F403
from .profile import *  # noqa: F401,F403
from .varifold import *  # noqa: F401,F403
from .shapes import *  # noqa: F401,F403
from .example import *  # noqa: F401,F403
from .scaling import *  # noqa: F401,F403
from .iso import *  # noqa: F401,F403
from .io import *  # noqa: F401,F403
