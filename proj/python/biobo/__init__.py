"""Biology-informed batch Bayesian optimization over gene pools."""

from ._core import *  # noqa: F401,F403
from ._core import cli  # noqa: F401
from ._core import __doc__  # noqa: F401

__version__ = "0.1.0"
