"""whittakerlab: class-one Whittaker functions and exponential-functional lab."""

__version__ = "0.1.0"

from . import a2lab, errors, quadrature, rootsys, specfun, stochastic, whittaker  # noqa: F401
