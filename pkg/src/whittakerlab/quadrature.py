"""Adaptive and fixed-rule quadrature utilities.

`integrate_adaptive` wraps QUADPACK (scipy.integrate.quad).  Semi-infinite and
doubly infinite domains are handled by QUADPACK's standard rational change of
variable (t = (1-u)/u maps (a, inf) onto (0, 1]), so callers never see the
substitution.  The fixed Gauss-Legendre composite rules are used by the
vectorised special-function kernels, where the integrands are smooth and the
node layout is chosen per formula.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate as _si

from .errors import ConvergenceError, DomainError


@dataclass(frozen=True)
class EvalResult:
    """Value of a numerical evaluation together with an absolute error estimate."""

    value: float
    abs_error_est: float

    def __post_init__(self):
        if not math.isfinite(self.abs_error_est) or self.abs_error_est < 0:
            raise DomainError("abs_error_est must be finite and >= 0")
        if not math.isfinite(self.value):
            raise DomainError("value must be finite")


@dataclass(frozen=True)
class QuadratureSpec:
    """Target tolerance, subdivision budget and integration domain.

    The domain endpoints may be +-inf.  target_tol is interpreted as in
    QUADPACK: the error estimate satisfies
    abs_error_est <= target_tol * max(1, |value|).
    """

    target_tol: float = 1e-10
    max_subdivisions: int = 200
    domain: tuple = (0.0, math.inf)

    def __post_init__(self):
        if not 0 < self.target_tol < 1:
            raise DomainError("target_tol must lie in (0, 1)")
        if self.max_subdivisions <= 0:
            raise DomainError("max_subdivisions must be positive")
        lo, hi = self.domain
        if not lo < hi:
            raise DomainError("domain must satisfy lower < upper")


def integrate_adaptive(f, spec: QuadratureSpec = QuadratureSpec()) -> EvalResult:
    """Adaptive Gauss-Kronrod integration of ``f`` over ``spec.domain``.

    Raises ConvergenceError (carrying the best estimate) if QUADPACK cannot
    reach the tolerance within ``max_subdivisions`` subdivisions.
    """
    lo, hi = spec.domain
    out = _si.quad(
        f, lo, hi,
        epsabs=spec.target_tol,
        epsrel=spec.target_tol,
        limit=spec.max_subdivisions,
        full_output=True,
    )
    value, err = out[0], out[1]
    if len(out) >= 4:  # ier != 0: message appended
        raise ConvergenceError(
            f"quadrature did not converge: {out[3]}",
            best_estimate=value, error_estimate=err)
    return EvalResult(value=float(value), abs_error_est=float(err))


@lru_cache(maxsize=None)
def gauss_legendre_rule(order: int):
    """Cached Gauss-Legendre nodes/weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def composite_gl_nodes(edges, order: int):
    """Composite Gauss-Legendre nodes and weights on consecutive panels.

    ``edges`` is an increasing 1-d array of panel boundaries; returns flat
    (nodes, weights) arrays covering [edges[0], edges[-1]].
    """
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre_rule(order)
    a = edges[:-1][:, None]
    b = edges[1:][:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def panel_edges(lo: float, hi: float, max_width: float) -> np.ndarray:
    """Uniform panel edges from lo to hi with width at most max_width."""
    n = max(1, int(math.ceil((hi - lo) / max_width)))
    return np.linspace(lo, hi, n + 1)
