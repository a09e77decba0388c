"""Type-A2 and Morse-specific closed forms, kernels and experiments.

Joint Laplace transform of the A2 exponential functionals, with
y_i = 2 e^{-alpha_i(x)} and nu = -s_0 mu, a = alpha_1(nu), b = alpha_2(nu):

    E exp(-y1^2 A^1/2 - y2^2 A^2/2)
        = (y1/2)^{(2a+4b)/3} (y2/2)^{(4a+2b)/3}
          8 / (Gamma(a) Gamma(b) Gamma(a+b)) w_nu(x).

The constant is pinned by the y -> 0 limit (the transform must tend to 1);
the test suite confirms it against the series route and Monte Carlo.

The intertwining kernel of the zero-drift operator:

    Lambda(x, t) = K_0( sqrt( y1^2 (1+delta^{2/3} e^{-t1+t2})
                   (1+delta^{2/3} e^{t1}) (1+delta^{2/3} e^{-t2}) ) ),
    delta = y2/y1,

whose (a, b) exponential moments reproduce w_nu(x).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError
from .quadrature import composite_gl_nodes, panel_edges
from .rootsys import SimpleSystem
from .specfun import (bessel_k, bessel_k_ln, bessel_k_ln_vec, gamma_ln,
                      parabolic_d_gaussian)
from .stochastic import A2DriftField, McConfig, McEstimate, path_generator
from .whittaker import (a2_nu_from_ab, a2_system, a2_vt_integral_ln,
                        a2_x_from_alphas, phi_ratio_asymp)


@dataclass(frozen=True)
class A2Coordinates:
    """Dictionary between the drift mu, the spectral (a, b) and the y-variables."""

    mu: np.ndarray
    nu: np.ndarray
    a: float
    b: float

    @property
    def nu1(self) -> float:
        return (self.a + 1.0) / 3.0

    @property
    def nu2(self) -> float:
        return (self.b + 1.0) / 3.0

    @property
    def system(self) -> SimpleSystem:
        return a2_system()

    @staticmethod
    def from_mu(mu) -> "A2Coordinates":
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (3,) or abs(mu.sum()) > 1e-9:
            raise DomainError("mu must lie in the trace-zero subspace of R^3")
        sys_ = a2_system()
        if not np.all(sys_.alphas @ mu > 0):
            raise DomainError("mu must lie in the open chamber")
        s0 = sys_.longest_element()
        nu = -(s0.matrix @ mu)
        a = float(sys_.alphas[0] @ nu)
        b = float(sys_.alphas[1] @ nu)
        return A2Coordinates(mu=mu, nu=nu, a=a, b=b)

    @staticmethod
    def from_ab(a: float, b: float) -> "A2Coordinates":
        if not (a > 0 and b > 0):
            raise DomainError("require a, b > 0 for mu in the chamber")
        nu = a2_nu_from_ab(a, b)
        sys_ = a2_system()
        s0 = sys_.longest_element()
        mu = -(s0.matrix @ nu)
        return A2Coordinates(mu=mu, nu=nu, a=float(a), b=float(b))

    def alpha_values(self, x):
        x = np.asarray(x, dtype=float)
        sys_ = self.system
        return float(sys_.alphas[0] @ x), float(sys_.alphas[1] @ x)

    def y_from_x(self, x):
        u1, u2 = self.alpha_values(x)
        return 2.0 * math.exp(-u1), 2.0 * math.exp(-u2)

    def x_from_y(self, y1: float, y2: float):
        return a2_x_from_alphas(math.log(2.0 / y1), math.log(2.0 / y2))

    def mu_pairing(self, x) -> float:
        """mu(x) = (2 nu1 + 4 nu2 - 2) alpha_1(x) + (4 nu1 + 2 nu2 - 2) alpha_2(x)."""
        u1, u2 = self.alpha_values(x)
        return ((2 * self.nu1 + 4 * self.nu2 - 2) * u1
                + (4 * self.nu1 + 2 * self.nu2 - 2) * u2)


def a2_joint_laplace(y1: float, y2: float, mu=None, ab=None) -> float:
    """E exp(-y1^2 A^1_infty / 2 - y2^2 A^2_infty / 2) via the integral route."""
    if not (y1 > 0 and y2 > 0):
        raise DomainError("a2_joint_laplace requires y1, y2 > 0")
    coords = A2Coordinates.from_ab(*ab) if ab is not None else A2Coordinates.from_mu(mu)
    a, b = coords.a, coords.b
    ln_val = ((2 * a + 4 * b) / 3.0 * math.log(y1 / 2.0)
              + (4 * a + 2 * b) / 3.0 * math.log(y2 / 2.0)
              + math.log(8.0) - gamma_ln(a) - gamma_ln(b) - gamma_ln(a + b)
              + a2_vt_integral_ln(a, b, y1, y2))
    return math.exp(ln_val)


def a2_density(v1: float, v2: float, ab, order: int = 10) -> float:
    """Joint density of (A^1_infty, A^2_infty) at (v1, v2) by the triple integral.

    p(v1,v2) = 4 / (pi Gamma(a) Gamma(b) Gamma(a+b)) (2 v1 v2)^{-(a+b+1)/2}
               int r^{(a-b)/2} F1(r) F2(r) dr/r,
    where F1(r) integrates [e^{-z^2/4} D_{a+b}](z) cosh((a+b)u) over u with
    z = sqrt((1+r)/v1) cosh u, and F2 likewise with 1+1/r and v2.  The double
    (u, v) block factorises, so the integral is a product of two 1-d integrals
    under the r-quadrature.
    """
    if not (v1 > 0 and v2 > 0):
        raise DomainError("a2_density requires positive arguments")
    a, b = ab
    c = a + b

    # u-support: z = sqrt((1+r)/v) cosh u must stay below where the Gaussian-
    # combined D factor dies (z ~ 15), else the integrand is zero anyway.
    def f_block(scale):   # scale = (1+r)/v  (vector over r-nodes)
        zcap = 16.0 + math.sqrt(2.0 * max(c, 1.0))
        out = np.zeros_like(scale)
        live = scale < zcap ** 2
        if not np.any(live):
            return out
        umax = np.arccosh(np.maximum(zcap / np.sqrt(scale[live]), 1.0 + 1e-12))
        u_hi = float(umax.max())
        un, uw = composite_gl_nodes(panel_edges(0.0, max(u_hi, 0.3), 0.25), order)
        z = np.sqrt(scale[live])[:, None] * np.cosh(un)[None, :]
        g = parabolic_d_gaussian(c, z.ravel()).reshape(z.shape)
        out[live] = (g * np.cosh(c * un)[None, :]) @ uw
        return out

    lr_nodes, lr_w = composite_gl_nodes(panel_edges(-24.0, 24.0, 0.4), order)
    r = np.exp(lr_nodes)
    F1 = f_block((1.0 + r) / v1)
    F2 = f_block((1.0 + 1.0 / r) / v2)
    integrand = np.exp(0.5 * (a - b) * lr_nodes) * F1 * F2
    I = float(integrand @ lr_w)
    ln_pref = (math.log(4.0 / math.pi) - gamma_ln(a) - gamma_ln(b) - gamma_ln(c)
               - 0.5 * (c + 1.0) * math.log(2.0 * v1 * v2))
    return math.exp(ln_pref) * I


def morse_conditional_laplace(lam1: float, s: float, mu: float) -> float:
    """Joint object E(e^{-lam1^2 A^1/2} | A^2 = s) * density of A^2 at s:

    lam1^{2mu+1} / (2 Gamma(2mu)) e^{-lam1 coth(lam1 s/2)} / sinh^{2mu+1}(lam1 s/2).
    """
    if not (lam1 > 0 and s > 0):
        raise DomainError("morse_conditional_laplace requires lam1, s > 0")
    half = 0.5 * lam1 * s
    # log-assembled: sinh^{2mu+1} overflows for large s otherwise
    ln_val = ((2 * mu + 1) * math.log(lam1) - math.log(2.0) - gamma_ln(2 * mu)
              - lam1 / math.tanh(half)
              - (2 * mu + 1) * (abs(half) + math.log1p(-math.exp(-2 * abs(half)))
                                - math.log(2.0)))
    return math.exp(ln_val)


def morse_density_series(v1: float, v2: float, mu: float, terms: int = 14,
                         tol: float = 1e-9):
    """Double series for the joint density of the Morse-pair functionals.

    p(v1,v2) = 2^{2mu} / (Gamma(2mu) sqrt(2pi)) sum_{j,k} (-1)^j 2^j / j!
               Gamma(j+2mu+1+k) / (k! Gamma(j+2mu+1)) v1^{-(j/2+mu+3/2)}
               [e^{-z^2/4} D_{j+2mu+2}](z_{jk}),
    z_{jk} = (1 + v2 (k+j+mu+1/2)) / sqrt(v1).

    Returns (value, truncation_estimate).  The series is numerically delicate
    (alternating in j with slow decay for larger v2); ``terms`` caps both
    indices and the last-shell magnitude is reported as the truncation
    estimate.  ConvergenceError is raised if the shells are still growing at
    the cap.
    """
    if not (v1 > 0 and v2 > 0):
        raise DomainError("morse_density_series requires positive arguments")
    ln_pref = 2 * mu * math.log(2.0) - gamma_ln(2 * mu) - 0.5 * math.log(2 * math.pi)
    total = 0.0
    shell_mags = []
    for j in range(terms):
        shell = 0.0
        for k in range(terms):
            z = (1.0 + v2 * (k + j + mu + 0.5)) / math.sqrt(v1)
            dv = float(parabolic_d_gaussian(j + 2 * mu + 2.0, np.array([z]))[0])
            ln_coef = (j * math.log(2.0) - gamma_ln(j + 1.0)
                       + gamma_ln(j + 2 * mu + 1.0 + k) - gamma_ln(k + 1.0)
                       - gamma_ln(j + 2 * mu + 1.0)
                       - (0.5 * j + mu + 1.5) * math.log(v1))
            sgn = -1.0 if j % 2 else 1.0
            shell += sgn * math.exp(ln_pref + ln_coef) * dv
        total += shell
        shell_mags.append(abs(shell))
    if len(shell_mags) >= 3 and shell_mags[-1] > shell_mags[-3]:
        raise ConvergenceError(
            f"series shells still growing after {terms} terms",
            best_estimate=total, error_estimate=shell_mags[-1])
    return total, shell_mags[-1]


# ---------------------------------------------------------------------------
# Intertwining kernel and grids
# ---------------------------------------------------------------------------

def a2_intertwining_kernel(x, t1, t2, underflow_flag: bool = False):
    """Lambda(x, t) = K_0 of the triple-product argument (zero-drift kernel).

    Vectorised over (t1, t2).  Arguments so large that K_0 underflows yield
    0.0 (with a flag when ``underflow_flag``).
    """
    x = np.asarray(x, dtype=float)
    sys_ = a2_system()
    u1 = float(sys_.alphas[0] @ x)
    u2 = float(sys_.alphas[1] @ x)
    y1 = 2.0 * math.exp(-u1)
    delta23 = math.exp(-(2.0 / 3.0) * (u2 - u1))
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    arg2 = (y1 * y1 * (1.0 + delta23 * np.exp(-t1 + t2))
            * (1.0 + delta23 * np.exp(t1)) * (1.0 + delta23 * np.exp(-t2)))
    arg = np.sqrt(arg2)
    ln_k = bessel_k_ln_vec(0.0, np.atleast_1d(arg))
    vals = np.where(ln_k > -745.0, np.exp(ln_k), 0.0).reshape(np.shape(arg))
    if underflow_flag:
        return vals, np.reshape(ln_k <= -745.0, np.shape(arg))
    return vals if vals.shape else float(vals)


@dataclass
class KernelGrid:
    """Rectangular grid of kernel values with CSV/JSON export."""

    axes: dict                      # {"t1": (min, max, count), "t2": (...)}
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def axis_points(self, name):
        lo, hi, count = self.axes[name]
        return np.linspace(lo, hi, count)

    def to_csv(self, fh):
        t1 = self.axis_points("t1")
        t2 = self.axis_points("t2")
        fh.write("t1,t2,value\n")
        for i, a in enumerate(t1):
            for j, b in enumerate(t2):
                fh.write(f"{a:.12g},{b:.12g},{self.values[i, j]:.16g}\n")

    def sidecar(self) -> dict:
        return {"format_version": 1, "axes": self.axes, **self.metadata}


def kernel_grid(x, t1_axis=(-6.0, 6.0, 61), t2_axis=(-6.0, 6.0, 61)) -> KernelGrid:
    """Evaluate the intertwining kernel on a rectangular (t1, t2) grid."""
    t1 = np.linspace(*t1_axis[:2], int(t1_axis[2]))
    t2 = np.linspace(*t2_axis[:2], int(t2_axis[2]))
    T1, T2 = np.meshgrid(t1, t2, indexing="ij")
    vals = a2_intertwining_kernel(x, T1.ravel(), T2.ravel()).reshape(T1.shape)
    x = np.asarray(x, dtype=float)
    return KernelGrid(axes={"t1": tuple(t1_axis), "t2": tuple(t2_axis)},
                      values=vals,
                      metadata={"model": "A2-intertwining", "x": x.tolist()})


@dataclass(frozen=True)
class MarkovKernelA1:
    """kappa(x, u) = e^{mu u - e^{-x} cosh u} / (2 K_mu(e^{-x})) as a density in u."""

    mu: float
    x: float
    ln_norm: float

    def density(self, u):
        u = np.asarray(u, dtype=float)
        z = math.exp(-self.x)
        return np.exp(self.mu * u - z * np.cosh(u) - self.ln_norm)

    def moment(self, lam: float) -> float:
        """int e^{lam u} kappa(x, u) du = K_{mu+lam}(e^{-x}) / K_mu(e^{-x})."""
        z = math.exp(-self.x)
        return math.exp(bessel_k_ln(self.mu + lam, z) - bessel_k_ln(self.mu, z))


def markov_kernel_a1(mu: float, x: float) -> MarkovKernelA1:
    if mu < 0:
        raise DomainError("markov_kernel_a1 requires mu >= 0")
    ln_norm = math.log(2.0) + bessel_k_ln(mu, math.exp(-x))
    return MarkovKernelA1(mu=mu, x=x, ln_norm=ln_norm)


# ---------------------------------------------------------------------------
# Entrance-limit experiment
# ---------------------------------------------------------------------------

def entrance_limit_mc(depth: float, kappa: float, cfg: McConfig, mu=None,
                      u_stop: float = 3.0, dt_max: float = 2e-3):
    """Scaled exponential functionals of the A2-conditioned diffusion.

    Starts at alpha_1(x_0) = -depth, alpha_2(x_0) = -depth + kappa, runs the
    conditioned SDE with an adaptive (drift-limited) Euler step shared across
    paths, and returns Monte Carlo estimates of

        S_i = e^{alpha_i(x_0)} int_0^infty e^{-2 alpha_i(X_s)} ds

    together with the reference targets (phi(e^kappa), phi(e^{-kappa})) built
    from ``phi_ratio_asymp``.  Returns (estimate_1, estimate_2, targets).
    """
    if not depth > 0:
        raise DomainError("depth must be positive")
    coords = A2Coordinates.from_ab(1.0, 1.0) if mu is None else A2Coordinates.from_mu(mu)
    fld = A2DriftField.for_mu(coords.mu)
    gram = A2DriftField._GRAM
    chol = np.linalg.cholesky(gram)
    n = cfg.n_paths
    u = np.empty((n, 2))
    u[:, 0] = -depth
    u[:, 1] = -depth + kappa
    A = np.zeros((n, 2))
    rngs = [path_generator(cfg.seed, i) for i in range(n)]
    active = np.ones(n, dtype=bool)
    t = 0.0
    it = 0
    tail = np.zeros((n, 2))
    while active.any():
        it += 1
        if it > 2_000_000:
            raise ConvergenceError("entrance simulation did not finish")
        ua = u[active]
        b = fld.g_components(ua) @ gram
        dt = min(dt_max, 0.02 / max(float(np.abs(b).max()), 1e-9))
        z = np.vstack([rngs[i].standard_normal(2) for i in np.where(active)[0]])
        dW = z @ chol.T * math.sqrt(dt)
        # Heun predictor-corrector: the drift varies a few percent across a
        # step in the strong-repulsion phase, which a plain Euler step turns
        # into a visible bias of the accumulated functionals
        u_pred = ua + b * dt + dW
        b2 = fld.g_components(u_pred) @ gram
        u_new = ua + 0.5 * (b + b2) * dt + dW
        e0 = np.exp(-2.0 * ua)
        e1 = np.exp(-2.0 * u_new)
        A[active] += 0.5 * dt * (e0 + e1)
        u[active] = u_new
        idx = np.where(active)[0]
        done = u_new.min(axis=1) >= u_stop
        if np.any(done):
            # remaining-tail bound: e^{-2 u_stop} / (2 * unit drift)
            tail[idx[done]] = 0.5 * np.exp(-2.0 * u_new[done])
            active[idx[done]] = False
        t += dt
    S1 = math.exp(-depth) * A[:, 0]
    S2 = math.exp(-depth + kappa) * A[:, 1]
    scale = np.array([math.exp(-depth), math.exp(-depth + kappa)])
    tb = float((tail * scale).mean())
    est1 = McEstimate(mean=float(S1.mean()),
                      std_error=float(S1.std(ddof=1) / math.sqrt(n)), n=n,
                      tail_bound=tb)
    est2 = McEstimate(mean=float(S2.mean()),
                      std_error=float(S2.std(ddof=1) / math.sqrt(n)), n=n,
                      tail_bound=tb)
    targets = (phi_ratio_asymp(math.exp(kappa)), phi_ratio_asymp(math.exp(-kappa)))
    return est1, est2, targets


__all__ = [
    "A2Coordinates", "KernelGrid", "a2_joint_laplace", "a2_density",
    "morse_conditional_laplace", "morse_density_series",
    "a2_intertwining_kernel", "kernel_grid", "markov_kernel_a1",
    "MarkovKernelA1", "entrance_limit_mc",
]
