"""Scalar special functions with independent evaluation routes.

The Macdonald function K_nu is the workhorse: the primary route integrates

    K_nu(z) = 1/2 (z/2)^nu  int_0^inf t^(-1-nu) exp(-t - z^2/(4t)) dt

directly (split at the saddle of the exponent), the secondary route uses
pi (I_{-nu} - I_nu) / (2 sin pi nu).  Both are exposed so downstream code can
cross-check them.  A log-scale evaluator based on the substitution
t = (z/2) e^{-s} of the same integral (giving int_R e^{nu s - z cosh s} ds / 2)
is used wherever arguments are large enough to underflow.

The Hartman-Watson function Theta(r, t) is evaluated by splitting the
oscillatory integral at the zeros xi = k t of sin(pi xi / t), subdividing each
arch so the Gaussian factor is resolved, and summing arches pairwise.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError, DomainError, OverflowEvalError, PrecisionError
from .quadrature import (EvalResult, QuadratureSpec, composite_gl_nodes,
                         gauss_legendre_rule, integrate_adaptive, panel_edges)

# Lanczos rational approximation of Gamma in log space, g = 7, 9 coefficients.
# Relative error of exp(gamma_ln) is below 1e-14 on the positive axis.
_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def gamma_ln(z: float) -> float:
    """ln Gamma(z) for z > 0 via the Lanczos approximation."""
    if not z > 0:
        raise DomainError(f"gamma_ln requires z > 0, got {z}")
    if z < 0.5:
        # reflection keeps the rational approximation on z >= 0.5
        return math.log(math.pi / math.sin(math.pi * z)) - gamma_ln(1.0 - z)
    z = z - 1.0
    acc = _LANCZOS_COEFFS[0]
    for i, c in enumerate(_LANCZOS_COEFFS[1:], start=1):
        acc += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _LN_SQRT_2PI + (z + 0.5) * math.log(t) - t + math.log(acc)


def gamma_fn(z: float) -> float:
    """Gamma(z) on the full real line minus the poles (sign via reflection)."""
    if z > 0:
        return math.exp(gamma_ln(z))
    if z == math.floor(z):
        raise DomainError(f"Gamma pole at z = {z}")
    # Gamma(z) Gamma(1-z) = pi / sin(pi z)
    return math.pi / (math.sin(math.pi * z) * math.exp(gamma_ln(1.0 - z)))


def bessel_i(nu: float, z: float, tol: float = 1e-16) -> float:
    """Modified Bessel function of the first kind by its power series.

    I_nu(z) = sum_{n>=0} (z/2)^(2n+nu) / (n! Gamma(n+nu+1)), truncated once the
    next term falls below tol times the partial sum.
    """
    if nu <= -1:
        raise DomainError(f"bessel_i requires nu > -1, got nu={nu}")
    if z < 0:
        raise DomainError(f"bessel_i requires z >= 0, got z={z}")
    if z == 0.0:
        return 1.0 if nu == 0 else 0.0
    if z > 650.0:
        # e^z overflows shortly beyond this; callers wanting large arguments
        # should work in log scale.
        raise OverflowEvalError(f"bessel_i overflows for z={z}")
    half = 0.5 * z
    log_term = nu * math.log(half) - gamma_ln(nu + 1.0)
    if log_term > 700.0:
        raise OverflowEvalError("bessel_i series head overflows")
    term = math.exp(log_term)
    total = term
    n = 0
    while n < 4000:
        n += 1
        term *= half * half / (n * (n + nu))
        total += term
        if term < tol * abs(total):
            return total
    raise ConvergenceError("bessel_i series did not converge", best_estimate=total)


def _k_integrand_peak(nu: float, z: float) -> float:
    # maximum of -(1+nu) ln t - t - z^2/(4t): t^2 + (1+nu) t - z^2/4 = 0
    b = 1.0 + nu
    return 0.5 * (-b + math.sqrt(b * b + z * z))


def bessel_k(nu: float, z: float, tol: float = 1e-13) -> float:
    """Macdonald function, primary route: quadrature of the defining integral.

    Valid for any real nu (the integral is symmetric under nu -> -nu via
    t -> z^2/4t).  Switches to exp(bessel_k_ln) once e^{-z} would underflow
    the prefactor scale.
    """
    if not z > 0:
        raise DomainError(f"bessel_k requires z > 0, got z={z}")
    if z > 600.0:
        ln_val = bessel_k_ln(nu, z)
        return math.exp(ln_val) if ln_val > -745.0 else 0.0
    tstar = _k_integrand_peak(nu, z)

    def f(t):
        return math.exp(-(1.0 + nu) * math.log(t) - t - z * z / (4.0 * t))

    left = integrate_adaptive(f, QuadratureSpec(target_tol=tol, max_subdivisions=400,
                                                domain=(0.0, tstar)))
    right = integrate_adaptive(f, QuadratureSpec(target_tol=tol, max_subdivisions=400,
                                                 domain=(tstar, math.inf)))
    return 0.5 * math.exp(nu * math.log(0.5 * z)) * (left.value + right.value)


def bessel_k_via_i(nu: float, z: float, eps: float = 1e-6) -> float:
    """Secondary route: K_nu = pi (I_{-nu} - I_nu) / (2 sin pi nu).

    Near-integer nu is a removable singularity; it is handled by evaluating at
    nu +- eps and averaging (the primary quadrature route stays authoritative).
    """
    if not z > 0:
        raise DomainError(f"bessel_k_via_i requires z > 0, got z={z}")
    nu = abs(nu)
    if abs(nu - round(nu)) < 10.0 * eps:
        base = round(nu)
        vals = []
        for off in (-eps, eps):
            nn = base + off
            if nn <= -1:
                nn = base - off
            vals.append(bessel_k_via_i(nn, z))
        return 0.5 * (vals[0] + vals[1])
    return math.pi * (bessel_i(-nu, z) - bessel_i(nu, z)) / (2.0 * math.sin(math.pi * nu))


def bessel_k_ln(nu: float, z: float, tol: float = 1e-13) -> float:
    """ln K_nu(z), stable for large z.

    Uses the saddle-normalised form of the defining integral under t = t* e^u:
    ln K = ln(1/2 (z/2)^nu) + g(0) + ln int e^{g(u) - g(0)} du with
    g(u) = -nu u - t* e^u - (z^2/4t*) e^{-u}.
    """
    if not z > 0:
        raise DomainError(f"bessel_k_ln requires z > 0, got z={z}")
    tstar = _k_integrand_peak(nu, z)
    a = tstar
    b = z * z / (4.0 * tstar)
    g0 = -a - b

    def f(u):
        # exponent guards: far from the peak the integrand underflows anyway
        s = -nu * u - a * math.exp(min(u, 700.0)) - b * math.exp(min(-u, 700.0)) - g0
        return math.exp(s) if s > -745.0 else 0.0

    res = integrate_adaptive(f, QuadratureSpec(target_tol=tol, max_subdivisions=400,
                                               domain=(-math.inf, math.inf)))
    return math.log(0.5) + nu * math.log(0.5 * z) - nu * math.log(tstar) + g0 + math.log(res.value)


def bessel_k_ln_vec(nu: float, z, order: int = 16, cutoff: float = 48.0):
    """Vectorised ln K_nu over an array of z > 0.

    Composite Gauss-Legendre on int_0^inf e^{-z(cosh u - 1)} cosh(nu u) du,
    peak-normalised so large nu or tiny z cannot overflow.  This is the
    s-substituted form of the same defining integral as ``bessel_k``.
    For z > 20 the integral concentrates near u = 0 and the nodes are laid in
    the scaled variable v = u sqrt(z); below that, fixed u-panels resolve it.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("bessel_k_ln_vec requires z > 0")
    out = np.empty(z.shape)
    small = z <= 20.0

    if np.any(small):
        zs = z[small]
        zmin = float(zs.min())
        # support: z(cosh u - 1) - |nu| u <= cutoff (+ margin for the cosh(nu u) rise)
        u_hi = math.acosh(1.0 + (cutoff + 5.0) / zmin)
        if abs(nu) > 0:
            u_hi = max(u_hi, (cutoff + 5.0) / max(zmin, 1e-300) ** 0.0)  # no-op guard
            # widen while -z(cosh u - 1) + nu u can still be above -cutoff
            while zmin * (math.cosh(u_hi) - 1.0) - abs(nu) * u_hi < cutoff and u_hi < 80.0:
                u_hi += 0.5
        u_hi = min(u_hi + 0.5, 80.0)
        nodes, weights = composite_gl_nodes(panel_edges(0.0, u_hi, 0.2), order)
        expo = -zs[..., None] * (np.cosh(nodes) - 1.0) + _log_cosh(nu * nodes)
        m = expo.max(axis=-1, keepdims=True)
        vals = np.exp(expo - m) * weights
        out[small] = -zs + np.squeeze(m, axis=-1) + np.log(vals.sum(axis=-1))

    if np.any(~small):
        zl = z[~small]
        v_nodes, v_weights = composite_gl_nodes(panel_edges(0.0, 11.0, 0.25), order)
        sq = np.sqrt(zl)[..., None]
        u = v_nodes / sq
        expo = -zl[..., None] * (np.cosh(u) - 1.0) + _log_cosh(nu * u)
        m = expo.max(axis=-1, keepdims=True)
        vals = np.exp(expo - m) * v_weights
        out[~small] = (-zl + np.squeeze(m, axis=-1)
                       + np.log(vals.sum(axis=-1)) - 0.5 * np.log(zl))
    return out


def _log_cosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)


def whittaker_w(k: float, mu: float, x: float, tol: float = 1e-12) -> float:
    """Confluent W function via its real-integral representation.

    W_{k,mu}(x) = x^k e^{-x/2} / Gamma(1/2+mu-k)
                  int_0^inf e^{-t} t^{mu-k-1/2} (1+t/x)^{mu+k-1/2} dt,
    requiring 1/2 + mu - k > 0 and x > 0.
    """
    return math.exp(whittaker_w_ln(k, mu, x, tol))


def whittaker_w_ln(k: float, mu: float, x: float, tol: float = 1e-12) -> float:
    """ln W_{k,mu}(x); same integral as whittaker_w, assembled in log scale."""
    if not x > 0:
        raise DomainError(f"whittaker_w requires x > 0, got {x}")
    p = mu - k - 0.5
    q = mu + k - 0.5
    if not 0.5 + mu - k > 0:
        raise DomainError(f"whittaker_w requires 1/2 + mu - k > 0, got {0.5 + mu - k}")

    def f(t):
        return math.exp(-t + p * math.log(t) + q * math.log1p(t / x))

    # integrable endpoint singularity at 0 when p < 0; split near 0 to help
    res_lo = integrate_adaptive(f, QuadratureSpec(target_tol=tol, max_subdivisions=400,
                                                  domain=(0.0, 1.0)))
    res_hi = integrate_adaptive(f, QuadratureSpec(target_tol=tol, max_subdivisions=400,
                                                  domain=(1.0, math.inf)))
    return (k * math.log(x) - 0.5 * x - gamma_ln(0.5 + mu - k)
            + math.log(res_lo.value + res_hi.value))


def whittaker_m(k: float, mu: float, x: float, tol: float = 1e-15) -> float:
    """Confluent M function by its (regular) series.

    M_{k,mu}(x) = x^(mu+1/2) e^(-x/2) sum_n ((mu-k+1/2)_n / (1+2mu)_n) x^n / n!,
    defined unless 1 + 2 mu is a nonpositive integer.
    """
    if not x > 0:
        raise DomainError(f"whittaker_m requires x > 0, got {x}")
    c = 1.0 + 2.0 * mu
    if c <= 0 and abs(c - round(c)) < 1e-12:
        raise DomainError(f"whittaker_m pole: 1 + 2 mu = {c} is a nonpositive integer")
    a = mu - k + 0.5
    term = 1.0
    total = 1.0
    n = 0
    while n < 5000:
        term *= (a + n) / (c + n) * x / (n + 1.0)
        total += term
        n += 1
        if abs(term) < tol * abs(total) and n > 4:
            break
    else:
        raise ConvergenceError("whittaker_m series did not converge", best_estimate=total)
    return math.exp((mu + 0.5) * math.log(x) - 0.5 * x) * total


def parabolic_d(nu: float, x: float, tol: float = 1e-12) -> float:
    """Parabolic cylinder function D_nu for nu > -1.

    D_nu(x) = sqrt(2/pi) e^{x^2/4} int_0^inf t^nu e^{-t^2/2} cos(x t - pi nu/2) dt.
    """
    if nu <= -1:
        raise DomainError(f"parabolic_d requires nu > -1, got {nu}")
    gauss = parabolic_d_gaussian(nu, x, tol=tol)
    return math.exp(0.25 * x * x) * float(gauss)


def parabolic_d_gaussian(nu: float, x, tol: float = 1e-12, order: int = 12):
    """e^{-x^2/4} D_nu(x), vectorised over x.

    This combination is what density formulas consume; it stays bounded, so it
    is evaluated directly from the defining integral without the e^{x^2/4}
    prefactor.  The t^nu endpoint behaviour is handled by running t = e^u on
    (0, 1] (doubly smooth there) and plain panels on [1, t_hi].
    """
    if nu <= -1:
        raise DomainError(f"parabolic_d requires nu > -1, got {nu}")
    x = np.asarray(x, dtype=float)
    t_hi = math.sqrt(96.0 + 4.0 * max(nu, 0.0) * math.log(10.0 + nu)) + 1.0
    xmax = float(np.abs(x).max()) if x.size else 0.0
    width = min(0.5, math.pi / (2.0 * max(xmax, 1.0)))
    # (0, 1]: t = e^u, integrand e^{(nu+1) u} e^{-e^{2u}/2} cos(x e^u - pi nu/2)
    u_lo = -(48.0 + 3.0) / (nu + 1.0)
    un, uw = composite_gl_nodes(panel_edges(max(u_lo, -720.0), 0.0,
                                            max(width, 0.25)), order)
    t0 = np.exp(un)
    env0 = np.exp((nu + 1.0) * un - 0.5 * t0 ** 2)
    w0 = env0 * uw
    # [1, t_hi]
    tn, tw = composite_gl_nodes(panel_edges(1.0, t_hi, width), order)
    env1 = np.exp(nu * np.log(tn) - 0.5 * tn ** 2)
    w1 = env1 * tw
    nodes = np.concatenate([t0, tn])
    weights = np.concatenate([w0, w1])
    phase = np.cos(np.multiply.outer(x, nodes) - 0.5 * math.pi * nu)
    return math.sqrt(2.0 / math.pi) * (phase * weights).sum(axis=-1)


# ---------------------------------------------------------------------------
# Hartman-Watson function
# ---------------------------------------------------------------------------

_THETA_T_FLOOR = 0.12  # below this the e^{pi^2/2t} cancellation exhausts doubles


def theta_hw(r: float, t: float, t_max: float = 50.0) -> float:
    """Hartman-Watson function Theta(r, t) for r, t > 0.

    Theta(r,t) = r/sqrt(2 pi^3 t) e^{pi^2/2t}
                 int_0^inf e^{-xi^2/2t} e^{-r cosh xi} sinh xi sin(pi xi/t) dxi.

    The oscillatory integral is split at the sine zeros and summed pairwise.
    t > t_max raises PrecisionError (documented engineering cutoff; the
    kernel-level code uses the uncapped internal evaluator, which remains
    accurate at large t where the sine factor no longer oscillates).
    """
    if not (r > 0 and t > 0):
        raise DomainError(f"theta_hw requires r, t > 0, got r={r}, t={t}")
    if t > t_max:
        raise PrecisionError(f"theta_hw: t={t} exceeds the documented cutoff t_max={t_max}")
    if t < _THETA_T_FLOOR:
        raise PrecisionError(
            f"theta_hw: t={t} below {_THETA_T_FLOOR}; the e^(pi^2/2t) prefactor "
            "cancellation exceeds double precision")
    return float(theta_hw_vec(np.array([r]), t)[0])


def theta_hw_vec(r, t: float, order: int = 24, env_cut: float = 1e-18):
    """Theta(r, t) for an array of r > 0 at fixed t (no large-t cutoff).

    Arch boundaries sit at the sine zeros xi = k t; arches are subdivided so
    the Gaussian factor is resolved even when t is large, and arch totals are
    accumulated pairwise to soften the alternating cancellation.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0):
        raise DomainError("theta_hw_vec requires r > 0")
    out = np.zeros(r.shape)
    big = r > 745.0  # e^{-r cosh xi} underflows everywhere
    if np.all(big):
        return out
    rs = r[~big]
    rmin = float(rs.min())
    L = -math.log(env_cut)
    xi_stop = math.sqrt(2.0 * t * L)
    lo, hi = 0.0, xi_stop
    for _ in range(60):  # shrink using the cosh decay of the envelope
        mid = 0.5 * (lo + hi)
        if mid * mid / (2.0 * t) + rmin * math.cosh(mid) > L:
            hi = mid
        else:
            lo = mid
    xi_stop = min(xi_stop, hi + 1e-12)
    if xi_stop <= 0.0:
        return out
    x, w = gauss_legendre_rule(order)
    width = max(0.25, min(math.sqrt(t) / 3.0, 4.0))
    arch_sums = []
    k = 0
    a = 0.0
    while a < xi_stop:
        b = min((k + 1) * t, xi_stop)
        edges = panel_edges(a, b, width)
        s = np.zeros(rs.shape)
        for p0, p1 in zip(edges[:-1], edges[1:]):
            xi_n = 0.5 * (p1 - p0) * x + 0.5 * (p0 + p1)
            wt = 0.5 * (p1 - p0) * w
            base = np.exp(-xi_n ** 2 / (2.0 * t)) * np.sinh(xi_n) * np.sin(math.pi * xi_n / t)
            with np.errstate(under='ignore'):
                vals = np.exp(-np.multiply.outer(rs, np.cosh(xi_n)))
            s += vals @ (base * wt)
        arch_sums.append(s)
        k += 1
        a = k * t
    total = np.zeros(rs.shape)
    i = 0
    while i + 1 < len(arch_sums):
        total += arch_sums[i] + arch_sums[i + 1]
        i += 2
    if i < len(arch_sums):
        total += arch_sums[i]
    with np.errstate(over='ignore'):
        pref = rs / math.sqrt(2.0 * math.pi ** 3 * t) * math.exp(math.pi ** 2 / (2.0 * t))
    out[~big] = pref * total
    return out


__all__ = [
    "EvalResult", "QuadratureSpec", "integrate_adaptive",
    "gamma_ln", "gamma_fn", "bessel_i", "bessel_k", "bessel_k_via_i",
    "bessel_k_ln", "bessel_k_ln_vec", "whittaker_w", "whittaker_w_ln",
    "whittaker_m", "parabolic_d", "parabolic_d_gaussian",
    "theta_hw", "theta_hw_vec",
]
