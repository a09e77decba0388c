"""Class-one Whittaker functions on crystallographic simple systems.

Everything is anchored to the fundamental series

    Phi_nu(x) = sum_{lam in L} c_lam(nu) e^{-(lam+nu)(x)},
    ((lam,lam) + 2(lam,nu)) c_lam = 2 sum_i |eta_i|^2 c_{lam - 2 alpha_i},

and to the Weyl-sum normalisations built from the transfer factors M(s,nu),
the c-function and the gamma products a(nu).  The Weyl-invariant function

    w_nu(x) = R(nu)^{-1} sum_s (-1)^{l(s_0 s)} m_{s nu}(x),
    R(nu)   = prod_{alpha in Sigma_+^o} 2 sin(pi nu_alpha) / pi,

equals a(nu) c(nu)^{-1} Psi_nu(x); both routes are implemented and tested
against each other.  The eta-constant t_beta = |eta_beta| / sqrt(2 (beta,beta))
attached to a non-simple positive root is the one of the simple root in its
Weyl orbit: this is the unique extension under which the Weyl sums are
actually invariant (checked numerically to 1e-10 and in the test suite).

Type A2 extras: the double-Bessel integral representation, the Bessel closed
form on the diagonal, the large-argument leading term, and the small-spectral-
parameter limit towards the alternating exponential sum phi(nu, x).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as _sopt

from .errors import (ConvergenceError, DomainError, ParameterError,
                     ResonanceError, ValidationError)
from .quadrature import composite_gl_nodes, panel_edges
from .rootsys import SimpleSystem, WeylElement
from .specfun import (bessel_k, bessel_k_ln_vec, gamma_fn, gamma_ln)

_RESONANCE_MARGIN = 1e-8
_INTEGER_NU_TOL = 2e-6     # switch to the +-eps average this close to a pole of R
_EPS_SHIFT = 1e-5          # shift clears the detection window along g
_HEIGHT_CAP = 512


def gamma_rcp(z: float) -> float:
    """1/Gamma(z), zero at the poles."""
    if z > 0:
        return math.exp(-gamma_ln(z))
    if abs(z - round(z)) < 1e-14:
        return 0.0
    return math.sin(math.pi * z) * math.exp(gamma_ln(1.0 - z)) / math.pi


@dataclass(frozen=True)
class GeneralFunctionalFamily:
    """Distinct nonzero linear functionals with a nonempty chamber.

    This is the general setting of the exponential-functional problem; it does
    not assume a simple system.  ``theta`` holds the weights theta_i whose
    squares multiply e^{-2 alpha_i(x)}.
    """

    alphas: np.ndarray
    theta: np.ndarray

    def __init__(self, alphas, theta):
        alphas = np.atleast_2d(np.asarray(alphas, dtype=float))
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (alphas.shape[0],):
            raise DomainError("theta must provide one weight per functional")
        norms = np.linalg.norm(alphas, axis=1)
        if np.any(norms < 1e-14):
            raise ValidationError("functionals must be nonzero", axiom="nonzero")
        d = alphas.shape[0]
        for i in range(d):
            for j in range(i + 1, d):
                if np.allclose(alphas[i], alphas[j], atol=1e-12):
                    raise ValidationError("functionals must be pairwise distinct",
                                          axiom="distinct")
        # chamber nonempty <=> {x : alpha_i(x) >= 1} feasible (scale invariance)
        res = _sopt.linprog(c=np.zeros(alphas.shape[1]), A_ub=-alphas,
                            b_ub=-np.ones(d), bounds=[(None, None)] * alphas.shape[1],
                            method="highs")
        if not res.success:
            raise ValidationError("chamber {x : alpha_i(x) > 0} is empty", axiom="chamber")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "theta", theta)

    @property
    def d(self):
        return self.alphas.shape[0]

    @property
    def n(self):
        return self.alphas.shape[1]

    def in_chamber(self, mu) -> bool:
        return bool(np.all(self.alphas @ np.asarray(mu, dtype=float) > 0))

    @staticmethod
    def morse(theta_sq=(0.5, 0.5)) -> "GeneralFunctionalFamily":
        """n=1, d=2 family alpha_1(x)=x, alpha_2(x)=x/2 (Morse potential)."""
        return GeneralFunctionalFamily([[1.0], [0.5]], np.sqrt(np.asarray(theta_sq)))

    @staticmethod
    def from_system(system: SimpleSystem, theta) -> "GeneralFunctionalFamily":
        return GeneralFunctionalFamily(system.alphas, theta)


def theta_shift(system: SimpleSystem, theta_sq, eta_sq):
    """Translation t with sum theta_i^2 e^{-2 a_i(x)} = sum eta_i^2 e^{-2 a_i(x - t)}.

    Requires alpha_i(t) = (1/2) log(eta_i^2 / theta_i^2); solvable because the
    simple roots are independent.
    """
    theta_sq = np.asarray(theta_sq, dtype=float)
    eta_sq = np.asarray(eta_sq, dtype=float)
    if np.any(theta_sq <= 0) or np.any(eta_sq <= 0):
        raise DomainError("theta_shift requires positive weights")
    rhs = 0.5 * np.log(eta_sq / theta_sq)
    coef = np.linalg.solve(system.gram, rhs)
    return system.alphas.T @ coef


class WhittakerParams:
    """Evaluation parameters: system, weights |eta_alpha|^2, spectral nu.

    ``nu`` is a vector of the ambient space (it should lie in the span of the
    simple roots; components are projected there for the pairings).  Purely
    imaginary nu is accepted by the series coefficients; the Weyl-sum
    normalisations require real nu.
    """

    def __init__(self, system: SimpleSystem, eta_sq, nu, max_height: int = 16,
                 tol: float = 1e-12):
        self.system = system.validate()
        self.eta_sq = np.asarray(eta_sq, dtype=float)
        if self.eta_sq.shape != (system.d,) or np.any(self.eta_sq <= 0):
            raise DomainError("eta_sq must be positive, one entry per simple root")
        self.nu = np.asarray(nu)
        if self.nu.shape != (system.n,):
            raise DomainError("nu must be a length-n vector")
        if max_height < 1:
            raise DomainError("max_height must be >= 1")
        self.max_height = int(max_height)
        self.tol = float(tol)
        roots, indiv, orbit = system.positive_roots()
        self._pos_roots = roots
        self._indiv = indiv
        self._orbit_of_root = orbit
        # orbit lookup for indivisible roots
        keys = [np.round(r, 9).tobytes() for r in roots]
        self._orbit_map = dict(zip(keys, orbit))

    # -- basic pairings -------------------------------------------------------

    def with_nu(self, nu) -> "WhittakerParams":
        return WhittakerParams(self.system, self.eta_sq, nu,
                               max_height=self.max_height, tol=self.tol)

    def nu_alpha(self, root, nu=None):
        nu = self.nu if nu is None else nu
        root = np.asarray(root, dtype=float)
        return np.dot(root, nu) / np.dot(root, root)

    def indivisible_roots(self):
        return self._indiv

    def orbit_index(self, root) -> int:
        k = np.round(np.asarray(root, dtype=float), 9).tobytes()
        try:
            return self._orbit_map[k]
        except KeyError:
            raise DomainError("vector is not a positive root of this system")

    def t_const(self, root) -> float:
        """t_beta = |eta_beta| / sqrt(2 (beta, beta)), eta extended orbit-wise."""
        i = self.orbit_index(root)
        rr = float(np.dot(root, root))
        return math.sqrt(self.eta_sq[i] / (2.0 * rr))

    def multiplicities(self, root):
        i = self.orbit_index(root)
        return self.system.m1[i], self.system.m2[i]


@dataclass
class CoeffTable:
    """Series coefficients c_lam(nu) keyed by the lattice coefficient tuple."""

    nu: np.ndarray
    entries: dict
    points: list = field(repr=False)

    def __getitem__(self, coeffs):
        return self.entries[tuple(coeffs)]


def hashizume_coeffs(params: WhittakerParams, nu=None, max_height=None) -> CoeffTable:
    """Solve the lattice recursion for c_lam(nu) up to max_height.

    Raises ResonanceError (naming the lattice point) when
    |(lam,lam) + 2(lam,nu)| falls inside the margin.
    """
    nu = params.nu if nu is None else np.asarray(nu)
    H = params.max_height if max_height is None else int(max_height)
    pts = params.system.lattice_points(H)
    alphas = params.system.alphas
    table = {}
    for pt in pts:
        if pt.height == 0:
            table[pt.coeffs] = 1.0 if not np.iscomplexobj(nu) else 1.0 + 0.0j
            continue
        lam = pt.vector
        denom = np.dot(lam, lam) + 2.0 * np.dot(lam, nu)
        if abs(denom) <= _RESONANCE_MARGIN * max(1.0, abs(np.dot(lam, lam))):
            raise ResonanceError(
                f"resonant spectral parameter at lattice point {pt.coeffs}",
                lattice_point=pt)
        acc = 0.0
        for i in range(params.system.d):
            prev = list(pt.coeffs)
            prev[i] -= 1
            if prev[i] >= 0:
                acc += params.eta_sq[i] * table[tuple(prev)]
        table[pt.coeffs] = 2.0 * acc / denom
    return CoeffTable(nu=nu, entries=table, points=pts)


def phi_series(params: WhittakerParams, x, nu=None) -> float:
    """Phi_nu(x) = sum_lam c_lam(nu) e^{-(lam+nu)(x)} with adaptive height.

    The height is doubled until the last height shell contributes less than
    params.tol relatively, starting from params.max_height (cap 512).
    """
    nu = params.nu if nu is None else np.asarray(nu)
    x = np.asarray(x, dtype=float)
    H = params.max_height
    last = None
    while True:
        tab = hashizume_coeffs(params, nu=nu, max_height=H)
        shells = {}
        for pt in tab.points:
            c = tab.entries[pt.coeffs]
            term = c * np.exp(-(np.dot(pt.vector, x) + np.dot(nu, x)))
            shells[pt.height] = shells.get(pt.height, 0.0) + term
        total = math.fsum(shells.values()) if not np.iscomplexobj(nu) else sum(shells.values())
        tail = abs(shells[max(shells)])
        if tail <= params.tol * max(abs(total), 1e-300):
            return total
        if H >= _HEIGHT_CAP:
            raise ConvergenceError(
                f"series did not converge within height {_HEIGHT_CAP}",
                best_estimate=total, error_estimate=tail)
        last = total
        H = min(2 * H, _HEIGHT_CAP)


def m_normalized(params: WhittakerParams, x, nu=None) -> float:
    """m_nu(x) = prod_{beta in Sigma_+^o} t_beta^{nu_beta} Gamma(1+nu_beta)^{-1} Phi_nu(x)."""
    nu = params.nu if nu is None else np.asarray(nu)
    pref = 1.0
    for beta in params.indivisible_roots():
        nb = params.nu_alpha(beta, nu)
        pref *= params.t_const(beta) ** nb * gamma_rcp(1.0 + nb)
    return pref * phi_series(params, x, nu=nu)


def hc_c_function(params: WhittakerParams, nu=None) -> float:
    """Harish-Chandra c-function: c(nu) = prod d_beta f_beta(nu) over Sigma_+^o."""
    nu = params.nu if nu is None else np.asarray(nu)
    out = 1.0
    for beta in params.indivisible_roots():
        nb = params.nu_alpha(beta, nu)
        m1, m2 = params.multiplicities(beta)
        f = (gamma_fn(nb) * gamma_fn((nb + m1 / 2.0) / 2.0)
             / (gamma_fn(nb + m1 / 2.0) * gamma_fn((nb + m1 / 2.0 + m2) / 2.0)))
        d = (2.0 * math.pi / float(np.dot(beta, beta))) ** ((m1 - m2) / 2.0)
        out *= d * f
    return out


def a_norm(params: WhittakerParams, nu=None) -> float:
    """a(nu) = prod_{beta in Sigma_+^o} (1/2) t_beta^{-nu_beta} Gamma(nu_beta)."""
    nu = params.nu if nu is None else np.asarray(nu)
    out = 1.0
    for beta in params.indivisible_roots():
        nb = params.nu_alpha(beta, nu)
        out *= 0.5 * params.t_const(beta) ** (-nb) * gamma_fn(nb)
    return out


def _e_inv(v: float, m1: int, m2: int) -> float:
    return gamma_fn((v + m1 / 2.0 + 1.0) / 2.0) * gamma_fn((v + m1 / 2.0 + m2) / 2.0)


def _m_simple(params: WhittakerParams, i: int, nu) -> float:
    alpha = params.system.alphas[i]
    v = params.nu_alpha(alpha, nu)
    aa = float(np.dot(alpha, alpha))
    base = math.sqrt(params.eta_sq[i]) / (2.0 * math.sqrt(2.0 * aa))
    m1, m2 = params.system.m1[i], params.system.m2[i]
    return base ** (2.0 * v) * _e_inv(-v, m1, m2) / _e_inv(v, m1, m2)


def check_in_u(params: WhittakerParams, nu=None, margin: float = _RESONANCE_MARGIN):
    """Numerical membership test for the admissible set of the Weyl-sum route.

    (1) nu_beta != 0 on Sigma_+; (2) every s nu clears the resonance margin up
    to max_height; (3) s nu - t nu is not in the integer root lattice for
    s != t.  Raises ParameterError on failure.
    """
    nu = params.nu if nu is None else np.asarray(nu, dtype=float)
    roots, _, _ = params.system.positive_roots()
    for beta in roots:
        if abs(params.nu_alpha(beta, nu)) <= margin:
            raise ParameterError(f"nu_alpha vanishes on root {beta}")
    group = params.system.weyl_group()
    for el in group:
        snu = el.matrix @ nu
        try:
            hashizume_coeffs(params, nu=snu, max_height=min(params.max_height, 8))
        except ResonanceError as exc:
            raise ParameterError(f"s nu resonant for s={el.word}: {exc}")
    for i, e1 in enumerate(group):
        for e2 in group[i + 1:]:
            diff = (e1.matrix - e2.matrix) @ nu
            try:
                coef = params.system.simple_coefficients(diff)
            except ValidationError:
                continue
            if np.all(np.abs(coef - np.round(coef)) < margin):
                raise ParameterError(
                    f"s nu - t nu lies in the root lattice for s={e1.word}, t={e2.word}")
    return True


def m_transfer(params: WhittakerParams, element: WeylElement, nu=None,
               check: bool = True) -> float:
    """Transfer factor M(s, nu) via the generator value and the cocycle rule.

    M(s_alpha s, nu) = M(s, nu) M(s_alpha, s nu) along the reduced word of s.
    """
    nu = params.nu if nu is None else np.asarray(nu, dtype=float)
    if check:
        check_in_u(params, nu)
    gens = [params.system._reflection(i) for i in range(params.system.d)]

    def apply_word(word, v):
        out = np.asarray(v, dtype=float)
        for i in reversed(word):
            out = gens[i] @ out
        return out

    def rec(word):
        if not word:
            return 1.0
        i, rest = word[0], word[1:]
        return rec(rest) * _m_simple(params, i, apply_word(rest, nu))

    return rec(element.word)


def psi_hashizume(params: WhittakerParams, x, nu=None, check: bool = True) -> float:
    """Psi_nu(x) = sum_s M(s_0 s, nu) c(s_0 s nu) Phi_{s nu}(x)."""
    nu = params.nu if nu is None else np.asarray(nu, dtype=float)
    if check:
        check_in_u(params, nu)
    system = params.system
    s0 = system.longest_element()
    terms = []
    by_key = {np.round(el.matrix, 9).tobytes(): el for el in system.weyl_group()}
    for el in system.weyl_group():
        comp = s0.matrix @ el.matrix
        s0s = by_key[np.round(comp, 9).tobytes()]
        snu = el.matrix @ nu
        terms.append(m_transfer(params, s0s, nu=nu, check=False)
                     * hc_c_function(params, nu=s0s.matrix @ nu)
                     * phi_series(params, x, nu=snu))
    return math.fsum(terms)


def _generic_direction(system: SimpleSystem):
    # fixed "irrational" combination of the simple roots, normalised so that
    # |g_beta| >= 1 on every indivisible root: the +-eps shift then moves all
    # nu_beta by at least eps, clearing the integer-detection window
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    coef = np.array([phi ** (-(j + 1)) for j in range(system.d)])
    g = system.alphas.T @ coef
    _, indiv, _ = system.positive_roots()
    gmin = min(abs(float(b @ g) / float(b @ b)) for b in indiv)
    return g / gmin


def w_normalized(params: WhittakerParams, x, nu=None, _shift_ok: bool = True) -> float:
    """Weyl-invariant normalisation via the alternating sum.

    w_nu(x) = R(nu)^{-1} sum_s (-1)^{l(s_0 s)} m_{s nu}(x).  Within
    _INTEGER_NU_TOL of a zero of R the value is obtained by averaging at
    nu +- eps g along a fixed generic direction g (w is entire in nu, so the
    symmetric average is accurate to O(eps^2)).  The summation itself uses
    fsum, so near-zeros of R cost accuracy only through the O(1e-16/|R|)
    roundoff of the individual terms.
    """
    nu = params.nu if nu is None else np.asarray(nu, dtype=float)
    indiv = params.indivisible_roots()
    vals = np.array([params.nu_alpha(b, nu) for b in indiv])
    if _shift_ok and np.any(np.abs(vals - np.round(vals)) < _INTEGER_NU_TOL):
        # canonicalise to the dominant representative first so that Weyl
        # images of nu take the averaging detour through the same point
        for el in params.system.weyl_group():
            cand = el.matrix @ nu
            if all(params.nu_alpha(b, cand) >= -1e-12
                   for b in params.system.alphas):
                nu = cand
                break
        g = _generic_direction(params.system)

        def avg(eps):
            lo = w_normalized(params, x, nu=nu - eps * g, _shift_ok=False)
            hi = w_normalized(params, x, nu=nu + eps * g, _shift_ok=False)
            return 0.5 * (lo + hi)

        # Richardson in eps^2: w entire in nu, so avg(eps) = w + C eps^2 + ...
        a1, a3 = avg(_EPS_SHIFT), avg(3.0 * _EPS_SHIFT)
        return a1 + (a1 - a3) / 8.0
    R = 1.0
    for b, v in zip(indiv, vals):
        R *= 2.0 * math.sin(math.pi * v) / math.pi
    s0_len = params.system.longest_element().length
    terms = []
    for el in params.system.weyl_group():
        sign = -1.0 if (s0_len + el.length) % 2 else 1.0
        terms.append(sign * m_normalized(params, x, nu=el.matrix @ nu))
    return math.fsum(terms) / R


def w_via_psi(params: WhittakerParams, x, nu=None) -> float:
    """a(nu) c(nu)^{-1} Psi_nu(x): the transfer-factor route to w (for checks)."""
    nu = params.nu if nu is None else np.asarray(nu, dtype=float)
    return (a_norm(params, nu=nu) / hc_c_function(params, nu=nu)
            * psi_hashizume(params, x, nu=nu))


def phi_alt(system: SimpleSystem, nu, x) -> float:
    """phi(nu, x) = h(nu)^{-1} sum_s (-1)^{l(s)} e^{(s nu)(x)}, h = prod nu_beta."""
    nu = np.asarray(nu, dtype=float)
    x = np.asarray(x, dtype=float)
    _, indiv, _ = system.positive_roots()
    h = 1.0
    for b in indiv:
        v = float(np.dot(b, nu) / np.dot(b, b))
        if v == 0.0:
            raise DomainError("phi_alt undefined: some nu_beta vanishes")
        h *= v
    terms = [el.sign * math.exp(float(np.dot(el.matrix @ nu, x)))
             for el in system.weyl_group()]
    return math.fsum(terms) / h


def laplace_whittaker(params: WhittakerParams, mu, x) -> float:
    """Predicted joint Laplace transform of the exponential functionals.

    For mu in the open chamber, returns

        e^{-mu(x)} prod_{beta in Sigma_+^o} 2 t_beta^{mu_beta}
        Gamma(mu_beta)^{-1}  k_mu(x),    k_mu = w_{-mu} (= w_{-s_0 mu}).
    """
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(x, dtype=float)
    if not np.all(params.system.alphas @ mu > 0):
        raise DomainError("mu must lie in the open chamber")
    ln_pref = -float(np.dot(mu, x))
    for beta in params.indivisible_roots():
        mb = params.nu_alpha(beta, mu)
        ln_pref += math.log(2.0) + mb * math.log(params.t_const(beta)) - gamma_ln(mb)
    s0 = params.system.longest_element()
    nu = -(s0.matrix @ mu)     # Weyl-equivalent to -mu; keeps the series convergent
    w = w_normalized(params, x, nu=nu)
    return math.exp(ln_pref) * w


def pde_residual(f, alphas, weights, spectral: float, x, h: float = 1e-3,
                 basis=None) -> float:
    """Normalised central-difference residual of the Schroedinger identity.

    residual = [ (1/2) Lap f - (sum_i weights_i e^{-2 alpha_i(x)}) f
                 - spectral * f ] / |f(x)|,
    with the Laplacian taken along ``basis`` (orthonormal directions; defaults
    to the standard basis).
    """
    x = np.asarray(x, dtype=float)
    alphas = np.atleast_2d(np.asarray(alphas, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if basis is None:
        basis = np.eye(x.size)
    f0 = f(x)
    lap = 0.0
    for b in np.atleast_2d(basis):
        lap += (f(x + h * b) - 2.0 * f0 + f(x - h * b)) / (h * h)
    pot = float(np.dot(weights, np.exp(-2.0 * (alphas @ x))))
    return (0.5 * lap - pot * f0 - spectral * f0) / abs(f0)


# ---------------------------------------------------------------------------
# Type A2 specifics
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)


def a2_system() -> SimpleSystem:
    return SimpleSystem.preset("A2")


def a2_nu_from_ab(a: float, b: float) -> np.ndarray:
    """Spectral vector nu in R^3_0 with (alpha_1, nu) = a, (alpha_2, nu) = b."""
    sys_ = a2_system()
    coef = np.linalg.solve(sys_.gram, np.array([a, b], dtype=float))
    return sys_.alphas.T @ coef


def a2_x_from_alphas(u1: float, u2: float) -> np.ndarray:
    """Point x in R^3_0 with alpha_1(x) = u1, alpha_2(x) = u2."""
    sys_ = a2_system()
    coef = np.linalg.solve(sys_.gram, np.array([u1, u2], dtype=float))
    return sys_.alphas.T @ coef


def a2_params(a: float, b: float, max_height: int = 24, tol: float = 1e-13) -> WhittakerParams:
    """WhittakerParams for the A2 preset with |eta|^2 = 2 on both simple roots."""
    return WhittakerParams(a2_system(), eta_sq=(2.0, 2.0), nu=a2_nu_from_ab(a, b),
                           max_height=max_height, tol=tol)


def a2_w_series(a: float, b: float, y1: float, y2: float, **kw) -> float:
    """Series route to w_nu(x) at the point with y_i = 2 e^{-alpha_i(x)}."""
    if not (y1 > 0 and y2 > 0):
        raise DomainError("y1, y2 must be positive")
    params = a2_params(a, b, **kw)
    x = a2_x_from_alphas(math.log(2.0 / y1), math.log(2.0 / y2))
    return w_normalized(params, x)


def _vt_log_integrand(a, b, y1, y2, lr):
    c = a + b
    r = np.exp(lr)
    z1 = y1 * np.sqrt(1.0 + r)
    z2 = y2 * np.sqrt(1.0 + 1.0 / r)
    return (bessel_k_ln_vec(c, z1) + bessel_k_ln_vec(c, z2)
            + 0.5 * (a - b) * lr)


def a2_vt_integral_ln(a: float, b: float, y1: float, y2: float,
                      width: float = 0.25, order: int = 12) -> float:
    """ln of the double-Bessel integral representation of w_nu(x).

    w_nu(x) = 1/2 (y1/y2)^{(a-b)/3}
              int_0^inf K_{a+b}(y1 sqrt(1+r)) K_{a+b}(y2 sqrt(1+1/r))
                        r^{(a-b)/2} dr/r,
    evaluated in log scale on r = e^{lr} panels centred at the integrand peak
    lr_0 = (2/3) log(y2/y1) and extended until the integrand has dropped 45
    e-folds below its maximum.
    """
    if not (a > 0 and b > 0 and y1 > 0 and y2 > 0):
        raise DomainError("a2_vt_integral requires positive a, b, y1, y2")
    lr0 = (2.0 / 3.0) * math.log(y2 / y1)
    lo, hi = lr0 - 14.0, lr0 + 14.0

    def block(lo_, hi_):
        nodes, weights = composite_gl_nodes(panel_edges(lo_, hi_, width), order)
        return nodes, weights, _vt_log_integrand(a, b, y1, y2, nodes)

    nodes, weights, hvals = block(lo, hi)
    m = hvals.max()
    for _ in range(30):   # widen until both tails are negligible
        grew = False
        if hvals[nodes.argsort()][-1] > m - 45.0:   # right tail
            n2, w2, h2 = block(hi, hi + 12.0)
            nodes = np.concatenate([nodes, n2]); weights = np.concatenate([weights, w2])
            hvals = np.concatenate([hvals, h2]); hi += 12.0; grew = True
        if hvals[nodes.argsort()][0] > m - 45.0:    # left tail
            n2, w2, h2 = block(lo - 12.0, lo)
            nodes = np.concatenate([nodes, n2]); weights = np.concatenate([weights, w2])
            hvals = np.concatenate([hvals, h2]); lo -= 12.0; grew = True
        m = hvals.max()
        if not grew:
            break
    val = float(np.sum(weights * np.exp(hvals - m)))
    return math.log(0.5) + (a - b) / 3.0 * math.log(y1 / y2) + m + math.log(val)


def a2_vt_integral(a: float, b: float, y1: float, y2: float) -> float:
    """The double-Bessel integral route to w_nu(x) (see a2_vt_integral_ln)."""
    return math.exp(a2_vt_integral_ln(a, b, y1, y2))


def a2_closed_23(y1: float, y2: float) -> float:
    """Bessel closed form on the diagonal of the spectral parameter.

    W(y1, y2) = 2/(sqrt(3) pi) (y1 y2)^{1/3} S^{1/2} K_{1/3}(S^{3/2}),
    S = y1^{2/3} + y2^{2/3}.  Under the dictionary
    w_nu(x) = pi^2/2 (y1 y2)^{-1} W(y1, y2) this equals the a = b = 1/3
    evaluation of the integral representation (the identity holds at
    a = b = 1/3, i.e. (nu_1, nu_2) = (4/9, 4/9); verified to 1e-12 in the
    test suite).
    """
    if not (y1 > 0 and y2 > 0):
        raise DomainError("a2_closed_23 requires positive y1, y2")
    S = y1 ** (2.0 / 3.0) + y2 ** (2.0 / 3.0)
    return (2.0 / (math.sqrt(3.0) * math.pi) * (y1 * y2) ** (1.0 / 3.0)
            * math.sqrt(S) * bessel_k(1.0 / 3.0, S ** 1.5))


def a2_leading(y1: float, y2: float) -> float:
    """Leading large-argument term, independent of the spectral parameter.

    sqrt(2/(3 pi)) (y1 y2)^{1/3} S^{-1/4} exp(-S^{3/2}), S = y1^{2/3}+y2^{2/3}.
    (The decaying exponent +3/2 is used; the sign printed with a negative
    power is inconsistent with the closed form and with the integral
    representation, as the tests document.)
    """
    if not (y1 > 0 and y2 > 0):
        raise DomainError("a2_leading requires positive y1, y2")
    S = y1 ** (2.0 / 3.0) + y2 ** (2.0 / 3.0)
    return (math.sqrt(2.0 / (3.0 * math.pi)) * (y1 * y2) ** (1.0 / 3.0)
            * S ** -0.25 * math.exp(-S ** 1.5))


def phi_ratio_asymp(d: float) -> float:
    """The ratio-exponent function phi(d) as printed in the source material:

    phi(d) = (1 + d^{2/3}) - d^{2/3}(1 + d^{2/3})^{1/2} + d^{1/3}(1 + d^{-2/3})^{1/2}.

    phi(1) = 2.  Note: the first two terms make this formula inconsistent with
    the exact closed form of the function it describes; the numerically
    verified ratio exponent is the third term alone, d^{1/3}(1+d^{-2/3})^{1/2}
    = (1+d^{2/3})^{1/2}.  The published formula is kept as the contract and the
    discrepancy is asserted (documented) in the acceptance suite.
    """
    if not d > 0:
        raise DomainError("phi_ratio_asymp requires d > 0")
    d23 = d ** (2.0 / 3.0)
    return ((1.0 + d23) - d23 * math.sqrt(1.0 + d23)
            + d ** (1.0 / 3.0) * math.sqrt(1.0 + d ** (-2.0 / 3.0)))


__all__ = [
    "GeneralFunctionalFamily", "WhittakerParams", "CoeffTable",
    "hashizume_coeffs", "phi_series", "m_normalized", "hc_c_function",
    "a_norm", "m_transfer", "psi_hashizume", "w_normalized", "w_via_psi",
    "check_in_u", "phi_alt", "laplace_whittaker", "pde_residual",
    "theta_shift", "a2_system", "a2_nu_from_ab", "a2_x_from_alphas",
    "a2_params", "a2_w_series", "a2_vt_integral", "a2_vt_integral_ln",
    "a2_closed_23", "a2_leading", "phi_ratio_asymp", "gamma_rcp",
]
