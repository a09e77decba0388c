"""Finite reflection groups from simple systems.

A simple system is a linearly independent family alpha_1..alpha_d in R^n whose
reflections generate a finite group with integral Cartan pairings
2(alpha_i, alpha_j)/(alpha_j, alpha_j).  This module validates candidates,
enumerates the Weyl group (with reduced words and lengths), the positive roots
and the lattice L = 2 Z_+(Pi) used by the series coefficients.

Non-reduced (BC-type) configurations are expressed through the multiplicity
table: a positive root beta acquires a double 2 beta whenever m(2 alpha) > 0
on beta's simple-root orbit.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

_DEDUP_DECIMALS = 9      # group elements are distinct at O(1); float dust below 1e-9
_CLOSURE_CAP = 10000


@dataclass(frozen=True)
class WeylElement:
    """One group element: reduced word, orthogonal matrix, length and sign."""

    word: tuple
    matrix: np.ndarray
    length: int

    @property
    def sign(self) -> int:
        return -1 if self.length % 2 else 1

    def apply(self, v):
        return self.matrix @ np.asarray(v, dtype=float)

    def __hash__(self):
        return hash(self.word)

    def __eq__(self, other):
        return isinstance(other, WeylElement) and self.word == other.word


@dataclass(frozen=True)
class LatticePoint:
    """Point lam = sum 2 n_i alpha_i of L = 2 Z_+(Pi)."""

    coeffs: tuple
    vector: np.ndarray

    @property
    def height(self) -> int:
        return sum(self.coeffs)

    def __hash__(self):
        return hash(self.coeffs)

    def __eq__(self, other):
        return isinstance(other, LatticePoint) and self.coeffs == other.coeffs


class SimpleSystem:
    """Validated simple system with its multiplicity table.

    Attributes
    ----------
    n : ambient dimension
    alphas : (d, n) array of simple roots
    gram : (d, d) Gram matrix (alpha_i, alpha_j)
    m1, m2 : per-simple-root multiplicities m(alpha), m(2 alpha)
    """

    def __init__(self, alphas, m1=None, m2=None, name=None):
        alphas = np.atleast_2d(np.asarray(alphas, dtype=float))
        self.alphas = alphas
        self.d, self.n = alphas.shape
        self.m1 = tuple(int(v) for v in (m1 if m1 is not None else [1] * self.d))
        self.m2 = tuple(int(v) for v in (m2 if m2 is not None else [0] * self.d))
        self.name = name
        self.gram = alphas @ alphas.T
        self._validated = False
        self._group = None
        self._roots = None

    # -- validation ---------------------------------------------------------

    def validate(self) -> "SimpleSystem":
        """Check the defining axioms; raises ValidationError naming the one that fails."""
        if self._validated:
            return self
        if len(self.m1) != self.d or len(self.m2) != self.d:
            raise ValidationError("multiplicity tables must have one entry per simple root",
                                  axiom="multiplicities")
        if any(m < 0 for m in self.m1 + self.m2):
            raise ValidationError("multiplicities must be nonnegative", axiom="multiplicities")
        if np.linalg.matrix_rank(self.alphas, tol=1e-10) < self.d:
            raise ValidationError("simple roots must be linearly independent",
                                  axiom="independence")
        # integral Cartan pairings
        for i in range(self.d):
            for j in range(self.d):
                c = 2.0 * self.gram[i, j] / self.gram[j, j]
                if abs(c - round(c)) > 1e-9:
                    raise ValidationError(
                        f"Cartan entry 2(a_{i},a_{j})/(a_{j},a_{j}) = {c} is not integral",
                        axiom="crystallographic")
        # chamber nonempty: least-squares x with (alpha_i, x) = 1 for all i
        x, *_ = np.linalg.lstsq(self.alphas, np.ones(self.d), rcond=None)
        if not np.allclose(self.alphas @ x, 1.0, atol=1e-8):
            raise ValidationError("chamber {x : alpha_i(x) > 0} is empty", axiom="chamber")
        self._chamber_point = x
        # group finiteness by closure enumeration (capped)
        self._group = self._enumerate_group()
        self._validated = True
        return self

    def _reflection(self, i):
        a = self.alphas[i]
        return np.eye(self.n) - 2.0 * np.outer(a, a) / self.gram[i, i]

    def _enumerate_group(self):
        gens = [self._reflection(i) for i in range(self.d)]

        def key(m):
            return np.round(m, _DEDUP_DECIMALS).tobytes()

        ident = WeylElement(word=(), matrix=np.eye(self.n), length=0)
        seen = {key(ident.matrix): ident}
        frontier = [ident]
        while frontier:
            nxt = []
            for el in frontier:
                for i, g in enumerate(gens):
                    m = el.matrix @ g
                    k = key(m)
                    if k not in seen:
                        w = WeylElement(word=el.word + (i,), matrix=m,
                                        length=el.length + 1)
                        seen[k] = w
                        nxt.append(w)
                        if len(seen) > _CLOSURE_CAP:
                            raise ValidationError(
                                f"group not verified finite within {_CLOSURE_CAP} elements",
                                axiom="finiteness")
            frontier = nxt
        return sorted(seen.values(), key=lambda e: (e.length, e.word))

    # -- queries -------------------------------------------------------------

    def chamber_point(self):
        self.validate()
        return self._chamber_point.copy()

    def weyl_group(self):
        """All Weyl elements (BFS order, so words are reduced)."""
        self.validate()
        return list(self._group)

    def longest_element(self) -> WeylElement:
        """s_0, the unique element mapping the chamber to its negative."""
        self.validate()
        p = self._chamber_point
        for el in self._group:
            if np.all(self.alphas @ (el.matrix @ p) < -1e-10):
                return el
        raise ValidationError("no longest element found (group enumeration incomplete)",
                              axiom="finiteness")

    def simple_coefficients(self, v):
        """Coefficients of v in the simple-root basis (v must lie in their span)."""
        c, *_ = np.linalg.lstsq(self.alphas.T, np.asarray(v, dtype=float), rcond=None)
        if not np.allclose(self.alphas.T @ c, v, atol=1e-8):
            raise ValidationError("vector outside the span of the simple roots",
                                  axiom="span")
        return c

    def positive_roots(self):
        """(Sigma_+, Sigma_+^o) as arrays of root vectors.

        Sigma_+ is the W-orbit of Pi inside the nonnegative span of Pi,
        augmented with 2 beta for orbits carrying m(2 alpha) > 0.
        Sigma_+^o drops roots beta with beta/2 also a root.  Returns
        (roots, indivisible_roots, orbit_index) where orbit_index maps each
        row of `roots` to the simple root whose orbit it belongs to.
        """
        self.validate()
        if self._roots is not None:
            return self._roots

        found = {}

        def key(v):
            return np.round(v, _DEDUP_DECIMALS).tobytes()

        for i in range(self.d):
            for el in self._group:
                b = el.matrix @ self.alphas[i]
                c = self.simple_coefficients(b)
                if np.all(c >= -1e-9):
                    found.setdefault(key(b), (b, i))
        roots = []
        orbit = []
        for b, i in found.values():
            roots.append(b)
            orbit.append(i)
        # doubles from the multiplicity table
        for b, i in list(found.values()):
            if self.m2[i] > 0:
                kb = key(2.0 * b)
                if kb not in found:
                    found[kb] = (2.0 * b, i)
                    roots.append(2.0 * b)
                    orbit.append(i)
        roots = np.array(roots)
        orbit = np.array(orbit)
        # deterministic order: by height (sum of simple coefficients), then lexicographic
        heights = np.array([self.simple_coefficients(b).sum() for b in roots])
        idx = np.lexsort((*[roots[:, j] for j in range(self.n - 1, -1, -1)], heights))
        roots, orbit = roots[idx], orbit[idx]
        keys = {key(b) for b in roots}
        indiv = np.array([key(0.5 * b) not in keys for b in roots])
        self._roots = (roots, roots[indiv], orbit)
        return self._roots

    def lattice_points(self, max_height: int):
        """All lam = sum 2 n_i alpha_i with sum n_i <= max_height.

        Ordered by height then lexicographically, so lam - 2 alpha_i always
        precedes lam.
        """
        if max_height < 0:
            raise ValidationError("max_height must be >= 0", axiom="lattice")
        pts = []
        for h in range(max_height + 1):
            for c in itertools.combinations_with_replacement(range(self.d), h):
                coeffs = [0] * self.d
                for i in c:
                    coeffs[i] += 1
                pts.append(tuple(coeffs))
        pts = sorted(set(pts), key=lambda t: (sum(t), t))
        out = []
        for coeffs in pts:
            vec = 2.0 * (np.array(coeffs, dtype=float) @ self.alphas)
            out.append(LatticePoint(coeffs=coeffs, vector=vec))
        return out

    # -- constructors ---------------------------------------------------------

    @staticmethod
    def from_json(document) -> "SimpleSystem":
        """Build a system from the documented JSON schema.

        Schema: {"n": int, "alphas": [[...], ...],
                 "multiplicities": {"m": [...], "m2": [...]}}  (m2 optional)
        """
        if isinstance(document, (str, bytes)):
            document = json.loads(document)
        try:
            n = int(document["n"])
            alphas = np.asarray(document["alphas"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad system document: {exc}", axiom="schema")
        if alphas.ndim != 2 or alphas.shape[1] != n:
            raise ValidationError("alphas must be a list of length-n vectors", axiom="schema")
        mult = document.get("multiplicities", {})
        m1 = mult.get("m", [1] * alphas.shape[0])
        m2 = mult.get("m2", [0] * alphas.shape[0])
        return SimpleSystem(alphas, m1=m1, m2=m2).validate()

    @staticmethod
    def preset(name: str) -> "SimpleSystem":
        """Built-in systems: "A1", "A2", "rank1-embedded-R2"."""
        s = math.sqrt(2.0)
        if name == "A1":
            sys_ = SimpleSystem([[1.0]], m1=[1], m2=[0], name="A1")
        elif name == "A2":
            sys_ = SimpleSystem([[1 / s, -1 / s, 0.0], [0.0, 1 / s, -1 / s]],
                                m1=[1, 1], m2=[0, 0], name="A2")
        elif name == "rank1-embedded-R2":
            sys_ = SimpleSystem([[-1 / s, 1 / s]], m1=[1], m2=[0],
                                name="rank1-embedded-R2")
        else:
            raise ValidationError(f"unknown preset {name!r}", axiom="preset")
        return sys_.validate()


def validate(system: SimpleSystem) -> SimpleSystem:
    """Validate a candidate system (functional form of SimpleSystem.validate)."""
    return system.validate()


def weyl_group(system: SimpleSystem):
    """(elements, longest element s_0) of the validated system."""
    return system.weyl_group(), system.longest_element()


def positive_roots(system: SimpleSystem):
    """(Sigma_+, Sigma_+^o) root-vector arrays."""
    roots, indiv, _ = system.positive_roots()
    return roots, indiv


def lattice_points(system: SimpleSystem, max_height: int):
    return system.lattice_points(max_height)
