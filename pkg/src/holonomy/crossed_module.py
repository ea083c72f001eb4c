"""The automorphism 2-group of a complex and its infinitesimal version.

Degree-0 chain automorphisms form the base group; the other level is the
group of degree -1 endomorphisms s with [d,s] + id invertible, taken
modulo [d, End^-2(V)] and multiplied by  s * t = s + t + s [d,t].
Elements carry representatives; comparisons route through the quotient
projection of :mod:`holonomy.complexes`.
"""

from __future__ import annotations

import math

import numpy as np

from .complexes import (
    CochainComplex,
    GradedMap,
    compose,
    graded_commutator_with_differential,
    quotient_distance,
)
from .errors import ComplexMismatchError, ConvergenceError, DegeneracyError

CHAIN_TOL = 1e-12
CONDITION_CAP = 1e12
EXP_MAX_DIAGONALS = 200
LIE_FD_STEP = 1e-5  # central-difference step for the Lie-theoretic oracles


class Gl0Element:
    """Invertible chain map of degree zero."""

    def __init__(self, map: GradedMap, check: bool = True):
        if map.degree != 0:
            raise ValueError("base-group elements have degree 0")
        self.map = map
        self.complex = map.complex
        if check:
            comm = graded_commutator_with_differential(map).norm()
            if comm > CHAIN_TOL * max(1.0, map.norm()):
                raise DegeneracyError(f"not a chain map (|[d,phi]| = {comm:.3e})")
            for k, block in map.blocks.items():
                if np.linalg.cond(block) > CONDITION_CAP:
                    raise DegeneracyError(f"block at degree {k} is numerically singular")

    @classmethod
    def identity(cls, complex: CochainComplex) -> "Gl0Element":
        return cls(complex.identity_map(), check=False)

    def inverse(self) -> "Gl0Element":
        blocks = {k: np.linalg.inv(b) for k, b in self.map.blocks.items()}
        return Gl0Element(GradedMap(self.complex, 0, blocks), check=False)

    def __matmul__(self, other: "Gl0Element") -> "Gl0Element":
        return Gl0Element(compose(self.map, other.map), check=False)

    def distance(self, other: "Gl0Element") -> float:
        return (self.map - other.map).norm()

    def __repr__(self):
        return f"Gl0Element({self.map!r})"


class Glm1Element:
    """Class of a degree -1 endomorphism s with [d,s] + id invertible."""

    def __init__(self, rep: GradedMap, check: bool = True):
        if rep.degree != -1:
            raise ValueError("representatives have degree -1")
        self.rep = rep
        self.complex = rep.complex
        if check:
            delta_total = _delta_total(rep)
            if np.linalg.cond(delta_total) > CONDITION_CAP:
                raise DegeneracyError("[d,s] + id is numerically singular")

    @classmethod
    def unit(cls, complex: CochainComplex) -> "Glm1Element":
        return cls(complex.zero_map(-1), check=False)

    def distance(self, other: "Glm1Element") -> float:
        """Quotient (Frobenius) distance between the two classes."""
        return quotient_distance(self.rep, other.rep)

    def __repr__(self):
        return f"Glm1Element({self.rep!r})"


def _delta_map(s: GradedMap) -> GradedMap:
    return graded_commutator_with_differential(s) + s.complex.identity_map()


def _delta_total(s: GradedMap) -> np.ndarray:
    return _delta_map(s).to_total()


def delta(s: Glm1Element) -> Gl0Element:
    """[d,s] + id; a chain automorphism, constant on quotient classes."""
    return Gl0Element(_delta_map(s.rep), check=False)


def star(s: Glm1Element, t: Glm1Element) -> Glm1Element:
    """Group law s * t = s + t + s [d,t] on representatives."""
    if s.complex is not t.complex:
        raise ComplexMismatchError("group law needs a common complex")
    rep = s.rep + t.rep + compose(s.rep, graded_commutator_with_differential(t.rep))
    return Glm1Element(rep, check=False)


def inverse(s: Glm1Element) -> Glm1Element:
    """-s delta(s)^{-1}; a two-sided inverse for the group law."""
    inv_delta = delta(s).inverse()
    return Glm1Element(-compose(s.rep, inv_delta.map), check=False)


def act(phi: Gl0Element, s: Glm1Element) -> Glm1Element:
    """Conjugation action phi s phi^{-1} of the base group."""
    if phi.complex is not s.complex:
        raise ComplexMismatchError("action needs a common complex")
    rep = compose(compose(phi.map, s.rep), phi.inverse().map)
    return Glm1Element(rep, check=False)


def act_infinitesimal(x: GradedMap, v: GradedMap) -> GradedMap:
    """Commutator action x v - v x of degree-0 on degree -1 maps."""
    return compose(x, v) - compose(v, x)


def exp_glm1(a: GradedMap, tol: float = 1e-15) -> Glm1Element:
    """Exponential: sum over i,j of (a d)^i a (a d)^j / (i+j+1)!.

    Terms are grouped by diagonals i+j and summation stops once a full
    diagonal falls below ``tol`` in Frobenius norm.
    """
    if a.degree != -1:
        raise ValueError("exponential is defined on degree -1 maps")
    complex = a.complex
    d_tot = complex.total_differential()
    a_tot = a.to_total()
    ad = a_tot @ d_tot
    powers = [np.eye(complex.total_dim)]
    total = np.zeros_like(a_tot)
    for diag in range(EXP_MAX_DIAGONALS):
        powers.append(powers[-1] @ ad)
        layer = np.zeros_like(a_tot)
        for i in range(diag + 1):
            layer += powers[i] @ a_tot @ powers[diag - i]
        layer /= math.factorial(diag + 1)
        total += layer
        if np.linalg.norm(layer) < tol:
            rep = GradedMap.from_total(complex, -1, total)
            return Glm1Element(rep)
    raise ConvergenceError(f"exponential did not converge within {EXP_MAX_DIAGONALS} diagonals")


def bracket_glm1(a: GradedMap, b: GradedMap) -> GradedMap:
    """Lie bracket a d b - b d a + a b d - b a d on degree -1 maps."""
    if a.complex is not b.complex:
        raise ComplexMismatchError("bracket needs a common complex")
    complex = a.complex
    d_tot = complex.total_differential()
    at, bt = a.to_total(), b.to_total()
    total = at @ d_tot @ bt - bt @ d_tot @ at + at @ bt @ d_tot - bt @ at @ d_tot
    return GradedMap.from_total(complex, -1, total)


def left_translate_diff(e: Glm1Element, x: GradedMap) -> GradedMap:
    """Differential at the unit of left multiplication: x + e [d,x]."""
    if e.complex is not x.complex:
        raise ComplexMismatchError("translation needs a common complex")
    return x + compose(e.rep, graded_commutator_with_differential(x))


def random_gl0(complex: CochainComplex, rng: np.random.Generator, scale: float = 0.4) -> Gl0Element:
    """Random invertible chain map: id plus a small chain-kernel combination."""
    from .complexes import chain_map_basis

    basis = chain_map_basis(complex, 0)
    combo = complex.identity_map()
    for b in basis:
        combo = combo + float(scale * rng.standard_normal()) * b
    return Gl0Element(combo)


def random_glm1(complex: CochainComplex, rng: np.random.Generator, scale: float = 0.4) -> Glm1Element:
    """Random degree -1 element with invertible [d,s] + id (resampled if not)."""
    for _ in range(50):
        rep = complex.random_map(-1, rng, scale)
        try:
            return Glm1Element(rep)
        except DegeneracyError:
            continue
    raise DegeneracyError("could not sample a valid degree -1 group element")
