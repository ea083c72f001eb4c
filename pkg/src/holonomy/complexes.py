"""Finite-type cochain complexes and their graded endomorphism algebra.

A complex is a finite family of real vector spaces ``V^k`` with a degree
``+1`` differential whose square vanishes.  Graded maps are stored as one
dense block per occupied source degree; a total-matrix view on the direct
sum of all degrees backs the numeric pipelines.
"""

from __future__ import annotations

import numpy as np

from .errors import ComplexMismatchError

DSQUARED_TOL = 1e-12
RANK_REL_TOL = 1e-10
ORTHONORMAL_TOL = 1e-12


class CochainComplex:
    """Graded vector space with differential; immutable after construction."""

    def __init__(self, dims: dict[int, int], differentials: dict[int, np.ndarray]):
        self.dims = {int(k): int(d) for k, d in dims.items() if int(d) > 0}
        if not self.dims or sum(self.dims.values()) <= 0:
            raise ValueError("complex must have positive total dimension")
        degrees = sorted(self.dims)
        self.degree_range = (degrees[0], degrees[-1])
        self.differentials: dict[int, np.ndarray] = {}
        for k, block in differentials.items():
            k = int(k)
            block = np.array(block, dtype=float)
            if self.dim(k) == 0 or self.dim(k + 1) == 0:
                if block.size and np.any(block != 0.0):
                    raise ValueError(f"differential block at degree {k} maps to/from a zero space")
                continue
            if block.shape != (self.dim(k + 1), self.dim(k)):
                raise ValueError(
                    f"differential block at degree {k} has shape {block.shape}, "
                    f"expected {(self.dim(k + 1), self.dim(k))}"
                )
            block.flags.writeable = False
            self.differentials[k] = block
        for k in self.differentials:
            nxt = self.differentials.get(k + 1)
            if nxt is not None:
                err = np.abs(nxt @ self.differentials[k]).max()
                if err > DSQUARED_TOL:
                    raise ValueError(f"differential does not square to zero at degree {k} (|d^2| = {err:.3e})")
        self._offsets: dict[int, int] = {}
        off = 0
        for k in degrees:
            self._offsets[k] = off
            off += self.dims[k]
        self.total_dim = off
        self._total_differential = None
        self._boundary_image = None

    def dim(self, k: int) -> int:
        return self.dims.get(k, 0)

    @property
    def degrees(self) -> list[int]:
        return sorted(self.dims)

    def offset(self, k: int) -> int:
        return self._offsets[k]

    def total_differential(self) -> np.ndarray:
        """The differential on the direct sum of all degrees, as one matrix."""
        if self._total_differential is None:
            total = np.zeros((self.total_dim, self.total_dim))
            for k, block in self.differentials.items():
                r, c = self.offset(k + 1), self.offset(k)
                total[r : r + block.shape[0], c : c + block.shape[1]] = block
            total.flags.writeable = False
            self._total_differential = total
        return self._total_differential

    def block_degrees(self, map_degree: int) -> list[int]:
        """Source degrees k with dims(k) > 0 and dims(k + map_degree) > 0."""
        return [k for k in self.degrees if self.dim(k + map_degree) > 0]

    def zero_map(self, degree: int) -> "GradedMap":
        blocks = {k: np.zeros((self.dim(k + degree), self.dim(k))) for k in self.block_degrees(degree)}
        return GradedMap(self, degree, blocks)

    def identity_map(self) -> "GradedMap":
        return GradedMap(self, 0, {k: np.eye(self.dim(k)) for k in self.degrees})

    def differential_map(self) -> "GradedMap":
        blocks = {k: self.differentials.get(k, np.zeros((self.dim(k + 1), self.dim(k)))) for k in self.block_degrees(1)}
        return GradedMap(self, 1, blocks)

    def basis_maps(self, degree: int) -> list["GradedMap"]:
        """Elementary-matrix basis of End^degree(V)."""
        basis = []
        for k in self.block_degrees(degree):
            rows, cols = self.dim(k + degree), self.dim(k)
            for i in range(rows):
                for j in range(cols):
                    zero = self.zero_map(degree)
                    blocks = {kk: b.copy() for kk, b in zero.blocks.items()}
                    blocks[k][i, j] = 1.0
                    basis.append(GradedMap(self, degree, blocks))
        return basis

    def random_map(self, degree: int, rng: np.random.Generator, scale: float = 1.0) -> "GradedMap":
        blocks = {
            k: scale * rng.standard_normal((self.dim(k + degree), self.dim(k)))
            for k in self.block_degrees(degree)
        }
        return GradedMap(self, degree, blocks)

    def boundary_image(self) -> "BoundaryImageSpace":
        if self._boundary_image is None:
            self._boundary_image = boundary_image_basis(self)
        return self._boundary_image

    def __repr__(self):
        dims = ", ".join(f"{k}:{d}" for k, d in sorted(self.dims.items()))
        return f"CochainComplex({{{dims}}})"


class GradedMap:
    """Degree-d linear map V -> V stored as one block per occupied degree."""

    def __init__(self, complex: CochainComplex, degree: int, blocks: dict[int, np.ndarray]):
        self.complex = complex
        self.degree = int(degree)
        self.blocks: dict[int, np.ndarray] = {}
        for k in complex.block_degrees(self.degree):
            block = np.array(blocks.get(k, np.zeros((complex.dim(k + self.degree), complex.dim(k)))), dtype=float)
            expected = (complex.dim(k + self.degree), complex.dim(k))
            if block.shape != expected:
                raise ValueError(f"block at degree {k} has shape {block.shape}, expected {expected}")
            if not np.all(np.isfinite(block)):
                raise ValueError(f"block at degree {k} has non-finite entries")
            block.flags.writeable = False
            self.blocks[k] = block

    @classmethod
    def from_total(cls, complex: CochainComplex, degree: int, total: np.ndarray) -> "GradedMap":
        blocks = {}
        for k in complex.block_degrees(degree):
            r, c = complex.offset(k + degree), complex.offset(k)
            blocks[k] = total[r : r + complex.dim(k + degree), c : c + complex.dim(k)]
        return cls(complex, degree, blocks)

    def to_total(self) -> np.ndarray:
        total = np.zeros((self.complex.total_dim, self.complex.total_dim))
        for k, block in self.blocks.items():
            r, c = self.complex.offset(k + self.degree), self.complex.offset(k)
            total[r : r + block.shape[0], c : c + block.shape[1]] = block
        return total

    def block(self, k: int) -> np.ndarray:
        if k in self.blocks:
            return self.blocks[k]
        return np.zeros((self.complex.dim(k + self.degree), self.complex.dim(k)))

    def __add__(self, other: "GradedMap") -> "GradedMap":
        _check_same(self, other)
        if self.degree != other.degree:
            raise ValueError("cannot add maps of different degree")
        return GradedMap(self.complex, self.degree, {k: self.block(k) + other.block(k) for k in self.blocks})

    def __sub__(self, other: "GradedMap") -> "GradedMap":
        return self + (-1.0) * other

    def __rmul__(self, scalar: float) -> "GradedMap":
        return GradedMap(self.complex, self.degree, {k: scalar * b for k, b in self.blocks.items()})

    def __neg__(self) -> "GradedMap":
        return (-1.0) * self

    def norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(b * b)) for b in self.blocks.values())))

    def inner(self, other: "GradedMap") -> float:
        _check_same(self, other)
        return float(sum(np.sum(self.block(k) * other.block(k)) for k in self.blocks))

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.norm() <= tol

    def __repr__(self):
        return f"GradedMap(degree={self.degree}, norm={self.norm():.3e})"


def _check_same(f: GradedMap, g: GradedMap) -> None:
    if f.complex is not g.complex:
        raise ComplexMismatchError("operands live over different complexes")


def compose(f: GradedMap, g: GradedMap) -> GradedMap:
    """The composite f(g(.)) of degree deg f + deg g."""
    _check_same(f, g)
    degree = f.degree + g.degree
    blocks = {}
    for k in f.complex.block_degrees(degree):
        mid = k + g.degree
        if f.complex.dim(mid) > 0:
            blocks[k] = f.block(mid) @ g.block(k)
    return GradedMap(f.complex, degree, blocks)


def graded_commutator_with_differential(f: GradedMap) -> GradedMap:
    """[d, f] = d f - (-1)^{deg f} f d, of degree deg f + 1."""
    d = f.complex.differential_map()
    sign = -1.0 if (f.degree % 2) else 1.0
    return compose(d, f) - sign * compose(f, d)


def is_chain_map(f: GradedMap, tol: float = 1e-12) -> bool:
    return graded_commutator_with_differential(f).norm() <= tol * max(1.0, f.norm())


class BoundaryImageSpace:
    """Orthonormal basis of {[d, h] : h of degree -2}, with witnesses."""

    def __init__(self, complex: CochainComplex, basis: list[GradedMap], witnesses: list[GradedMap]):
        self.complex = complex
        self.basis = basis
        self.witnesses = witnesses

    @property
    def rank(self) -> int:
        return len(self.basis)

    def project_out(self, f: GradedMap) -> GradedMap:
        """Component of f orthogonal to the subspace (Frobenius metric)."""
        if f.degree != -1:
            raise ValueError("quotient projection is defined on degree -1 maps")
        out = f
        for b in self.basis:
            out = out - f.inner(b) * b
        return out


def boundary_image_basis(complex: CochainComplex) -> BoundaryImageSpace:
    """Span of [d, End^-2(V)] inside End^-1(V), orthonormalized by SVD."""
    generators = complex.basis_maps(-2)
    images = [graded_commutator_with_differential(h) for h in generators]
    block_degrees = complex.block_degrees(-1)
    if not generators or not block_degrees:
        return BoundaryImageSpace(complex, [], [])

    def vec(g: GradedMap) -> np.ndarray:
        return np.concatenate([g.block(k).ravel() for k in block_degrees])

    mat = np.column_stack([vec(g) for g in images])
    u, sing, vt = np.linalg.svd(mat, full_matrices=False)
    if sing.size == 0 or sing[0] == 0.0:
        return BoundaryImageSpace(complex, [], [])
    rank = int(np.sum(sing > RANK_REL_TOL * sing[0]))
    basis, witnesses = [], []
    for j in range(rank):
        basis.append(_unvec(complex, u[:, j]))
        coeffs = vt[j, :] / sing[j]
        witness = complex.zero_map(-2)
        for c, h in zip(coeffs, generators):
            witness = witness + float(c) * h
        witnesses.append(witness)
    return BoundaryImageSpace(complex, basis, witnesses)


def _unvec(complex: CochainComplex, v: np.ndarray) -> GradedMap:
    blocks, pos = {}, 0
    for k in complex.block_degrees(-1):
        rows, cols = complex.dim(k - 1), complex.dim(k)
        blocks[k] = v[pos : pos + rows * cols].reshape(rows, cols)
        pos += rows * cols
    return GradedMap(complex, -1, blocks)


def chain_map_basis(complex: CochainComplex, degree: int = 0) -> list[GradedMap]:
    """Orthonormal basis of the kernel of [d, .] on End^degree(V)."""
    generators = complex.basis_maps(degree)
    if not generators:
        return []
    images = np.column_stack(
        [graded_commutator_with_differential(g).to_total().ravel() for g in generators]
    )
    _, sing, vt = np.linalg.svd(images)
    rank = int(np.sum(sing > RANK_REL_TOL * sing[0])) if sing.size and sing[0] > 0 else 0
    kernel_rows = vt[rank:]
    basis = []
    for row in kernel_rows:
        combo = complex.zero_map(degree)
        for coeff, gen in zip(row, generators):
            combo = combo + float(coeff) * gen
        basis.append(combo)
    return basis


def quotient_project(f: GradedMap) -> GradedMap:
    """Canonical representative of f in End^-1 / [d, End^-2]."""
    return f.complex.boundary_image().project_out(f)


def quotient_distance(f: GradedMap, g: GradedMap) -> float:
    """Frobenius distance between the classes of f and g."""
    return quotient_project(f - g).norm()


def quotient_equal(f: GradedMap, g: GradedMap, tol: float) -> bool:
    return quotient_distance(f, g) <= tol
