"""Form-valued fields on a chart: flatness residuals, 2-connections, and
the degree-2 truncation.

Fields are finite sums of terms  coeff(x) * dx_{j_1} ^ ... ^ dx_{j_p} * M
with an endomorphism factor M; they evaluate in batch to total matrices.
Exterior derivatives are taken by central finite differences of the
applied forms, with constant extension of the argument vectors.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import exprs
from .complexes import CochainComplex, GradedMap, graded_commutator_with_differential
from .errors import FlatnessError

CHART_VARS = ("x", "y", "z")
DEFAULT_FD_STEP = 1e-4
FLATNESS_TOL = 1e-6
DELTA_B_TOL = 1e-6


def _coeff_callable(coeff, chart_dim: int):
    if callable(coeff):
        return coeff
    if isinstance(coeff, str):
        tree = exprs.parse(coeff, allowed_vars=CHART_VARS[:chart_dim])

        def fn(points: np.ndarray) -> np.ndarray:
            bind = {CHART_VARS[i]: points[:, i] for i in range(chart_dim)}
            return np.broadcast_to(exprs.evaluate(tree, bind), (len(points),)).astype(float)

        return fn
    value = float(coeff)
    return lambda points: np.full(len(points), value)


class FormTerm:
    def __init__(self, coeff, axes, matrix: GradedMap, chart_dim: int):
        self.coeff = _coeff_callable(coeff, chart_dim)
        self.axes = tuple(int(a) for a in axes)
        if len(set(self.axes)) != len(self.axes):
            raise ValueError("form axes must be distinct")
        if any(a >= chart_dim for a in self.axes):
            raise ValueError("form axis outside the chart dimension")
        self.matrix = matrix
        self.total = matrix.to_total()


class FormField:
    """Sum of coefficient * coordinate-form * endomorphism terms."""

    def __init__(self, complex: CochainComplex, chart_dim: int, form_degree: int,
                 value_degree: int, terms):
        self.complex = complex
        self.chart_dim = chart_dim
        self.form_degree = form_degree
        self.value_degree = value_degree
        self.terms: list[FormTerm] = []
        for coeff, axes, matrix in terms:
            if len(axes) != form_degree:
                raise ValueError(f"term with {len(axes)} axes in a degree-{form_degree} form")
            if matrix.degree != value_degree:
                raise ValueError(
                    f"endomorphism factor has degree {matrix.degree}, expected {value_degree}"
                )
            self.terms.append(FormTerm(coeff, axes, matrix, chart_dim))

    @classmethod
    def zero(cls, complex, chart_dim, form_degree, value_degree):
        return cls(complex, chart_dim, form_degree, value_degree, [])

    def is_zero(self) -> bool:
        return not self.terms

    def apply_total(self, points: np.ndarray, vectors) -> np.ndarray:
        """Evaluate on the given tangent vectors; returns (N, D, D) totals."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n = len(points)
        dim = self.complex.total_dim
        vecs = [np.broadcast_to(np.asarray(v, dtype=float), (n, self.chart_dim)) for v in vectors]
        out = np.zeros((n, dim, dim))
        for term in self.terms:
            factor = _alternating_product(term.axes, vecs)
            if np.max(np.abs(factor)) == 0.0:
                continue
            out += (term.coeff(points) * factor)[:, None, None] * term.total
        return out

    def apply(self, point, vectors) -> GradedMap:
        total = self.apply_total(np.atleast_2d(point), vectors)[0]
        return GradedMap.from_total(self.complex, self.value_degree, total)


def _alternating_product(axes: tuple[int, ...], vecs: list[np.ndarray]) -> np.ndarray:
    """det of the p x p matrix [v_a[axes_b]], vectorized over the batch."""
    p = len(axes)
    if p == 1:
        return vecs[0][:, axes[0]]
    if p == 2:
        i, j = axes
        return vecs[0][:, i] * vecs[1][:, j] - vecs[0][:, j] * vecs[1][:, i]
    if p == 3:
        mats = np.stack([v[:, list(axes)] for v in vecs], axis=1)  # (N, 3, 3)
        return np.linalg.det(mats)
    raise ValueError(f"unsupported form degree {p}")


class SuperconnectionField:
    """Form components alpha^1, alpha^2 (and optionally alpha^3) of total
    degree one, valued in endomorphisms of the ambient complex."""

    def __init__(self, complex: CochainComplex, chart_dim: int,
                 alpha1: FormField | None = None,
                 alpha2: FormField | None = None,
                 alpha3: FormField | None = None):
        self.complex = complex
        self.chart_dim = chart_dim
        self.alpha1 = alpha1 if alpha1 is not None else FormField.zero(complex, chart_dim, 1, 0)
        self.alpha2 = alpha2 if alpha2 is not None else FormField.zero(complex, chart_dim, 2, -1)
        self.alpha3 = alpha3 if alpha3 is not None else FormField.zero(complex, chart_dim, 3, -2)
        for field, (p, d) in ((self.alpha1, (1, 0)), (self.alpha2, (2, -1)), (self.alpha3, (3, -2))):
            if field.form_degree != p or field.value_degree != d:
                raise ValueError("component with wrong form degree or value degree")

    def component(self, n: int) -> FormField:
        return {1: self.alpha1, 2: self.alpha2, 3: self.alpha3}[n]


def _directional_derivative(apply_fn, x: np.ndarray, direction: np.ndarray, h: float) -> np.ndarray:
    return (apply_fn(x + h * direction) - apply_fn(x - h * direction)) / (2.0 * h)


def _exterior_derivative_total(apply_total, total_dim: int, x: np.ndarray, vectors, h: float) -> np.ndarray:
    """(d omega)(v_0, ..., v_p) with constant vector fields, by central FD."""
    total = np.zeros((total_dim, total_dim))
    for i, v in enumerate(vectors):
        rest = [vectors[j] for j in range(len(vectors)) if j != i]

        def applied(pt, rest=rest):
            return apply_total(np.atleast_2d(pt), rest)[0]

        term = _directional_derivative(applied, x, np.asarray(v, dtype=float), h)
        total += term if i % 2 == 0 else -term
    return total


def _commutator_with_differential_total(complex: CochainComplex, total: np.ndarray, degree: int) -> np.ndarray:
    d = complex.total_differential()
    sign = -1.0 if degree % 2 else 1.0
    return d @ total - sign * total @ d


def flatness_residual(alpha: SuperconnectionField, x, vectors, n: int,
                      h: float = DEFAULT_FD_STEP) -> GradedMap:
    """Left side of the degree-n flatness equation at (x, vectors).

    n=1: [d, a1(v)];  n=2: [d, a2(v,w)] + (d a1)(v,w) + (a1 ^ a1)(v,w);
    n=3: [d, a3(u,v,w)] + (d a2)(u,v,w) + (a1 ^ a2 + a2 ^ a1)(u,v,w).
    """
    if n not in (1, 2, 3):
        raise ValueError("flatness residual is implemented for n in {1, 2, 3}")
    x = np.asarray(x, dtype=float)
    vectors = [np.asarray(v, dtype=float) for v in vectors]
    if len(vectors) != n:
        raise ValueError(f"need {n} tangent vectors, got {len(vectors)}")
    complex = alpha.complex
    pt = np.atleast_2d(x)

    def a1(vs):
        return alpha.alpha1.apply_total(pt, vs)[0]

    def a2(vs):
        return alpha.alpha2.apply_total(pt, vs)[0]

    if n == 1:
        total = _commutator_with_differential_total(complex, a1([vectors[0]]), 0)
        return GradedMap.from_total(complex, 1, total)
    if n == 2:
        v, w = vectors
        total = _commutator_with_differential_total(complex, a2([v, w]), -1)
        total += _exterior_derivative_total(alpha.alpha1.apply_total, complex.total_dim, x, [v, w], h)
        total += a1([v]) @ a1([w]) - a1([w]) @ a1([v])
        return GradedMap.from_total(complex, 0, total)
    u, v, w = vectors
    total = _commutator_with_differential_total(complex, alpha.alpha3.apply_total(pt, [u, v, w])[0], -2)
    total += _exterior_derivative_total(alpha.alpha2.apply_total, complex.total_dim, x, [u, v, w], h)
    # Shuffle expansions of a1 ^ a2 and a2 ^ a1 on (u, v, w).
    total += a1([u]) @ a2([v, w]) - a1([v]) @ a2([u, w]) + a1([w]) @ a2([u, v])
    total += a2([u, v]) @ a1([w]) - a2([u, w]) @ a1([v]) + a2([v, w]) @ a1([u])
    return GradedMap.from_total(complex, -1, total)


def sample_grid(chart_dim: int, points_per_axis: int = 3) -> np.ndarray:
    axes = [np.linspace(0.15, 0.85, points_per_axis)] * chart_dim
    return np.array(list(itertools.product(*axes)))


def max_flatness_residual(alpha: SuperconnectionField, h: float = DEFAULT_FD_STEP,
                          points: np.ndarray | None = None):
    """Largest flatness residual over a sample grid and coordinate vectors."""
    if points is None:
        points = sample_grid(alpha.chart_dim)
    basis = np.eye(alpha.chart_dim)
    worst = (0.0, None, 0)
    for x in points:
        for n in (1, 2, 3):
            for combo in itertools.combinations(range(alpha.chart_dim), n):
                vectors = [basis[i] for i in combo]
                res = flatness_residual(alpha, x, vectors, n, h).norm()
                if res > worst[0]:
                    worst = (res, x, n)
    return worst


class ProjectedTwoForm:
    """-pi applied to a value 2-form: the B-component of the truncation."""

    def __init__(self, field: FormField, sign: float = -1.0):
        self.field = field
        self.complex = field.complex
        self.chart_dim = field.chart_dim
        space = field.complex.boundary_image()
        self._basis = np.stack([b.to_total() for b in space.basis]) if space.basis else None
        self.sign = sign

    def project_batch(self, totals: np.ndarray) -> np.ndarray:
        if self._basis is None:
            return totals
        coeffs = np.einsum("nij,bij->nb", totals, self._basis)
        return totals - np.einsum("nb,bij->nij", coeffs, self._basis)

    def apply_total(self, points: np.ndarray, vectors) -> np.ndarray:
        raw = self.field.apply_total(points, vectors)
        return self.sign * self.project_batch(raw)

    def apply(self, point, vectors) -> GradedMap:
        total = self.apply_total(np.atleast_2d(point), vectors)[0]
        return GradedMap.from_total(self.complex, -1, total)


class TwoConnection:
    """Pair (A, B): a 1-form valued in chain maps and a 2-form valued in
    canonical quotient representatives of degree -1 maps."""

    def __init__(self, complex: CochainComplex, chart_dim: int, a_field, b_field,
                 check: bool = True, h: float = DEFAULT_FD_STEP):
        self.complex = complex
        self.chart_dim = chart_dim
        self.a_field = a_field
        self.b_field = b_field
        if check:
            res, x, _ = self.max_delta_b_residual(h)
            if res > DELTA_B_TOL:
                raise FlatnessError(
                    f"delta B != F_A (residual {res:.3e} at {x})", point=x, residual=res
                )

    def a_total(self, points: np.ndarray, vectors) -> np.ndarray:
        return self.a_field.apply_total(points, vectors)

    def b_total(self, points: np.ndarray, vectors) -> np.ndarray:
        return self.b_field.apply_total(points, vectors)

    def fa_total(self, x: np.ndarray, v: np.ndarray, w: np.ndarray, h: float = DEFAULT_FD_STEP) -> np.ndarray:
        """F_A(v, w) = (dA)(v, w) + [A(v), A(w)] at x."""
        x = np.asarray(x, dtype=float)
        da = _exterior_derivative_total(self.a_field.apply_total, self.complex.total_dim, x, [v, w], h)
        pt = np.atleast_2d(x)
        av = self.a_field.apply_total(pt, [v])[0]
        aw = self.a_field.apply_total(pt, [w])[0]
        return da + av @ aw - aw @ av

    def max_delta_b_residual(self, h: float = DEFAULT_FD_STEP, points: np.ndarray | None = None):
        if points is None:
            points = sample_grid(self.chart_dim)
        d = self.complex.total_differential()
        basis = np.eye(self.chart_dim)
        worst = (0.0, None, None)
        for x in points:
            for i, j in itertools.combinations(range(self.chart_dim), 2):
                v, w = basis[i], basis[j]
                b = self.b_field.apply_total(np.atleast_2d(x), [v, w])[0]
                res = np.linalg.norm(d @ b + b @ d - self.fa_total(x, v, w, h))
                if res > worst[0]:
                    worst = (res, x, (i, j))
        return worst


def truncate_connection(alpha: SuperconnectionField, h: float = DEFAULT_FD_STEP,
                        flatness_tol: float = FLATNESS_TOL) -> TwoConnection:
    """(A, B) = (alpha^1, -pi(alpha^2)); requires alpha flat to tolerance."""
    res, x, n = max_flatness_residual(alpha, h)
    if res > flatness_tol:
        raise FlatnessError(
            f"field is not flat: degree-{n} residual {res:.3e} at sample {x}",
            point=x, residual=res,
        )
    return TwoConnection(alpha.complex, alpha.chart_dim, alpha.alpha1, ProjectedTwoForm(alpha.alpha2), h=h)


def curvature_two_connection(conn: TwoConnection, x, v, w, u, h: float = DEFAULT_FD_STEP) -> dict:
    """F_A(v,w) - delta B(v,w), and the 3-form curvature on (v, w, u)."""
    x = np.asarray(x, dtype=float)
    v, w, u = (np.asarray(a, dtype=float) for a in (v, w, u))
    complex = conn.complex
    d = complex.total_differential()
    pt = np.atleast_2d(x)

    def b(vs):
        return conn.b_field.apply_total(pt, vs)[0]

    def a(vec):
        return conn.a_field.apply_total(pt, [vec])[0]

    b_vw = b([v, w])
    fa_minus = conn.fa_total(x, v, w, h) - (d @ b_vw + b_vw @ d)

    db = _exterior_derivative_total(conn.b_field.apply_total, complex.total_dim, x, [v, w, u], h)

    def rhd(x_tot, s_tot):
        return x_tot @ s_tot - s_tot @ x_tot

    wedge = rhd(a(v), b([w, u])) - rhd(a(w), b([v, u])) + rhd(a(u), b([v, w]))
    return {
        "fa_minus_delta_b": GradedMap.from_total(complex, 0, fa_minus),
        "curv3": GradedMap.from_total(complex, -1, db + wedge),
    }
