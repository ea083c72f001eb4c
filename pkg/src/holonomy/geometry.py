"""Paths, squares and simplices in a chart, plus the reparametrization maps
shared by both holonomy constructions.

Every evaluator is batch-first: it takes an (N, k) array of parameter
points and returns an (N, chart_dim) array of chart points.  Objects may
carry exact partial-derivative evaluators; when absent, clamped central
finite differences are used.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import exprs
from .errors import EdgeMismatchError

SIDE_SAMPLES = 33
SIDE_TOL = 1e-12
EDGE_MATCH_TOL = 1e-9
FD_STEP = 1e-6
THIN_RANK_REL_TOL = 1e-8

Array = np.ndarray


def _as_points(pts, k: int) -> Array:
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, k) if k > 1 else pts.reshape(-1, 1)
    return pts


def _fd_partial(eval_fn: Callable[[Array], Array], pts: Array, axis: int, h: float = FD_STEP) -> Array:
    """Central difference along one parameter axis, stencil clamped to [0,1]."""
    centers = np.clip(pts[:, axis], h, 1.0 - h)
    hi = pts.copy()
    lo = pts.copy()
    hi[:, axis] = centers + h
    lo[:, axis] = centers - h
    return (eval_fn(hi) - eval_fn(lo)) / (2.0 * h)


class Path:
    """Piecewise-smooth map [0,1] -> chart."""

    def __init__(self, eval_fn, chart_dim: int, breakpoints=(), velocity_fn=None, check: bool = True):
        self.chart_dim = chart_dim
        self._eval = eval_fn
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints if 0.0 < float(b) < 1.0))
        self._velocity = velocity_fn
        if check:
            ts = np.linspace(0.0, 1.0, SIDE_SAMPLES)
            if not np.all(np.isfinite(self.eval(ts))):
                raise ValueError("path evaluates to non-finite values")
            if not np.all(np.isfinite(self.velocity(np.linspace(0.01, 0.99, SIDE_SAMPLES)))):
                raise ValueError("path velocity is not finite")

    def eval(self, ts) -> Array:
        ts = np.asarray(ts, dtype=float).reshape(-1)
        return self._eval(ts)

    def velocity(self, ts) -> Array:
        ts = np.asarray(ts, dtype=float).reshape(-1)
        if self._velocity is not None:
            return self._velocity(ts)
        pts = ts.reshape(-1, 1)
        return _fd_partial(lambda p: self._eval(p[:, 0]), pts, 0)

    def point(self, t: float) -> Array:
        return self.eval(np.array([t]))[0]


class TwoPath:
    """Piecewise-smooth map [0,1]^2 -> chart, constant on the vertical sides."""

    def __init__(
        self,
        eval_fn,
        chart_dim: int,
        t_breakpoints=(),
        s_breakpoints=(),
        partials_fn=None,
        check: bool = True,
    ):
        self.chart_dim = chart_dim
        self._eval = eval_fn
        self.t_breakpoints = tuple(sorted(float(b) for b in t_breakpoints if 0.0 < float(b) < 1.0))
        self.s_breakpoints = tuple(sorted(float(b) for b in s_breakpoints if 0.0 < float(b) < 1.0))
        self._partials = partials_fn
        if check:
            ss = np.linspace(0.0, 1.0, SIDE_SAMPLES)
            for t_side in (0.0, 1.0):
                pts = np.column_stack([np.full_like(ss, t_side), ss])
                vals = self.eval(pts)
                dev = np.abs(vals - vals[0]).max()
                if dev > SIDE_TOL:
                    raise ValueError(
                        f"not a 2-path: side t={t_side} varies by {dev:.3e} (must be constant)"
                    )

    def eval(self, pts) -> Array:
        return self._eval(_as_points(pts, 2))

    def partials(self, pts) -> tuple[Array, Array]:
        """(d/dt, d/ds) of the map at each point; exact when available."""
        pts = _as_points(pts, 2)
        if self._partials is not None:
            return self._partials(pts)
        return _fd_partial(self._eval, pts, 0), _fd_partial(self._eval, pts, 1)

    def point(self, t: float, s: float) -> Array:
        return self.eval(np.array([[t, s]]))[0]


class SimplexMap:
    """Smooth map from the descending k-simplex {1 >= t_1 >= ... >= t_k >= 0}."""

    def __init__(self, k: int, eval_fn, chart_dim: int, partials_fn=None, breakpoints_fn=None):
        if k < 0:
            raise ValueError("simplex dimension must be non-negative")
        self.k = k
        self.chart_dim = chart_dim
        self._eval = eval_fn
        self._partials = partials_fn
        # Optional hint: t-breakpoints of the pulled-back integrands, per axis.
        self._breakpoints_fn = breakpoints_fn

    def eval(self, pts) -> Array:
        return self._eval(_as_points(pts, max(self.k, 1)))

    def partial(self, pts, axis: int) -> Array:
        pts = _as_points(pts, max(self.k, 1))
        if self._partials is not None:
            return self._partials(pts, axis)
        return _fd_partial(self._eval, pts, axis)


# ---------------------------------------------------------------------------
# simplicial / cosimplicial structure maps


def coface_point(i: int, pts: Array) -> Array:
    """The i-th coface map into the next simplex dimension, on points."""
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(len(pts), -1) if pts.size else pts.reshape(1, 0)
    n, k = pts.shape
    if not 0 <= i <= k + 1:
        raise IndexError(f"coface index {i} out of range for dimension {k}")
    if i == 0:
        return np.column_stack([np.ones(n), pts])
    if i == k + 1:
        return np.column_stack([pts, np.zeros(n)])
    return np.column_stack([pts[:, :i], pts[:, i - 1 : i], pts[:, i:]])


def codegeneracy_point(i: int, pts: Array) -> Array:
    """Drops coordinate i (0-based); the i-th codegeneracy on points."""
    pts = np.asarray(pts, dtype=float)
    n, k = pts.shape
    if not 0 <= i <= k - 1:
        raise IndexError(f"codegeneracy index {i} out of range for dimension {k}")
    return np.delete(pts, i, axis=1)


def face(sigma: SimplexMap, i: int) -> SimplexMap:
    """d_i sigma, precomposing with the i-th coface."""
    if not 0 <= i <= sigma.k:
        raise IndexError(f"face index {i} out of range for a {sigma.k}-simplex")
    k_out = sigma.k - 1

    def eval_fn(pts: Array) -> Array:
        return sigma.eval(coface_point(i, pts[:, :k_out]))

    def partials_fn(pts: Array, axis: int) -> Array:
        lifted = coface_point(i, pts[:, :k_out])
        # Axis `axis` downstairs feeds one coordinate upstairs, except the
        # duplicated coordinate of an inner coface which feeds two.
        if i == 0:
            targets = [axis + 1]
        elif i == sigma.k:
            targets = [axis]
        elif axis < i - 1:
            targets = [axis]
        elif axis == i - 1:
            targets = [i - 1, i]
        else:
            targets = [axis + 1]
        out = sigma.partial(lifted, targets[0])
        for tgt in targets[1:]:
            out = out + sigma.partial(lifted, tgt)
        return out

    return SimplexMap(k_out, eval_fn, sigma.chart_dim, partials_fn=partials_fn)


def degeneracy(sigma: SimplexMap, i: int) -> SimplexMap:
    """s_i sigma, precomposing with the i-th codegeneracy."""
    if not 0 <= i <= sigma.k:
        raise IndexError(f"degeneracy index {i} out of range for a {sigma.k}-simplex")
    k_out = sigma.k + 1

    def eval_fn(pts: Array) -> Array:
        return sigma.eval(codegeneracy_point(i, pts[:, :k_out]))

    def partials_fn(pts: Array, axis: int) -> Array:
        dropped = codegeneracy_point(i, pts[:, :k_out])
        if axis == i:
            return np.zeros((len(pts), sigma.chart_dim))
        upstream = axis if axis < i else axis - 1
        return sigma.partial(dropped, upstream)

    return SimplexMap(k_out, eval_fn, sigma.chart_dim, partials_fn=partials_fn)


# ---------------------------------------------------------------------------
# folding the square onto the 2-simplex


def q_fold(pts: Array) -> Array:
    """(t, s) -> (max(t, s), s); collapses the square onto the 2-simplex."""
    pts = _as_points(pts, 2)
    return np.column_stack([np.maximum(pts[:, 0], pts[:, 1]), pts[:, 1]])


def lambda_fold(pts: Array) -> Array:
    """Piecewise-linear sweep through (s,1) -> (s,0) -> (0,0), corner at t=1/2."""
    pts = _as_points(pts, 2)
    t, s = pts[:, 0], pts[:, 1]
    first = np.column_stack([s, 1.0 - 2.0 * t])
    second = np.column_stack([(2.0 - 2.0 * t) * s, np.zeros_like(t)])
    return np.where((t <= 0.5)[:, None], first, second)


def theta(pts: Array) -> Array:
    """The fold q(lambda(t,s)); always lands in the 2-simplex."""
    return q_fold(lambda_fold(pts))


def theta_partials(pts: Array) -> tuple[Array, Array]:
    """Exact (d/dt, d/ds) of the fold, away from its measure-zero kinks."""
    pts = _as_points(pts, 2)
    t, s = pts[:, 0], pts[:, 1]
    n = len(pts)
    lam = lambda_fold(pts)
    dl_dt = np.where((t <= 0.5)[:, None], np.column_stack([np.zeros(n), -2.0 * np.ones(n)]),
                     np.column_stack([-2.0 * s, np.zeros(n)]))
    dl_ds = np.where((t <= 0.5)[:, None], np.column_stack([np.ones(n), np.zeros(n)]),
                     np.column_stack([2.0 - 2.0 * t, np.zeros(n)]))
    # Dq is the identity where x > y and (x, y) -> (y, y) where x < y.
    folded = (lam[:, 0] < lam[:, 1])[:, None]
    dq_dt = np.where(folded, np.column_stack([dl_dt[:, 1], dl_dt[:, 1]]), dl_dt)
    dq_ds = np.where(folded, np.column_stack([dl_ds[:, 1], dl_ds[:, 1]]), dl_ds)
    return dq_dt, dq_ds


def embed_b(pts: Array) -> Array:
    """Identity inclusion of the 2-simplex into the square."""
    return _as_points(pts, 2).copy()


def embed_a(pts: Array) -> Array:
    """Coordinate swap (t, s) -> (s, t) on the 2-simplex."""
    pts = _as_points(pts, 2)
    return pts[:, ::-1].copy()


def mu_k(ts: Array, s: Array) -> Array:
    """(t_1..t_k, s) -> ((1 - t_1, s), ..., (1 - t_k, s)); shape (N, k, 2)."""
    ts = np.asarray(ts, dtype=float)
    if ts.ndim == 1:
        ts = ts.reshape(1, -1)
    s = np.broadcast_to(np.asarray(s, dtype=float).reshape(-1, 1), (ts.shape[0], 1))
    out = np.empty((ts.shape[0], ts.shape[1], 2))
    out[:, :, 0] = 1.0 - ts
    out[:, :, 1] = s
    return out


# ---------------------------------------------------------------------------
# slices, compositions, reversal


@dataclass
class TwoPathSlices:
    edge0: Path
    edge1: Path
    diagonal: Path
    slice: Callable[[float], Path]


def two_path_slices(gamma: TwoPath) -> TwoPathSlices:
    """Bottom edge, top edge, diagonal, and the horizontal slice family."""

    def make_slice(s0: float) -> Path:
        def eval_fn(ts: Array) -> Array:
            return gamma.eval(np.column_stack([ts, np.full_like(ts, s0)]))

        def vel_fn(ts: Array) -> Array:
            dt, _ = gamma.partials(np.column_stack([ts, np.full_like(ts, s0)]))
            return dt

        return Path(eval_fn, gamma.chart_dim, breakpoints=gamma.t_breakpoints, velocity_fn=vel_fn, check=False)

    def diag_eval(ts: Array) -> Array:
        return gamma.eval(np.column_stack([ts, ts]))

    def diag_vel(ts: Array) -> Array:
        dt, ds = gamma.partials(np.column_stack([ts, ts]))
        return dt + ds

    diag_breaks = tuple(sorted(set(gamma.t_breakpoints) | set(gamma.s_breakpoints)))
    diagonal = Path(diag_eval, gamma.chart_dim, breakpoints=diag_breaks, velocity_fn=diag_vel, check=False)
    return TwoPathSlices(make_slice(0.0), make_slice(1.0), diagonal, make_slice)


def reverse_path(gamma: Path) -> Path:
    def eval_fn(ts: Array) -> Array:
        return gamma.eval(1.0 - ts)

    def vel_fn(ts: Array) -> Array:
        return -gamma.velocity(1.0 - ts)

    breaks = tuple(sorted(1.0 - b for b in gamma.breakpoints))
    return Path(eval_fn, gamma.chart_dim, breakpoints=breaks, velocity_fn=vel_fn, check=False)


def concat_paths(gamma: Path, sigma: Path) -> Path:
    """gamma on [0, 1/2], then sigma; endpoints must match."""
    dev = float(np.abs(gamma.point(1.0) - sigma.point(0.0)).max())
    if dev > EDGE_MATCH_TOL:
        raise EdgeMismatchError("paths are not composable", dev)

    def eval_fn(ts: Array) -> Array:
        first = gamma.eval(np.minimum(2.0 * ts, 1.0))
        second = sigma.eval(np.maximum(2.0 * ts - 1.0, 0.0))
        return np.where((ts <= 0.5)[:, None], first, second)

    def vel_fn(ts: Array) -> Array:
        first = 2.0 * gamma.velocity(np.minimum(2.0 * ts, 1.0))
        second = 2.0 * sigma.velocity(np.maximum(2.0 * ts - 1.0, 0.0))
        return np.where((ts <= 0.5)[:, None], first, second)

    breaks = {0.5}
    breaks.update(0.5 * b for b in gamma.breakpoints)
    breaks.update(0.5 + 0.5 * b for b in sigma.breakpoints)
    return Path(eval_fn, gamma.chart_dim, breakpoints=sorted(breaks), velocity_fn=vel_fn, check=False)


def compose_two_paths_vertical(gamma: TwoPath, gamma_prime: TwoPath) -> TwoPath:
    """gamma_prime on s in [0, 1/2], gamma above; needs gamma_prime top = gamma bottom."""
    ts = np.linspace(0.0, 1.0, SIDE_SAMPLES)
    top = gamma_prime.eval(np.column_stack([ts, np.ones_like(ts)]))
    bottom = gamma.eval(np.column_stack([ts, np.zeros_like(ts)]))
    dev = float(np.abs(top - bottom).max())
    if dev > EDGE_MATCH_TOL:
        raise EdgeMismatchError("vertical edges do not match", dev)

    def eval_fn(pts: Array) -> Array:
        t, s = pts[:, 0], pts[:, 1]
        low = gamma_prime.eval(np.column_stack([t, np.minimum(2.0 * s, 1.0)]))
        high = gamma.eval(np.column_stack([t, np.maximum(2.0 * s - 1.0, 0.0)]))
        return np.where((s <= 0.5)[:, None], low, high)

    def partials_fn(pts: Array) -> tuple[Array, Array]:
        t, s = pts[:, 0], pts[:, 1]
        mask = (s <= 0.5)[:, None]
        low_dt, low_ds = gamma_prime.partials(np.column_stack([t, np.minimum(2.0 * s, 1.0)]))
        high_dt, high_ds = gamma.partials(np.column_stack([t, np.maximum(2.0 * s - 1.0, 0.0)]))
        return np.where(mask, low_dt, high_dt), np.where(mask, 2.0 * low_ds, 2.0 * high_ds)

    s_breaks = {0.5}
    s_breaks.update(0.5 * b for b in gamma_prime.s_breakpoints)
    s_breaks.update(0.5 + 0.5 * b for b in gamma.s_breakpoints)
    t_breaks = sorted(set(gamma.t_breakpoints) | set(gamma_prime.t_breakpoints))
    return TwoPath(
        eval_fn,
        gamma.chart_dim,
        t_breakpoints=t_breaks,
        s_breakpoints=sorted(s_breaks),
        partials_fn=partials_fn,
    )


def compose_two_paths_horizontal(gamma: TwoPath, gamma_prime: TwoPath) -> TwoPath:
    """gamma_prime on t in [0, 1/2], gamma to its right; matching vertical sides."""
    ss = np.linspace(0.0, 1.0, SIDE_SAMPLES)
    right = gamma_prime.eval(np.column_stack([np.ones_like(ss), ss]))
    left = gamma.eval(np.column_stack([np.zeros_like(ss), ss]))
    dev = float(np.abs(right - left).max())
    if dev > EDGE_MATCH_TOL:
        raise EdgeMismatchError("horizontal sides do not match", dev)

    def eval_fn(pts: Array) -> Array:
        t, s = pts[:, 0], pts[:, 1]
        first = gamma_prime.eval(np.column_stack([np.minimum(2.0 * t, 1.0), s]))
        second = gamma.eval(np.column_stack([np.maximum(2.0 * t - 1.0, 0.0), s]))
        return np.where((t <= 0.5)[:, None], first, second)

    def partials_fn(pts: Array) -> tuple[Array, Array]:
        t, s = pts[:, 0], pts[:, 1]
        mask = (t <= 0.5)[:, None]
        l_dt, l_ds = gamma_prime.partials(np.column_stack([np.minimum(2.0 * t, 1.0), s]))
        r_dt, r_ds = gamma.partials(np.column_stack([np.maximum(2.0 * t - 1.0, 0.0), s]))
        return np.where(mask, 2.0 * l_dt, 2.0 * r_dt), np.where(mask, l_ds, r_ds)

    t_breaks = {0.5}
    t_breaks.update(0.5 * b for b in gamma_prime.t_breakpoints)
    t_breaks.update(0.5 + 0.5 * b for b in gamma.t_breakpoints)
    s_breaks = sorted(set(gamma.s_breakpoints) | set(gamma_prime.s_breakpoints))
    return TwoPath(
        eval_fn,
        gamma.chart_dim,
        t_breakpoints=sorted(t_breaks),
        s_breakpoints=s_breaks,
        partials_fn=partials_fn,
    )


# ---------------------------------------------------------------------------
# thinness


def simplex_sample_points(k: int, samples: int, seed: int = 20240615) -> Array:
    """Deterministic interior sample points of the descending k-simplex."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.05, 0.95, size=(samples, k))
    return np.sort(u, axis=1)[:, ::-1]


def is_thin(sigma: SimplexMap, samples: int = 25) -> bool:
    """True when the sampled finite-difference Jacobian has rank < k everywhere."""
    if sigma.k < 1:
        raise ValueError("thinness needs dimension >= 1")
    pts = simplex_sample_points(sigma.k, samples)
    jac = np.stack([_fd_partial(sigma._eval, pts, axis) for axis in range(sigma.k)], axis=-1)
    sing = np.linalg.svd(jac, compute_uv=False)
    top = sing[:, 0]
    full_rank = sing[:, -1] > THIN_RANK_REL_TOL * np.maximum(top, 1e-30)
    return not bool(np.any(full_rank & (top > 0)))


# ---------------------------------------------------------------------------
# builders


def path_from_exprs(sources: list[str], breakpoints=()) -> Path:
    trees = [exprs.parse(src, allowed_vars=("t",)) for src in sources]
    derivs = [exprs.differentiate(tree, "t") for tree in trees]

    def eval_fn(ts: Array) -> Array:
        return np.column_stack([np.broadcast_to(exprs.evaluate(tr, {"t": ts}), ts.shape) for tr in trees])

    def vel_fn(ts: Array) -> Array:
        return np.column_stack([np.broadcast_to(exprs.evaluate(tr, {"t": ts}), ts.shape) for tr in derivs])

    return Path(eval_fn, len(sources), breakpoints=breakpoints, velocity_fn=vel_fn)


def two_path_from_exprs(sources: list[str]) -> TwoPath:
    trees = [exprs.parse(src, allowed_vars=("t", "s")) for src in sources]
    d_t = [exprs.differentiate(tree, "t") for tree in trees]
    d_s = [exprs.differentiate(tree, "s") for tree in trees]

    def stack(trs, pts):
        bind = {"t": pts[:, 0], "s": pts[:, 1]}
        return np.column_stack([np.broadcast_to(exprs.evaluate(tr, bind), pts[:, 0].shape) for tr in trs])

    def partials_fn(pts: Array):
        return stack(d_t, pts), stack(d_s, pts)

    return TwoPath(lambda pts: stack(trees, pts), len(sources), partials_fn=partials_fn)


def constant_path(point) -> Path:
    point = np.asarray(point, dtype=float)

    def eval_fn(ts: Array) -> Array:
        return np.broadcast_to(point, (len(ts), point.size)).copy()

    return Path(eval_fn, point.size, velocity_fn=lambda ts: np.zeros((len(ts), point.size)), check=False)


def constant_two_path(point) -> TwoPath:
    point = np.asarray(point, dtype=float)

    def eval_fn(pts: Array) -> Array:
        return np.broadcast_to(point, (len(pts), point.size)).copy()

    def partials_fn(pts: Array):
        zero = np.zeros((len(pts), point.size))
        return zero, zero.copy()

    return TwoPath(eval_fn, point.size, partials_fn=partials_fn)


def affine_simplex(k: int, vertices, chart_dim: int | None = None) -> SimplexMap:
    """Affine map of the descending k-simplex with the given vertex images."""
    verts = [np.asarray(v, dtype=float) for v in vertices]
    if len(verts) != k + 1:
        raise ValueError(f"a {k}-simplex needs {k + 1} vertices")
    dim = chart_dim if chart_dim is not None else verts[0].size
    steps = np.stack([verts[i + 1] - verts[i] for i in range(k)])  # (k, dim)

    def eval_fn(pts: Array) -> Array:
        return verts[0] + pts[:, :k] @ steps

    def partials_fn(pts: Array, axis: int) -> Array:
        return np.broadcast_to(steps[axis], (len(pts), dim)).copy()

    return SimplexMap(k, eval_fn, dim, partials_fn=partials_fn)


def affine_path(start, end) -> Path:
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)

    def eval_fn(ts: Array) -> Array:
        return start + ts[:, None] * (end - start)

    return Path(eval_fn, start.size, velocity_fn=lambda ts: np.broadcast_to(end - start, (len(ts), start.size)).copy(), check=False)


def simplex_into_two_path(gamma: TwoPath, domain_vertices) -> SimplexMap:
    """2-simplex obtained by an affine triangle in the square, then gamma."""
    tri = affine_simplex(2, domain_vertices, chart_dim=2)

    def eval_fn(pts: Array) -> Array:
        return gamma.eval(tri.eval(pts))

    def partials_fn(pts: Array, axis: int) -> Array:
        square_pts = tri.eval(pts)
        direction = tri.partial(pts, axis)  # constant (N, 2)
        d_t, d_s = gamma.partials(square_pts)
        return direction[:, :1] * d_t + direction[:, 1:2] * d_s

    return SimplexMap(2, eval_fn, gamma.chart_dim, partials_fn=partials_fn)


def path_into_two_path(gamma: TwoPath, start, end) -> Path:
    """Path obtained by an affine segment in the square, then gamma."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)

    def eval_fn(ts: Array) -> Array:
        return gamma.eval(start + ts[:, None] * (end - start))

    def vel_fn(ts: Array) -> Array:
        pts = start + ts[:, None] * (end - start)
        d_t, d_s = gamma.partials(pts)
        return (end[0] - start[0]) * d_t + (end[1] - start[1]) * d_s

    return Path(eval_fn, gamma.chart_dim, velocity_fn=vel_fn, check=False)


# ---------------------------------------------------------------------------
# smooth warps and the well-supported collapse


def sitting_warp(x: Array) -> Array:
    """C-infinity increasing [0,1] -> [0,1] with all derivatives zero at the ends."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = np.where(x > 0.0, np.exp(-1.0 / np.clip(x, 1e-300, None)), 0.0)
        g = np.where(x < 1.0, np.exp(-1.0 / np.clip(1.0 - x, 1e-300, None)), 0.0)
    return f / (f + g)


def sitting_warp_deriv(x: Array) -> Array:
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        # Clip denominators away from zero: where the clip is active the
        # matching numerator already underflowed to an exact 0.
        xs = np.clip(x, 1e-3, None)
        ys = np.clip(1.0 - x, 1e-3, None)
        f = np.where(x > 0.0, np.exp(-1.0 / np.clip(x, 1e-300, None)), 0.0)
        g = np.where(x < 1.0, np.exp(-1.0 / np.clip(1.0 - x, 1e-300, None)), 0.0)
        fp = f / xs**2
        gp = -g / ys**2
    return (fp * g - f * gp) / (f + g) ** 2


# Small square the shrink squeezes the action into: centered in the
# lower-right quarter of the domain.
SHRINK_BOX = (0.55, 0.95, 0.05, 0.45)  # (t_lo, t_hi, s_lo, s_hi)


def _ramp(x: Array, lo: float, hi: float) -> Array:
    """Clamped quintic smoothstep: 0 below lo, 1 above hi, C^2 overall and
    polynomial in between (kind to panelized quadrature)."""
    u = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def _ramp_deriv(x: Array, lo: float, hi: float) -> Array:
    u = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    return 30.0 * u**2 * (1.0 - u) ** 2 / (hi - lo)


def shrink_well_supported(gamma: TwoPath, box=SHRINK_BOX) -> TwoPath:
    """2-path equal to gamma up to a boundary-respecting squeeze: both axes
    are clamped smooth ramps, so the whole unit square is traversed while
    the parameters sit inside the small box.  The result is constant on the
    regions left and right of the box (the vertical sides of gamma are
    points), has rank at most 1 above and below it, and can have rank 2
    only inside the box."""
    a1, a2, b1, b2 = box

    def squeeze(pts: Array) -> Array:
        return np.column_stack([_ramp(pts[:, 0], a1, a2), _ramp(pts[:, 1], b1, b2)])

    def eval_fn(pts: Array) -> Array:
        return gamma.eval(squeeze(pts))

    def partials_fn(pts: Array) -> tuple[Array, Array]:
        mapped = squeeze(pts)
        g_t, g_s = gamma.partials(mapped)
        r_t = _ramp_deriv(pts[:, 0], a1, a2)[:, None]
        r_s = _ramp_deriv(pts[:, 1], b1, b2)[:, None]
        return r_t * g_t, r_s * g_s

    # The map is smooth; the box edges are resolution hints for quadrature.
    t_hints = (a1, 0.5 * (a1 + a2), a2)
    s_hints = (b1, 0.5 * (b1 + b2), b2)
    return TwoPath(eval_fn, gamma.chart_dim, t_breakpoints=t_hints,
                   s_breakpoints=s_hints, partials_fn=partials_fn)
