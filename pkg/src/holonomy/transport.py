"""One- and two-dimensional transport: the holonomy ODEs, the iterated
integral series, the square-to-simplex integration maps, and the residuals
comparing all of them.

Degree bookkeeping: 1-transports are invertible chain maps; values of
2-transports are degree -1 endomorphisms compared modulo [d, End^-2(V)].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .complexes import GradedMap, graded_commutator_with_differential, quotient_project
from .connection import SuperconnectionField, TwoConnection, max_flatness_residual, truncate_connection
from .crossed_module import Gl0Element, Glm1Element
from .errors import DegeneracyError, FlatnessError, TruncationWarning
from .geometry import (
    Path,
    SimplexMap,
    TwoPath,
    embed_a,
    reverse_path,
    shrink_well_supported,  # noqa: F401  (re-exported: lives naturally here)
    theta,
    theta_partials,
    two_path_slices,
)
from .quadrature import (
    iterated_descending,
    layered_insertion_integral,
    panel_nodes,
    rk4_batch_evolution,
    rk4_evolution,
    subdivide,
    transport_mesh,
)

RESULT_CHAIN_TOL = 1e-9
RESULT_COND_CAP = 1e10
SERIES_PANEL_WIDTH = 1.0 / 16.0


@dataclass(frozen=True)
class QuadratureConfig:
    """Discretization knobs shared by all transport routines."""

    ode_steps: int = 192
    simplex_order: int = 6
    series_max: int = 3
    term_tol: float = 1e-10
    fd_step: float = 1e-4

    def __post_init__(self):
        if min(self.ode_steps, self.simplex_order, self.series_max) <= 0:
            raise ValueError("configuration values must be positive")
        if self.term_tol <= 0 or self.fd_step <= 0:
            raise ValueError("configuration values must be positive")

    def refined(self, factor: int = 2) -> "QuadratureConfig":
        return replace(self, ode_steps=self.ode_steps * factor, simplex_order=self.simplex_order * factor)

    @property
    def s_order(self) -> int:
        return self.simplex_order + 2


DEFAULT_CONFIG = QuadratureConfig()


def _path_pullback(a_field, gamma: Path):
    """t -> A_{gamma(t)}(gamma'(t)) as a batched total-matrix function."""

    def a_at(ts: np.ndarray) -> np.ndarray:
        pts = gamma.eval(ts)
        vel = gamma.velocity(ts)
        return a_field.apply_total(pts, [vel])

    return a_at


def _validate_gl0(complex, total: np.ndarray) -> Gl0Element:
    d = complex.total_differential()
    comm = np.linalg.norm(d @ total - total @ d)
    if comm > RESULT_CHAIN_TOL * max(1.0, np.linalg.norm(total)):
        raise DegeneracyError(f"transport result is not a chain map (|[d,g]| = {comm:.3e})")
    g = GradedMap.from_total(complex, 0, total)
    for k, block in g.blocks.items():
        if block.size and np.linalg.cond(block) > RESULT_COND_CAP:
            raise DegeneracyError(f"transport result numerically singular at degree {k}")
    return Gl0Element(g, check=False)


def _validate_glm1(complex, total: np.ndarray, context: str) -> Glm1Element:
    d = complex.total_differential()
    delta_total = d @ total + total @ d + np.eye(complex.total_dim)
    if np.linalg.cond(delta_total) > RESULT_COND_CAP:
        raise DegeneracyError(f"{context}: [d,h] + id is numerically singular")
    return Glm1Element(GradedMap.from_total(complex, -1, total), check=False)


def transport1_ode(a_field, gamma: Path, cfg: QuadratureConfig = DEFAULT_CONFIG) -> Gl0Element:
    """Solve g' = -A(gamma'(t)) g, g(0) = id, with fixed-step RK4."""
    complex = a_field.complex
    mesh = transport_mesh(cfg.ode_steps, gamma.breakpoints)
    values = rk4_evolution(_path_pullback(a_field, gamma), mesh, complex.total_dim)
    return _validate_gl0(complex, values[-1])


def transport1_series(a_field, gamma: Path, n_terms: int, cfg: QuadratureConfig = DEFAULT_CONFIG) -> dict:
    """Partial sums of the three iterated-integral series for g, g^{-1} and
    the transport of the reversed path."""
    complex = a_field.complex
    dim = complex.total_dim
    a_at = _path_pullback(a_field, gamma)
    rev_breaks = tuple(sorted(1.0 - b for b in gamma.breakpoints))

    def a_rev(ts: np.ndarray) -> np.ndarray:
        return a_at(1.0 - ts)

    eye = np.eye(dim)
    desc = iterated_descending(a_at, dim, n_terms, cfg.simplex_order,
                               breakpoints=gamma.breakpoints, max_width=SERIES_PANEL_WIDTH)
    asc = iterated_descending(a_at, dim, n_terms, cfg.simplex_order,
                              breakpoints=gamma.breakpoints, max_width=SERIES_PANEL_WIDTH, ascending=True)
    rev = iterated_descending(a_rev, dim, n_terms, cfg.simplex_order,
                              breakpoints=rev_breaks, max_width=SERIES_PANEL_WIDTH)
    g = eye + sum(((-1.0) ** n) * desc[n] for n in range(1, n_terms + 1))
    g_inv = eye + sum(asc[n] for n in range(1, n_terms + 1))
    g_reversed = eye + sum(rev[n] for n in range(1, n_terms + 1))
    return {
        "g": _validate_gl0(complex, g),
        "g_inv": _validate_gl0(complex, g_inv),
        "g_reversed": _validate_gl0(complex, g_reversed),
    }


def beta1(alpha: SuperconnectionField, gamma: Path, cfg: QuadratureConfig = DEFAULT_CONFIG) -> Gl0Element:
    """Transport of the reversed path: the inverse of the usual holonomy."""
    return transport1_ode(alpha.alpha1, reverse_path(gamma), cfg)


# ---------------------------------------------------------------------------
# slice transports shared by the 2-holonomy routines


def _slice_data(conn: TwoConnection, gamma: TwoPath, s_values: np.ndarray, cfg: QuadratureConfig):
    """Per horizontal slice: the inner integral of g^{-1} (.) B (.) g over t,
    and the slice transport g(1).  Returns (K, hol), each (S, D, D)."""
    complex = conn.complex
    dim = complex.total_dim
    n_s = len(s_values)
    t_panels = subdivide(gamma.t_breakpoints, max_width=0.5)
    nodes, wts = panel_nodes(t_panels, cfg.s_order)
    mesh = transport_mesh(cfg.ode_steps, gamma.t_breakpoints, extra_nodes=nodes)
    node_idx = np.searchsorted(mesh, nodes)
    if np.max(np.abs(mesh[node_idx] - nodes)) > 1e-10:
        raise RuntimeError("quadrature nodes lost while building the transport mesh")

    def a_batch(ts: np.ndarray) -> np.ndarray:
        tt = np.tile(ts, n_s)
        ss = np.repeat(s_values, len(ts))
        pts = np.column_stack([tt, ss])
        d_t, _ = gamma.partials(pts)
        vals = conn.a_total(gamma.eval(pts), [d_t])
        return vals.reshape(n_s, len(ts), dim, dim)

    g_nodes, g_final = rk4_batch_evolution(a_batch, mesh, dim, n_s, keep_indices=node_idx)

    tt = np.tile(nodes, n_s)
    ss = np.repeat(s_values, len(nodes))
    pts = np.column_stack([tt, ss])
    d_t, d_s = gamma.partials(pts)
    b_vals = conn.b_total(gamma.eval(pts), [d_t, d_s]).reshape(n_s, len(nodes), dim, dim)
    g_inv = np.linalg.inv(g_nodes)
    k = np.einsum("m,smij,smjk,smkl->sil", wts, g_inv, b_vals, g_nodes)
    return k, g_final


def hol2_ode(conn: TwoConnection, gamma: TwoPath, cfg: QuadratureConfig = DEFAULT_CONFIG) -> Glm1Element:
    """2-holonomy by the s-ODE h' = (L_h)_*(inner integral), h(0) = unit."""
    complex = conn.complex
    dim = complex.total_dim
    d = complex.total_differential()
    eye = np.eye(dim)
    mesh_s = transport_mesh(cfg.ode_steps, gamma.s_breakpoints)
    mids = 0.5 * (mesh_s[:-1] + mesh_s[1:])
    all_s = np.unique(np.concatenate([mesh_s, mids]))
    k_all, _ = _slice_data(conn, gamma, all_s, cfg)
    l_all = d @ k_all + k_all @ d
    at_mesh = np.searchsorted(all_s, mesh_s)
    at_mid = np.searchsorted(all_s, mids)

    h = np.zeros((dim, dim))
    for i in range(len(mesh_s) - 1):
        tau = mesh_s[i + 1] - mesh_s[i]
        k_lo, l_lo = k_all[at_mesh[i]], l_all[at_mesh[i]]
        k_mid, l_mid = k_all[at_mid[i]], l_all[at_mid[i]]
        k_hi, l_hi = k_all[at_mesh[i + 1]], l_all[at_mesh[i + 1]]
        f1 = k_lo + h @ l_lo
        f2 = k_mid + (h + 0.5 * tau * f1) @ l_mid
        f3 = k_mid + (h + 0.5 * tau * f2) @ l_mid
        f4 = k_hi + (h + tau * f3) @ l_hi
        h = h + (tau / 6.0) * (f1 + 2.0 * (f2 + f3) + f4)
        if np.linalg.cond(d @ h + h @ d + eye) > RESULT_COND_CAP:
            raise DegeneracyError(f"2-transport left the group at s = {mesh_s[i + 1]:.4f}")
    return _validate_glm1(complex, h, "2-transport (ODE)")


def hol2_integral(conn: TwoConnection, gamma: TwoPath, cfg: QuadratureConfig = DEFAULT_CONFIG) -> Glm1Element:
    """2-holonomy by the closed double-integral formula."""
    complex = conn.complex
    s_panels = subdivide(gamma.s_breakpoints, max_width=0.5)
    s_nodes, s_wts = panel_nodes(s_panels, cfg.s_order)
    s_values = np.concatenate([s_nodes, [1.0]])
    k_all, hol_all = _slice_data(conn, gamma, s_values, cfg)
    hol_inv = np.linalg.inv(hol_all)
    integrand = k_all[:-1] @ hol_inv[:-1]
    total = np.einsum("s,sij->ij", s_wts, integrand) @ hol_all[-1]
    return _validate_glm1(complex, total, "2-transport (integral)")


def z_integral(conn: TwoConnection, gamma: TwoPath, cfg: QuadratureConfig = DEFAULT_CONFIG) -> GradedMap:
    """Iterated-integral representation of the double integral behind the
    2-holonomy; a raw degree -1 value, truncated by layer."""
    complex = conn.complex
    dim = complex.total_dim

    def ab_at_factory(s: float):
        def ab_at(ts: np.ndarray):
            pts = np.column_stack([1.0 - ts, np.full_like(ts, s)])
            d_t, d_s = gamma.partials(pts)
            image = gamma.eval(pts)
            return conn.a_total(image, [d_t]), conn.b_total(image, [d_t, d_s])

        return ab_at

    t_breaks = tuple(sorted(1.0 - b for b in gamma.t_breakpoints))
    s_panels = subdivide(gamma.s_breakpoints, max_width=0.5)
    s_nodes, s_wts = panel_nodes(s_panels, cfg.s_order)
    layers = [np.zeros((dim, dim)) for _ in range(cfg.series_max + 1)]
    for s, ws in zip(s_nodes, s_wts):
        t_panels = subdivide(t_breaks, max_width=0.5)
        per_s = layered_insertion_integral(ab_at_factory(s), dim,
                                           cfg.series_max, cfg.simplex_order, t_panels)
        for layer, value in zip(layers, per_s):
            layer += ws * value
    _warn_if_truncated(layers, cfg, "layered 2-transport integral")
    return GradedMap.from_total(complex, -1, sum(layers))


def beta2(alpha: SuperconnectionField, sigma: SimplexMap, cfg: QuadratureConfig = DEFAULT_CONFIG) -> GradedMap:
    """The degree -1 value attached to a 2-simplex by the integration map:
    the layered series of fold-pullback integrals."""
    if sigma.k != 2:
        raise ValueError("the level-2 integration map needs a 2-simplex")
    hints = tuple(getattr(sigma, "resolution_hints", ()))
    complex = alpha.complex
    dim = complex.total_dim
    a_zero = alpha.alpha1.is_zero()

    def ab_at_factory(s: float):
        def ab_at(ts: np.ndarray):
            pts = np.column_stack([ts, np.full_like(ts, s)])
            folded = theta(pts)
            d_fold_t, d_fold_s = theta_partials(pts)
            ds0 = sigma.partial(folded, 0)
            ds1 = sigma.partial(folded, 1)
            image_t = ds0 * d_fold_t[:, :1] + ds1 * d_fold_t[:, 1:2]
            image_s = ds0 * d_fold_s[:, :1] + ds1 * d_fold_s[:, 1:2]
            image = sigma.eval(folded)
            if a_zero:
                a_vals = np.zeros((len(ts), dim, dim))
            else:
                a_vals = alpha.alpha1.apply_total(image, [image_t])
            return a_vals, alpha.alpha2.apply_total(image, [image_t, image_s])

        return ab_at

    s_panels = subdivide(hints, max_width=0.25)
    s_nodes, s_wts = panel_nodes(s_panels, cfg.s_order)
    layers = [np.zeros((dim, dim)) for _ in range(cfg.series_max + 1)]
    for s, ws in zip(s_nodes, s_wts):
        # The fold is non-smooth across t = 1/2 and across its crease at
        # t = (1 - s)/2; split panels there.  A feature of the simplex map
        # at coordinate v surfaces at fold parameter (1 - v)/2.
        t_hints = {(1.0 - v) / 2.0 for v in hints}
        t_panels = subdivide({0.5, (1.0 - s) / 2.0} | t_hints, max_width=0.5)
        per_s = layered_insertion_integral(ab_at_factory(s), dim,
                                           cfg.series_max, cfg.simplex_order, t_panels)
        for layer, value in zip(layers, per_s):
            layer += ws * value
    # Chains with L one-form factors and one two-form factor carry the
    # prefactor (-1)^(L+1), so whole layers alternate in sign.
    signed = [((-1.0) ** (L + 1)) * layer for L, layer in enumerate(layers)]
    _warn_if_truncated(signed, cfg, "level-2 integration series")
    return GradedMap.from_total(complex, -1, sum(signed))


def _warn_if_truncated(layers, cfg: QuadratureConfig, label: str) -> None:
    last = np.linalg.norm(layers[-1])
    if last >= cfg.term_tol:
        warnings.warn(
            f"{label} truncated at layer {cfg.series_max} with norm {last:.3e} >= {cfg.term_tol:.1e}",
            TruncationWarning,
            stacklevel=3,
        )


# ---------------------------------------------------------------------------
# triangles of a square, and the truncated representation


def triangle_b(gamma: TwoPath) -> SimplexMap:
    """The square restricted to the lower-right triangle (identity embedding)."""

    def eval_fn(pts: np.ndarray) -> np.ndarray:
        return gamma.eval(pts)

    def partials_fn(pts: np.ndarray, axis: int) -> np.ndarray:
        d_t, d_s = gamma.partials(pts)
        return d_t if axis == 0 else d_s

    out = SimplexMap(2, eval_fn, gamma.chart_dim, partials_fn=partials_fn)
    out.resolution_hints = tuple(sorted(set(gamma.t_breakpoints) | set(gamma.s_breakpoints)))
    return out


def triangle_a(gamma: TwoPath) -> SimplexMap:
    """The square restricted to the upper-left triangle (coordinate swap)."""

    def eval_fn(pts: np.ndarray) -> np.ndarray:
        return gamma.eval(embed_a(pts))

    def partials_fn(pts: np.ndarray, axis: int) -> np.ndarray:
        d_t, d_s = gamma.partials(embed_a(pts))
        return d_s if axis == 0 else d_t

    out = SimplexMap(2, eval_fn, gamma.chart_dim, partials_fn=partials_fn)
    out.resolution_hints = tuple(sorted(set(gamma.t_breakpoints) | set(gamma.s_breakpoints)))
    return out


def simplex_edge_path(sigma: SimplexMap, which: str) -> Path:
    """Edge paths of a 2-simplex: bottom t -> (t, 0), right t -> (1, t),
    and the diagonal t -> (t, t)."""
    coords = {
        "bottom": lambda ts: np.column_stack([ts, np.zeros_like(ts)]),
        "right": lambda ts: np.column_stack([np.ones_like(ts), ts]),
        "diagonal": lambda ts: np.column_stack([ts, ts]),
    }[which]
    weights = {"bottom": (1.0, 0.0), "right": (0.0, 1.0), "diagonal": (1.0, 1.0)}[which]

    def eval_fn(ts: np.ndarray) -> np.ndarray:
        return sigma.eval(coords(ts))

    def vel_fn(ts: np.ndarray) -> np.ndarray:
        pts = coords(ts)
        out = 0.0
        if weights[0]:
            out = out + weights[0] * sigma.partial(pts, 0)
        if weights[1]:
            out = out + weights[1] * sigma.partial(pts, 1)
        return out

    return Path(eval_fn, sigma.chart_dim, velocity_fn=vel_fn, check=False)


class TruncatedRep:
    """Holonomy data of paths and squares extracted from the level-(1,2)
    integration maps."""

    def __init__(self, alpha: SuperconnectionField, cfg: QuadratureConfig = DEFAULT_CONFIG,
                 check_flat: bool = True):
        if check_flat:
            res, x, n = max_flatness_residual(alpha, cfg.fd_step)
            if res > 1e-6:
                raise FlatnessError(f"field is not flat (degree-{n} residual {res:.3e})",
                                    point=x, residual=res)
        self.alpha = alpha
        self.cfg = cfg

    def on_path(self, gamma: Path) -> Gl0Element:
        return beta1(self.alpha, reverse_path(gamma), self.cfg)

    def on_two_path(self, gamma: TwoPath) -> Glm1Element:
        diff = beta2(self.alpha, triangle_b(gamma), self.cfg) - beta2(self.alpha, triangle_a(gamma), self.cfg)
        top = two_path_slices(gamma).edge1
        hol_top = beta1(self.alpha, reverse_path(top), self.cfg)
        total = diff.to_total() @ hol_top.map.to_total()
        try:
            return _validate_glm1(self.alpha.complex, total, "truncated representation")
        except DegeneracyError as exc:
            raise DegeneracyError(f"{exc}; quadrature is likely too coarse") from exc


def truncate_rep(alpha: SuperconnectionField, cfg: QuadratureConfig = DEFAULT_CONFIG) -> TruncatedRep:
    return TruncatedRep(alpha, cfg)


# ---------------------------------------------------------------------------
# residuals


def main_theorem_residual(alpha: SuperconnectionField, gamma: TwoPath,
                          cfg: QuadratureConfig = DEFAULT_CONFIG,
                          conn: TwoConnection | None = None) -> float:
    """Quotient distance between the triangle-difference of the level-2
    integration map and the layered double-integral representation."""
    if conn is None:
        conn = truncate_connection(alpha, cfg.fd_step)
    lhs = beta2(alpha, triangle_b(gamma), cfg) - beta2(alpha, triangle_a(gamma), cfg)
    rhs = z_integral(conn, gamma, cfg)
    return quotient_project(lhs - rhs).norm()


def structure_residual_n2(alpha: SuperconnectionField, sigma: SimplexMap,
                          cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Frobenius norm of [d, beta2(sigma)] + beta1(diagonal)
    - beta1(bottom edge) beta1(right edge)."""
    value = beta2(alpha, sigma, cfg)
    comm = graded_commutator_with_differential(value)
    diag = beta1(alpha, simplex_edge_path(sigma, "diagonal"), cfg)
    bottom = beta1(alpha, simplex_edge_path(sigma, "bottom"), cfg)
    right = beta1(alpha, simplex_edge_path(sigma, "right"), cfg)
    residual = comm.to_total() + diag.map.to_total() - bottom.map.to_total() @ right.map.to_total()
    return float(np.linalg.norm(residual))
