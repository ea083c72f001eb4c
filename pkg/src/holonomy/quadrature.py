"""Panelized Gauss rules, ordered-simplex iterated integrals, and RK4.

The iterated integrals over descending simplices {1 >= t_1 >= ... >= t_k}
are computed per panel with a Duffy-mapped tensor Gauss rule and composed
across panels with the concatenation identity for time-ordered products.
A second driver handles chains with a single distinguished insertion (the
2-form slot of the layered holonomy series), with optional alternating
signs tied to the insertion position.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

ZERO_GRID_TOL = 1e-300


@lru_cache(maxsize=64)
def gauss_01(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return (0.5 * (x + 1.0), 0.5 * w)


def subdivide(breakpoints, lo: float = 0.0, hi: float = 1.0, max_width: float | None = None) -> list[tuple[float, float]]:
    """Ascending panels of [lo, hi] split at breakpoints and a width cap."""
    cuts = {lo, hi}
    for b in breakpoints:
        b = float(b)
        if lo < b < hi:
            cuts.add(b)
    edges = sorted(cuts)
    panels = []
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a < 1e-14:
            continue
        if max_width is not None and b - a > max_width:
            pieces = int(np.ceil((b - a) / max_width))
            sub = np.linspace(a, b, pieces + 1)
            panels.extend(zip(sub[:-1], sub[1:]))
        else:
            panels.append((a, b))
    return panels


def panel_nodes(panels, order: int) -> tuple[np.ndarray, np.ndarray]:
    """All Gauss nodes and weights of the given panels, concatenated."""
    x, w = gauss_01(order)
    nodes, weights = [], []
    for lo, hi in panels:
        nodes.append(lo + (hi - lo) * x)
        weights.append((hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _duffy_grids(lo: float, width: float, order: int, depth: int) -> list[np.ndarray]:
    """Node positions t_i = lo + width * u_1 ... u_i, one grid per chain slot."""
    x, _ = gauss_01(order)
    grids = []
    prod = None
    for i in range(depth):
        prod = x.copy() if prod is None else prod[..., None] * x
        grids.append(lo + width * prod)
    return grids


def _eval_grids(fn, grids: list[np.ndarray], dim: int) -> list[np.ndarray]:
    out = []
    for grid in grids:
        vals = fn(grid.ravel())
        out.append(vals.reshape(grid.shape + (dim, dim)))
    return out


def _chain_contract(values: list[np.ndarray], order: int, width: float, ascending: bool) -> np.ndarray:
    """Weighted ordered product over the Duffy grid; values[j] sits at slot j."""
    x, gw = gauss_01(order)
    m = len(values)
    s = None
    for j in range(m, 0, -1):
        wj = gw * x ** (m - j) * width
        block = values[j - 1]
        if s is None:
            s = np.einsum("q,...qij->...ij", wj, block)
        elif ascending:
            s = np.einsum("q,...qij,...qjk->...ik", wj, s, block)
        else:
            s = np.einsum("q,...qij,...qjk->...ik", wj, block, s)
    return s


class PanelChains:
    """Per-panel ordered integrals T_m (a-chains) and U_m (one b insertion).

    ``ab_at(ts)`` returns the pair of value arrays for both integrand
    species at once, so shared geometry is evaluated a single time.
    """

    def __init__(self, lo, hi, ab_at, dim, depth, order):
        self.dim = dim
        width = hi - lo
        grids = _duffy_grids(lo, width, order, depth)
        a_vals, b_vals = [], []
        for grid in grids:
            a_flat, b_flat = ab_at(grid.ravel())
            a_vals.append(a_flat.reshape(grid.shape + (dim, dim)))
            b_vals.append(b_flat.reshape(grid.shape + (dim, dim)))
        a_zero = all(np.max(np.abs(v)) < ZERO_GRID_TOL for v in a_vals)
        b_zero = all(np.max(np.abs(v)) < ZERO_GRID_TOL for v in b_vals)
        eye = np.eye(dim)
        zero = np.zeros((dim, dim))
        self.T = [eye] + [zero] * depth
        if not a_zero:
            for m in range(1, depth + 1):
                self.T[m] = _chain_contract(a_vals[:m], order, width, ascending=False)
        self.U = [zero] * (depth + 1)
        if b_zero:
            return
        max_m = 1 if a_zero else depth
        for m in range(1, max_m + 1):
            acc = np.zeros((dim, dim))
            for p in range(1, m + 1):
                chain = list(a_vals[:m])
                chain[p - 1] = b_vals[p - 1]
                acc += _chain_contract(chain, order, width, ascending=False)
            self.U[m] = acc


def iterated_descending(a_at, dim: int, max_n: int, order: int, breakpoints=(),
                        max_width: float = 1.0 / 16.0, depth_cap: int = 4,
                        ascending: bool = False) -> list[np.ndarray]:
    """T_n = integral over {1 >= t_1 >= ... >= t_n >= 0} of a(t_1)...a(t_n).

    With ``ascending=True`` the region is {t_1 <= ... <= t_n} instead (same
    factor order: a(t_1) leftmost).  Returns [T_0, ..., T_max_n].
    """
    panels = subdivide(breakpoints, max_width=max_width)
    depth = min(max_n, depth_cap)
    per_panel = []
    for lo, hi in panels:
        width = hi - lo
        grids = _duffy_grids(lo, width, order, depth)
        vals = _eval_grids(a_at, grids, dim)
        if all(np.max(np.abs(v)) < ZERO_GRID_TOL for v in vals):
            chains = [np.eye(dim)] + [np.zeros((dim, dim))] * depth
        else:
            chains = [np.eye(dim)]
            for m in range(1, depth + 1):
                chains.append(_chain_contract(vals[:m], order, width, ascending=ascending))
        per_panel.append(chains)
    # Concatenation across panels: larger parameters sit leftmost in the
    # descending product, so process panels from the top down.
    ordered = list(reversed(per_panel)) if not ascending else per_panel
    g = [np.eye(dim)] + [np.zeros((dim, dim))] * max_n
    for chains in ordered:
        new_g = []
        for n in range(max_n + 1):
            acc = np.zeros((dim, dim))
            for m in range(0, min(n, depth) + 1):
                acc += g[n - m] @ chains[m]
            new_g.append(acc)
        g = new_g
    return g


def layered_insertion_integral(ab_at, dim: int, series_max: int, order: int,
                               t_panels) -> list[np.ndarray]:
    """For each layer L <= series_max, the sum over all chains of L factors
    of a and one insertion of b, integrated over the descending
    (L+1)-simplex.  Returns [layer_0, ..., layer_series_max]."""
    depth = series_max + 1
    per_panel = []
    for lo, hi in t_panels:
        per_panel.append(PanelChains(lo, hi, ab_at, dim, depth, order))
    zero = np.zeros((dim, dim))
    c = [np.eye(dim)] + [zero] * depth
    w = [zero] * (depth + 1)
    for chains in reversed(per_panel):
        new_c, new_w = [], []
        for n in range(depth + 1):
            acc_c = np.zeros((dim, dim))
            acc_w = np.zeros((dim, dim))
            for m in range(0, min(n, depth) + 1):
                acc_c += c[n - m] @ chains.T[m]
                acc_w += w[n - m] @ chains.T[m]
                if m >= 1:
                    acc_w += c[n - m] @ chains.U[m]
            new_c.append(acc_c)
            new_w.append(acc_w)
        c, w = new_c, new_w
    return [w[L + 1] for L in range(series_max + 1)]


def transport_mesh(steps: int, breakpoints=(), extra_nodes=()) -> np.ndarray:
    """Ascending mesh of [0,1]: a uniform grid merged with breakpoints/nodes."""
    grid = np.linspace(0.0, 1.0, max(int(steps), 1) + 1)
    mesh = np.concatenate([grid, np.asarray(list(breakpoints), dtype=float),
                           np.asarray(list(extra_nodes), dtype=float)])
    mesh = np.unique(np.clip(mesh, 0.0, 1.0))
    keep = [mesh[0]]
    for value in mesh[1:]:
        if value - keep[-1] > 1e-13:
            keep.append(value)
    return np.asarray(keep)


def rk4_evolution(a_at, mesh: np.ndarray, dim: int) -> np.ndarray:
    """Solve g' = -a(t) g, g(0) = id, one RK4 step per mesh gap.

    Returns the solution at every mesh point, shape (len(mesh), dim, dim).
    """
    mids = 0.5 * (mesh[:-1] + mesh[1:])
    a_mesh = a_at(mesh)
    a_mid = a_at(mids)
    out = np.empty((len(mesh), dim, dim))
    g = np.eye(dim)
    out[0] = g
    for i in range(len(mesh) - 1):
        h = mesh[i + 1] - mesh[i]
        k1 = -a_mesh[i] @ g
        k2 = -a_mid[i] @ (g + 0.5 * h * k1)
        k3 = -a_mid[i] @ (g + 0.5 * h * k2)
        k4 = -a_mesh[i + 1] @ (g + h * k3)
        g = g + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        out[i + 1] = g
    return out


def rk4_batch_evolution(a_at, mesh: np.ndarray, dim: int, batch: int,
                        keep_indices=None) -> tuple[np.ndarray | None, np.ndarray]:
    """Batched variant: a_at(ts) returns (batch, len(ts), dim, dim).

    Solves the ``batch`` independent systems simultaneously.  Returns
    (kept, final): solution values at the requested mesh indices (or None)
    and the final values g at mesh[-1], shape (batch, dim, dim).
    """
    mids = 0.5 * (mesh[:-1] + mesh[1:])
    a_mesh = a_at(mesh)
    a_mid = a_at(mids)
    g = np.broadcast_to(np.eye(dim), (batch, dim, dim)).copy()
    kept = None
    keep_pos = {}
    if keep_indices is not None:
        kept = np.empty((batch, len(keep_indices), dim, dim))
        keep_pos = {int(idx): slot for slot, idx in enumerate(keep_indices)}
        if 0 in keep_pos:
            kept[:, keep_pos[0]] = g
    for i in range(len(mesh) - 1):
        h = mesh[i + 1] - mesh[i]
        k1 = -a_mesh[:, i] @ g
        k2 = -a_mid[:, i] @ (g + 0.5 * h * k1)
        k3 = -a_mid[:, i] @ (g + 0.5 * h * k2)
        k4 = -a_mesh[:, i + 1] @ (g + h * k3)
        g = g + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if kept is not None and (i + 1) in keep_pos:
            kept[:, keep_pos[i + 1]] = g
    return kept, g
