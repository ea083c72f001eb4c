"""Fixture documents: charts, complexes, fields and test geometry.

A fixture document is a JSON object; the built-in catalog is stored as the
same kind of document and goes through the same materialization code.

Document schema::

    {
      "name": str,
      "chart_dim": int,                    # 2 or 3; coordinates x, y, z
      "complex": {"dims": {"0": 2, ...},
                  "differentials": {"0": [[...], ...], ...}},   # row-major
      "alpha1": [TERM, ...],               # optional, 1-form part
      "alpha2": [TERM, ...],               # optional, 2-form part
      "alpha3": [TERM, ...],               # optional, 3-form part
      "two_paths": {"basic": [expr, ...]}, # components in variables t, s
      "paths": {"line": [expr, ...]},      # components in variable t
      "expected": {...},                   # optional reference values
      "meta": {...}                        # optional free-form extras
    }

    TERM = {"coeff": expr-or-number, "axes": [0, ...],
            "matrix": {"degree": int, "blocks": {"k": [[...], ...]}}}

Every fixture is checked for flatness on load and rejected otherwise.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .complexes import CochainComplex, GradedMap
from .connection import FormField, SuperconnectionField, max_flatness_residual
from .errors import FixtureError
from .geometry import (
    Path,
    TwoPath,
    compose_two_paths_horizontal,
    compose_two_paths_vertical,
    path_from_exprs,
    sitting_warp,
    sitting_warp_deriv,
    two_path_from_exprs,
)

LOAD_FLATNESS_TOL = 1e-6
FIXTURE_DIR_VAR = "HOLONOMY_FIXTURE_DIR"


def graded_map_to_doc(g: GradedMap) -> dict:
    return {"degree": g.degree, "blocks": {str(k): b.tolist() for k, b in g.blocks.items()}}


def graded_map_from_doc(complex: CochainComplex, doc: dict) -> GradedMap:
    blocks = {int(k): np.array(v, dtype=float) for k, v in doc.get("blocks", {}).items()}
    return GradedMap(complex, int(doc["degree"]), blocks)


@dataclass
class Fixture:
    name: str
    complex: CochainComplex
    alpha: SuperconnectionField
    two_paths: dict[str, TwoPath] = field(default_factory=dict)
    paths: dict[str, Path] = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def chart_dim(self) -> int:
        return self.alpha.chart_dim


def _materialize(doc: dict) -> Fixture:
    try:
        name = doc["name"]
        chart_dim = int(doc["chart_dim"])
        complex = CochainComplex(
            {int(k): int(v) for k, v in doc["complex"]["dims"].items()},
            {int(k): np.array(v, dtype=float) for k, v in doc["complex"].get("differentials", {}).items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FixtureError(f"malformed fixture document: {exc}") from exc

    def field_from(key: str, form_degree: int, value_degree: int) -> FormField | None:
        terms_doc = doc.get(key)
        if not terms_doc:
            return None
        terms = []
        for term in terms_doc:
            matrix = graded_map_from_doc(complex, term["matrix"])
            terms.append((term["coeff"], tuple(term["axes"]), matrix))
        return FormField(complex, chart_dim, form_degree, value_degree, terms)

    try:
        alpha = SuperconnectionField(
            complex,
            chart_dim,
            alpha1=field_from("alpha1", 1, 0),
            alpha2=field_from("alpha2", 2, -1),
            alpha3=field_from("alpha3", 3, -2),
        )
    except ValueError as exc:
        raise FixtureError(f"bad field data in fixture {name!r}: {exc}") from exc

    residual, point, degree = max_flatness_residual(alpha)
    if residual > LOAD_FLATNESS_TOL:
        raise FixtureError(
            f"fixture {name!r} is not flat: degree-{degree} residual {residual:.3e} at {point}"
        )

    two_paths = {key: two_path_from_exprs(parts) for key, parts in doc.get("two_paths", {}).items()}
    paths = {key: path_from_exprs(parts) for key, parts in doc.get("paths", {}).items()}
    expected = {}
    for key, entry in doc.get("expected", {}).items():
        expected[key] = {
            "matrix": graded_map_from_doc(complex, entry["matrix"]),
            "note": entry.get("note", ""),
        }
    return Fixture(name, complex, alpha, two_paths, paths, expected, doc.get("meta", {}))


# ---------------------------------------------------------------------------
# built-in catalog

_TWO_PATHS = {
    "basic": ["t", "6*t*(1-t)*s"],
    "bump": ["t + 0.2*sin(pi*t)*s*(1-s)", "6*t*(1-t)*s + 0.15*sin(2*pi*t)*s*(1-s)"],
    "tilt": ["t - 0.25*s*(1-s)*sin(pi*t)^2", "s*t*(1-t)*(3 + sin(pi*t + s))"],
}

_PATHS = {
    "line": ["t", "0.4*t"],
    "arc": ["0.8*sin(1.5*t)", "0.9*t^2"],
    "swing": ["2*t*(1-t)", "0.5*sin(2*t)"],
}

# Master square for horizontal compositions: the middle vertical line is
# pinched so both halves are valid 2-paths.
_HSPLIT = ["t + 0.15*s*(1-s)*sin(2*pi*t)", "0.8*s*sin(2*pi*t)"]

# FIX-A complex: V^0 = span(u1, u2), V^1 = span(w, w'); d u1 = w, d u2 = 0.
_TWO_STEP = {"dims": {"0": 2, "1": 2}, "differentials": {"0": [[1.0, 0.0], [0.0, 0.0]]}}
# C kills w and sends w' to u2; [d, C] = 0.
_C_BLOCKS = {"degree": -1, "blocks": {"1": [[0.0, 0.0], [0.0, 1.0]]}}
# N is a generic degree -1 map with vanishing (1,1) entry, so [d,N]^2 = 0.
_N_BLOCKS = {"degree": -1, "blocks": {"1": [[0.0, 0.8], [0.7, 0.5]]}}
# [d, N] for the two-step complex above.
_CN_BLOCKS = {"degree": 0, "blocks": {"0": [[0.0, 0.0], [0.7, 0.0]], "1": [[0.0, 0.8], [0.0, 0.0]]}}

# Commuting chain maps for the exact-form fixture.
_M = [[0.3, 0.0], [0.25, -0.2]], [[0.3, 0.35], [0.0, 0.15]]
_M_BLOCKS = {"degree": 0, "blocks": {"0": _M[0], "1": _M[1]}}
_M2_BLOCKS = {
    "degree": 0,
    "blocks": {
        "0": (np.array(_M[0]) @ np.array(_M[0])).tolist(),
        "1": (np.array(_M[1]) @ np.array(_M[1])).tolist(),
    },
}

# FIX-D complex: dims (2, 2, 1) with d0 = e11 and d1 = (0 1).
_THREE_STEP = {
    "dims": {"0": 2, "1": 2, "2": 1},
    "differentials": {"0": [[1.0, 0.0], [0.0, 0.0]], "1": [[0.0, 1.0]]},
}
# Degree -1 generator with [d, .]^2 = 0 on the three-step complex.
_ND_BLOCKS = {"degree": -1, "blocks": {"1": [[0.0, 0.8], [0.7, 0.4]], "2": [[0.5], [0.0]]}}
_CND_BLOCKS = {
    "degree": 0,
    "blocks": {"0": [[0.0, 0.0], [0.7, 0.0]], "1": [[0.0, 1.3], [0.0, 0.0]], "2": [[0.0]]},
}
# A chain map of degree -1 on the three-step complex ([d, .] = 0); it lies
# in the boundary-image subspace, so the quotient projection kills it.
_CD_BLOCKS = {"degree": -1, "blocks": {"1": [[0.0, 0.6], [0.0, -0.4]], "2": [[-0.6], [0.0]]}}

BUILTIN_DOCS: dict[str, dict] = {
    "FIX-A": {
        "name": "FIX-A",
        "chart_dim": 2,
        "complex": _TWO_STEP,
        "alpha2": [{"coeff": 1.0, "axes": [0, 1], "matrix": _C_BLOCKS}],
        "two_paths": _TWO_PATHS,
        "paths": _PATHS,
        "expected": {
            "two_transport_basic": {
                "matrix": {"degree": -1, "blocks": {"1": [[0.0, 0.0], [0.0, -1.0]]}},
                "note": "closed form: the basic square sweeps unit area and the "
                        "2-form part is constant with [d, C] = 0",
            }
        },
        "meta": {"hsplit": _HSPLIT},
    },
    "FIX-B": {
        "name": "FIX-B",
        "chart_dim": 2,
        "complex": _TWO_STEP,
        # alpha1 = d f1 (x) M + d f2 (x) M^2 for commuting chain maps M, M^2:
        # exact one-forms with commuting factors, hence flat.
        "alpha1": [
            {"coeff": "0.5*cos(x)*cos(y)", "axes": [0], "matrix": _M_BLOCKS},
            {"coeff": "-0.5*sin(x)*sin(y)", "axes": [1], "matrix": _M_BLOCKS},
            {"coeff": "0.12*exp(0.3*x)*sin(y)", "axes": [0], "matrix": _M2_BLOCKS},
            {"coeff": "0.4*exp(0.3*x)*cos(y)", "axes": [1], "matrix": _M2_BLOCKS},
        ],
        "two_paths": _TWO_PATHS,
        "paths": _PATHS,
        "meta": {
            "hsplit": _HSPLIT,
            "potentials": [
                {"f": "0.5*sin(x)*cos(y)", "matrix": _M_BLOCKS},
                {"f": "0.4*exp(0.3*x)*sin(y)", "matrix": _M2_BLOCKS},
            ],
        },
    },
    "FIX-C": {
        "name": "FIX-C",
        "chart_dim": 2,
        "complex": _TWO_STEP,
        # Gauge-type pair: alpha1 = phi dx (x) [d,N], alpha2 = -dphi ^ dx (x) N
        # with phi = 0.5 sin(x + 2y); on a 2-chart this is flat for any phi.
        "alpha1": [{"coeff": "0.5*sin(x + 2*y)", "axes": [0], "matrix": _CN_BLOCKS}],
        "alpha2": [{"coeff": "cos(x + 2*y)", "axes": [0, 1], "matrix": _N_BLOCKS}],
        "two_paths": _TWO_PATHS,
        "paths": _PATHS,
        "meta": {"hsplit": _HSPLIT, "phi": "0.5*sin(x + 2*y)"},
    },
    "FIX-D": {
        "name": "FIX-D",
        "chart_dim": 2,
        "complex": _THREE_STEP,
        # Same gauge-type pair on a three-step complex with a non-trivial
        # boundary-image subspace, plus an extra closed 2-form term whose
        # endomorphism factor is a boundary (the quotient projection kills
        # it, while the level-2 integration map sees it raw).
        "alpha1": [{"coeff": "0.45*sin(x + y)", "axes": [0], "matrix": _CND_BLOCKS}],
        "alpha2": [
            {"coeff": "0.45*cos(x + y)", "axes": [0, 1], "matrix": _ND_BLOCKS},
            {"coeff": "0.7*cos(2*x - y)", "axes": [0, 1], "matrix": _CD_BLOCKS},
        ],
        "two_paths": _TWO_PATHS,
        "paths": _PATHS,
        "meta": {"hsplit": _HSPLIT, "phi": "0.45*sin(x + y)"},
    },
}

BUILTIN_NAMES = tuple(BUILTIN_DOCS)


def load_fixture(name_or_path: str) -> Fixture:
    """Materialize a built-in fixture by name, or a JSON document by path.

    Paths may be absolute, relative, or relative to $HOLONOMY_FIXTURE_DIR.
    """
    if name_or_path in BUILTIN_DOCS:
        return _materialize(BUILTIN_DOCS[name_or_path])
    candidates = [name_or_path]
    env_dir = os.environ.get(FIXTURE_DIR_VAR)
    if env_dir:
        candidates.append(os.path.join(env_dir, name_or_path))
        candidates.append(os.path.join(env_dir, name_or_path + ".json"))
    for candidate in candidates:
        if os.path.isfile(candidate):
            try:
                with open(candidate, "r", encoding="utf-8") as handle:
                    doc = json.load(handle)
            except json.JSONDecodeError as exc:
                raise FixtureError(f"fixture file {candidate!r} is not valid JSON: {exc}") from exc
            return _materialize(doc)
    raise FixtureError(
        f"unknown fixture {name_or_path!r} (built-ins: {', '.join(BUILTIN_NAMES)})"
    )


# ---------------------------------------------------------------------------
# composite squares for the composition checks


def warp_two_path_s(gamma: TwoPath, lo: float, hi: float) -> TwoPath:
    """Restrict the s-range to [lo, hi] through a flat-ended smooth warp, so
    glued composites are smooth across the seam."""

    def eval_fn(pts):
        s = lo + (hi - lo) * sitting_warp(pts[:, 1])
        return gamma.eval(np.column_stack([pts[:, 0], s]))

    def partials_fn(pts):
        warped = sitting_warp(pts[:, 1])
        rate = (hi - lo) * sitting_warp_deriv(pts[:, 1])
        inner = np.column_stack([pts[:, 0], lo + (hi - lo) * warped])
        d_t, d_s = gamma.partials(inner)
        return d_t, rate[:, None] * d_s

    return TwoPath(eval_fn, gamma.chart_dim, t_breakpoints=gamma.t_breakpoints, partials_fn=partials_fn)


def warp_two_path_t(gamma: TwoPath, lo: float, hi: float) -> TwoPath:
    """Restrict the t-range to [lo, hi] through a flat-ended smooth warp."""

    def eval_fn(pts):
        t = lo + (hi - lo) * sitting_warp(pts[:, 0])
        return gamma.eval(np.column_stack([t, pts[:, 1]]))

    def partials_fn(pts):
        warped = sitting_warp(pts[:, 0])
        rate = (hi - lo) * sitting_warp_deriv(pts[:, 0])
        inner = np.column_stack([lo + (hi - lo) * warped, pts[:, 1]])
        d_t, d_s = gamma.partials(inner)
        return rate[:, None] * d_t, d_s

    return TwoPath(eval_fn, gamma.chart_dim, s_breakpoints=gamma.s_breakpoints, partials_fn=partials_fn)


def vertical_pair(master: TwoPath) -> tuple[TwoPath, TwoPath, TwoPath]:
    """(bottom, top, composite): the master square cut at s = 1/2."""
    bottom = warp_two_path_s(master, 0.0, 0.5)
    top = warp_two_path_s(master, 0.5, 1.0)
    return bottom, top, compose_two_paths_vertical(top, bottom)


def horizontal_pair(master: TwoPath) -> tuple[TwoPath, TwoPath, TwoPath]:
    """(left, right, composite): the master square cut at t = 1/2.

    The master must be constant in s along t = 1/2 for the halves to be
    2-paths (the built-in ``hsplit`` square is).
    """
    left = warp_two_path_t(master, 0.0, 0.5)
    right = warp_two_path_t(master, 0.5, 1.0)
    return left, right, compose_two_paths_horizontal(right, left)
