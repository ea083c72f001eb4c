"""Machine-readable verification reports with bit-stable serialization."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field


@dataclass
class Record:
    check_id: str
    identity: str
    digest: str
    residual: float | None
    tolerance: float
    passed: bool
    wall_ms: float = 0.0
    worst_case: str = ""
    error: str = ""


@dataclass
class Report:
    suite: str
    seed: int
    config: dict
    tool_version: str
    records: list[Record] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def sorted_records(self) -> list[Record]:
        return sorted(self.records, key=lambda r: r.check_id)


def inputs_digest(payload) -> str:
    """Short stable digest of a check's inputs."""
    return hashlib.sha256(_canonical(payload).encode()).hexdigest()[:12]


def _format_float(value: float) -> str:
    if value != value:  # NaN
        return '"nan"'
    if math.isinf(value):
        return '"inf"' if value > 0 else '"-inf"'
    if value == int(value) and abs(value) < 1e16:
        return f"{value:.1f}"
    return f"{value:.17g}"


def _canonical(obj) -> str:
    """Deterministic JSON: sorted keys, 17-significant-digit floats."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _format_float(obj)
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{out}"'
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_canonical(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ", ".join(f'{_canonical(k)}: {_canonical(v)}' for k, v in items) + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def report_document(report: Report, timings: bool = False) -> dict:
    records = []
    for rec in report.sorted_records():
        records.append(
            {
                "check_id": rec.check_id,
                "identity": rec.identity,
                "inputs_digest": rec.digest,
                "residual": rec.residual,
                "tolerance": rec.tolerance,
                "passed": rec.passed,
                # Wall time is inherently non-reproducible; the canonical
                # byte-stable document zeroes it unless timings are requested.
                "wall_ms": round(rec.wall_ms, 3) if timings else 0.0,
                "worst_case": rec.worst_case,
                "error": rec.error,
            }
        )
    return {
        "suite": report.suite,
        "seed": report.seed,
        "config": report.config,
        "tool": {"name": "holonomy", "version": report.tool_version},
        "passed": report.passed,
        "records": records,
    }


def emit_json(report: Report, timings: bool = False) -> str:
    return _canonical(report_document(report, timings)) + "\n"


def emit_text(report: Report, timings: bool = False) -> str:
    lines = []
    lines.append(f"suite: {report.suite}   seed: {report.seed}   tool: holonomy {report.tool_version}")
    cfg = ", ".join(f"{k}={v}" for k, v in sorted(report.config.items()))
    lines.append(f"config: {cfg}")
    lines.append("")
    header = f"{'status':6}  {'check':44} {'residual':>12} {'tolerance':>10}"
    if timings:
        header += f" {'ms':>9}"
    lines.append(header)
    lines.append("-" * len(header))
    for rec in report.sorted_records():
        status = "PASS" if rec.passed else "FAIL"
        res = "-" if rec.residual is None else f"{rec.residual:.3e}"
        row = f"{status:6}  {rec.check_id:44} {res:>12} {rec.tolerance:>10.1e}"
        if timings:
            row += f" {rec.wall_ms:>9.1f}"
        if rec.worst_case:
            row += f"  [{rec.worst_case}]"
        if rec.error:
            row += f"  !! {rec.error}"
        lines.append(row)
    lines.append("-" * len(header))
    n_pass = sum(1 for r in report.records if r.passed)
    lines.append(f"{n_pass}/{len(report.records)} checks passed")
    return "\n".join(lines) + "\n"


def emit_report(report: Report, format: str = "json", path: str | None = None,
                timings: bool = False) -> str:
    if format == "json":
        text = emit_json(report, timings)
    elif format == "text":
        text = emit_text(report, timings)
    else:
        raise ValueError(f"unknown report format {format!r}")
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(text)
        except OSError as exc:
            raise OSError(f"cannot write report to {path!r}: {exc}") from exc
    return text
