"""Text rendering and comparison of JSON reports."""
import math
from typing import Any, Dict, List, Tuple

# run-dependent, never compared
EXCLUDED_KEYS = ("timestamp", "wall_time")


def flatten(data: Any, prefix: str = "") -> Dict[str, Any]:
    """Leaf values keyed by their dotted path; list items are indexed."""
    out: Dict[str, Any] = {}
    if isinstance(data, dict):
        for key, value in data.items():
            if key in EXCLUDED_KEYS:
                continue
            out.update(flatten(value, f"{prefix}.{key}" if prefix else str(key)))
    elif isinstance(data, list):
        for i, value in enumerate(data):
            out.update(flatten(value, f"{prefix}[{i}]"))
    else:
        out[prefix] = data
    return out


def _differs(a: Any, b: Any, tolerance: float) -> bool:
    if isinstance(a, bool) or isinstance(b, bool) or not (isinstance(a, (int, float)) and isinstance(b, (int, float))):
        return a != b
    if math.isnan(a) and math.isnan(b):
        return False
    if tolerance == 0.0:
        return a != b
    return not math.isclose(a, b, rel_tol=tolerance, abs_tol=tolerance)


def compare_reports(a: Dict[str, Any], b: Dict[str, Any], tolerance: float = 0.0) -> List[str]:
    """Paths whose values differ; the timestamp and wall times are never compared."""
    fa, fb = flatten(a), flatten(b)
    diffs = [key for key in sorted(set(fa) | set(fb))
             if key not in fa or key not in fb or _differs(fa[key], fb[key], tolerance)]
    return diffs


def max_scalar_difference(a: Dict[str, Any], b: Dict[str, Any]) -> float:
    fa, fb = flatten(a), flatten(b)
    worst = 0.0
    for key in set(fa) & set(fb):
        x, y = fa[key], fb[key]
        if isinstance(x, float) and isinstance(y, float) and math.isfinite(x) and math.isfinite(y):
            worst = max(worst, abs(x - y))
    return worst


def _format(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def render_checks(checks: List[Dict[str, Any]]) -> str:
    rows: List[Tuple[str, ...]] = [("check", "measured", "tolerance", "result")]
    for c in checks:
        rows.append((c["name"], _format(c["measured"]), _format(c["tolerance"]),
                     "PASS" if c["passed"] else "FAIL"))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def render_table(report: Dict[str, Any]) -> str:
    """Checks as a table when present, otherwise every leaf as key/value lines."""
    if "checks" in report:
        table = render_checks(report["checks"])
        status = "PASSED" if report.get("passed") else "FAILED"
        return f"{table}\n\n{status}"
    flat = flatten(report)
    width = max((len(k) for k in flat), default=0)
    return "\n".join(f"{key.ljust(width)}  {_format(value)}" for key, value in flat.items())
