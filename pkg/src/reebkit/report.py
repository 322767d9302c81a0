"""Structured verification results."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


def _clean(x):
    """Make ``x`` JSON-friendly with finite floats."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        x = x.item()
    if isinstance(x, float):
        if math.isnan(x):
            return None
        if math.isinf(x):
            return math.copysign(1e308, x)
        return x
    return x


@dataclass
class VerificationReport:
    """Outcome of one check.

    ``margin`` is the worst-case slack: for inequality checks the extreme
    value of the tested quantity (``> 0`` needed for strict positivity), for
    residual checks ``tol - max_residual``. ``witness_points`` hold the sample
    points where the worst value occurred.
    """

    verdict: str
    condition: str
    margin: float = 0.0
    residuals: dict[str, float] = field(default_factory=dict)
    witness_points: list[dict[str, float]] = field(default_factory=list)
    grid: dict[str, Any] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in (PASS, FAIL, INCONCLUSIVE):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if not math.isfinite(self.margin):
            self.margin = math.copysign(1e308, self.margin) if not math.isnan(self.margin) else 0.0
        self.margin = float(self.margin) + 0.0  # no negative zero in reports
        if self.verdict == FAIL and not self.witness_points:
            self.witness_points = [{}]

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict[str, Any]:
        return _clean(
            {
                "verdict": self.verdict,
                "condition": self.condition,
                "margin": self.margin,
                "residuals": self.residuals,
                "witness_points": self.witness_points,
                "grid": self.grid,
                "details": self.details,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def combine(condition: str, parts: dict[str, VerificationReport], **details) -> VerificationReport:
    """Composite report: pass iff every part passes."""
    verdicts = [p.verdict for p in parts.values()]
    if all(v == PASS for v in verdicts):
        verdict = PASS
    elif any(v == FAIL for v in verdicts):
        verdict = FAIL
    else:
        verdict = INCONCLUSIVE
    worst = min(parts.values(), key=lambda p: p.margin) if parts else None
    witnesses = []
    for p in parts.values():
        if p.verdict != PASS:
            witnesses.extend(p.witness_points)
    residuals = {f"{name}.{k}": v for name, p in parts.items() for k, v in p.residuals.items()}
    return VerificationReport(
        verdict=verdict,
        condition=condition,
        margin=worst.margin if worst is not None else 0.0,
        residuals=residuals,
        witness_points=witnesses,
        details={"stages": {name: p.to_dict() for name, p in parts.items()}, **details},
    )
