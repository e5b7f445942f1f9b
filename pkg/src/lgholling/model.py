"""System specification: the eleven time-varying coefficients, validation,
and the right-hand side of the delayed predator-prey equations

    u'(t) = (a1(t) - b(t) u(t) - c1(t) v(t-tau1(t)) / (u(t-sigma1(t)) + k1(t))) u(t)
    v'(t) = (a2(t) - c2(t) v(t-tau2(t)) / (u(t-sigma2(t)) + k2(t))) v(t)

The coefficient written b and b1 elsewhere is one and the same function here.
A ModelSpec is treated as immutable once validated; eval_rhs is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .expr import BoundsEstimate, CoefficientExpr, evaluate, evaluate_array, parse_expression, _scan

__all__ = [
    "SYMBOLS",
    "DELAY_SYMBOLS",
    "ModelSpec",
    "InitialHistory",
    "ValidationReport",
    "validate_model",
    "eval_rhs",
]

SYMBOLS = ("a1", "a2", "b", "c1", "c2", "k1", "k2", "tau1", "tau2", "sigma1", "sigma2")
DELAY_SYMBOLS = ("tau1", "tau2", "sigma1", "sigma2")


@dataclass
class ModelSpec:
    a1: CoefficientExpr
    a2: CoefficientExpr
    b: CoefficientExpr
    c1: CoefficientExpr
    c2: CoefficientExpr
    k1: CoefficientExpr
    k2: CoefficientExpr
    tau1: CoefficientExpr
    tau2: CoefficientExpr
    sigma1: CoefficientExpr
    sigma2: CoefficientExpr
    # filled in by validate_model; treat the spec as frozen afterwards
    bounds: dict[str, BoundsEstimate] = field(default_factory=dict)
    max_lag_r: float | None = None

    @classmethod
    def from_strings(cls, coefficients: dict[str, str]) -> "ModelSpec":
        missing = [s for s in SYMBOLS if s not in coefficients]
        if missing:
            raise ValidationError(f"missing coefficients: {', '.join(missing)}")
        return cls(**{s: parse_expression(coefficients[s]) for s in SYMBOLS})

    def expr(self, symbol: str) -> CoefficientExpr:
        return getattr(self, symbol)


@dataclass
class InitialHistory:
    """Initial data on [-r, 0]; each component is a positive constant or an
    expression in the shifted time variable."""

    phi1: float | CoefficientExpr
    phi2: float | CoefficientExpr

    def value1(self, theta: float) -> float:
        if isinstance(self.phi1, CoefficientExpr):
            return evaluate(self.phi1, theta)
        return self.phi1

    def value2(self, theta: float) -> float:
        if isinstance(self.phi2, CoefficientExpr):
            return evaluate(self.phi2, theta)
        return self.phi2

    def validate(self, r: float, samples: int = 256) -> None:
        if self.value1(0.0) <= 0.0 or self.value2(0.0) <= 0.0:
            raise ValidationError("history must satisfy phi1(0) > 0 and phi2(0) > 0")
        thetas = np.linspace(-r, 0.0, samples) if r > 0 else np.array([0.0])
        for name, phi in (("phi1", self.phi1), ("phi2", self.phi2)):
            if isinstance(phi, CoefficientExpr):
                vals = evaluate_array(phi, thetas)
                if (vals < 0.0).any():
                    bad = float(thetas[vals < 0.0][0])
                    raise ValidationError(f"history {name} negative at theta={bad}")
            elif phi < 0.0:
                raise ValidationError(f"history {name} negative")


@dataclass
class ValidationReport:
    ok: bool
    bounds: dict[str, BoundsEstimate]
    max_lag_r: float
    failures: list[tuple[str, float, float]]  # (symbol, t, value)

    def describe(self) -> str:
        lines = []
        for sym, est in self.bounds.items():
            lines.append(f"{sym}: inf={est.inf_value:.6g} sup={est.sup_value:.6g}")
        for sym, t, value in self.failures:
            lines.append(f"FAIL {sym}: value {value:.6g} <= 0 at t={t:.6g}")
        lines.append(f"max lag r = {self.max_lag_r:.6g}")
        return "\n".join(lines)


def validate_model(spec: ModelSpec, horizon: float = 1000.0, samples: int = 100_000) -> ValidationReport:
    """Check positivity of all eleven coefficients on a sampling grid and
    estimate their sup/inf; computes the maximal lag r.

    On success the estimates are attached to the spec (bounds, max_lag_r).
    """
    bounds: dict[str, BoundsEstimate] = {}
    failures: list[tuple[str, float, float]] = []
    for sym in SYMBOLS:
        est, raw_min, t_min = _scan(spec.expr(sym), horizon, samples)
        bounds[sym] = est
        if raw_min <= 0.0:
            failures.append((sym, t_min, raw_min))
    r = max(bounds[s].sup_value for s in DELAY_SYMBOLS)
    report = ValidationReport(ok=not failures, bounds=bounds, max_lag_r=r, failures=failures)
    if report.ok:
        spec.bounds = bounds
        spec.max_lag_r = r
    return report


def eval_rhs(
    spec: ModelSpec,
    t: float,
    u: float,
    v: float,
    u_sigma1: float,
    u_sigma2: float,
    v_tau1: float,
    v_tau2: float,
) -> tuple[float, float]:
    """Right-hand side given current state and delayed state values.

    The axes are invariant: u = 0 forces du = 0 and v = 0 forces dv = 0.
    """
    a1 = evaluate(spec.a1, t)
    a2 = evaluate(spec.a2, t)
    b = evaluate(spec.b, t)
    c1 = evaluate(spec.c1, t)
    c2 = evaluate(spec.c2, t)
    k1 = evaluate(spec.k1, t)
    k2 = evaluate(spec.k2, t)
    du = (a1 - b * u - c1 * v_tau1 / (u_sigma1 + k1)) * u
    dv = (a2 - c2 * v_tau2 / (u_sigma2 + k2)) * v
    return du, dv
