"""Qualitative checks on power sweeps: bell shape and relative format gains.

A point counts as measured only when it carries at least ``min_errors``
errors; error-free points and BER upper bounds are reported, never used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import FormatKind
from .montecarlo import SweepResult


@dataclass(frozen=True)
class TrendVerdict:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def measured(sweep: SweepResult, min_errors: int) -> np.ndarray:
    """Mask of points whose Q^2 rests on at least ``min_errors`` errors."""
    return np.array([r.bit_errors >= min_errors and not r.flagged for _, r in sweep.points])


def _fmt_points(x: np.ndarray, y: np.ndarray) -> str:
    return ", ".join(f"{a:g}:{b:.2f}" for a, b in zip(x, y))


def bell_curve(sweep: SweepResult, min_errors: int, tol_db: float) -> TrendVerdict:
    """Interior Q^2 maximum exceeding both end points by more than ``tol_db``."""
    name = f"{sweep.format.value} bell curve"
    ok = measured(sweep, min_errors)
    x, q = sweep.values(), sweep.q2()
    if not ok.all():
        short = ", ".join(f"{v:g}" for v in x[~ok])
        return TrendVerdict(name, False, f"fewer than {min_errors} errors at {short}")
    i = int(np.argmax(q))
    interior = 0 < i < len(q) - 1
    margin = min(q[i] - q[0], q[i] - q[-1])
    passed = interior and margin > tol_db
    return TrendVerdict(name, passed, f"peak {q[i]:.2f} dB at {x[i]:g}, margin {margin:.2f} dB")


def gain(a: SweepResult, b: SweepResult, min_errors: int) -> tuple[np.ndarray, np.ndarray]:
    """Q^2(a) - Q^2(b) over the axis values measured in both sweeps."""
    if not np.array_equal(a.values(), b.values()):
        raise ValueError("sweeps must share the axis")
    ok = measured(a, min_errors) & measured(b, min_errors)
    return a.values()[ok], a.q2()[ok] - b.q2()[ok]


def optimum(sweep: SweepResult) -> float:
    """Axis value of the largest finite Q^2 (error-free points count as largest)."""
    q = np.where(np.isnan(sweep.q2()), -np.inf, sweep.q2())
    return float(sweep.values()[int(np.argmax(q))])


def rising_gain(a: SweepResult, b: SweepResult, min_errors: int, tol_db: float) -> TrendVerdict:
    """Gain a - b non-decreasing (within ``tol_db`` per step) above b's optimum, with net rise."""
    name = f"{a.format.value} - {b.format.value} rises above optimum"
    x, g = gain(a, b, min_errors)
    above = x > max(optimum(a), optimum(b))
    x, g = x[above], g[above]
    if len(g) < 2:
        return TrendVerdict(name, False, f"only {len(g)} measured point(s) above the optimum")
    steps_ok = bool(np.all(np.diff(g) >= -tol_db))
    net = g[-1] - g[0]
    return TrendVerdict(name, steps_ok and net > tol_db, f"gain {_fmt_points(x, g)}; net {net:+.2f} dB")


def linear_vs_nonlinear_gain(
    a: SweepResult, b: SweepResult, min_errors: int, tol_db: float
) -> TrendVerdict:
    """Gain a - b positive at the lowest power and larger (by ``tol_db``) at the highest."""
    name = f"{a.format.value} - {b.format.value} positive, larger when nonlinear"
    x, g = gain(a, b, min_errors)
    if len(g) < 2 or x[0] != a.values()[0] or x[-1] != a.values()[-1]:
        return TrendVerdict(name, False, f"end points not both measured ({_fmt_points(x, g)})")
    passed = g[0] > 0 and g[-1] - g[0] > tol_db
    return TrendVerdict(name, passed, f"gain {_fmt_points(x, g)}")


def power_trends(
    sweeps: dict[FormatKind, SweepResult], min_errors: int = 400, tol_db: float = 0.15
) -> list[TrendVerdict]:
    out = [bell_curve(s, min_errors, tol_db) for s in sweeps.values()]
    k = FormatKind
    if k.PB_5B8D in sweeps and k.PDM_BPSK in sweeps:
        out.append(rising_gain(sweeps[k.PB_5B8D], sweeps[k.PDM_BPSK], min_errors, tol_db))
    if k.PA_7B8D in sweeps and k.PDM_QPSK in sweeps:
        out.append(linear_vs_nonlinear_gain(sweeps[k.PA_7B8D], sweeps[k.PDM_QPSK], min_errors, tol_db))
    return out
