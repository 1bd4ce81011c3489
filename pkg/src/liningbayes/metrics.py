"""Agreement and uncertainty scores of an inverted pressure curve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "IA_THRESHOLD",
    "N_MONITORING",
    "MetricReport",
    "monitoring_angles",
    "index_of_agreement",
    "rmse",
    "std_factor",
    "total_variation",
    "report",
]

IA_THRESHOLD = 0.7
N_MONITORING = 100


def monitoring_angles(count: int = N_MONITORING) -> np.ndarray:
    """Evenly spaced monitoring angles over [0, 360) degrees, first at 0."""
    return np.arange(count) * (360.0 / count)


def _pair(inverted, actual, min_len):
    a = np.asarray(inverted, dtype=float).ravel()
    b = np.asarray(actual, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < min_len:
        raise ValueError(f"need at least {min_len} points")
    return a, b


def index_of_agreement(inverted, actual, return_flag: bool = False):
    """Willmott's index of agreement in [0, 1].

    When the denominator vanishes (both series constant and equal) the index
    is defined as 1; with ``return_flag`` a second value reports that case.
    """
    qi, qa = _pair(inverted, actual, 2)
    mean_a = qa.mean()
    num = np.sum((qi - qa) ** 2)
    den = np.sum((np.abs(qi - mean_a) + np.abs(qa - mean_a)) ** 2)
    degenerate = den == 0
    # num <= den holds exactly; clipping removes round-off just outside [0, 1]
    ia = 1.0 if degenerate else float(np.clip(1.0 - num / den, 0.0, 1.0))
    return (ia, degenerate) if return_flag else ia


def rmse(inverted, actual) -> float:
    qi, qa = _pair(inverted, actual, 1)
    return float(np.sqrt(np.mean((qi - qa) ** 2)))


def std_factor(summary) -> float:
    """Mean posterior std over the monitoring angles of a summary (or array)."""
    std = summary.std if hasattr(summary, "quantiles") else summary
    std = np.asarray(std, dtype=float)
    if std.size == 0:
        raise ValueError("empty summary")
    return float(std.mean())


def total_variation(values) -> float:
    """Sum of absolute jumps around the closed ring."""
    v = np.asarray(values, dtype=float)
    return float(np.abs(np.diff(np.r_[v, v[:1]])).sum())


@dataclass(frozen=True)
class MetricReport:
    IA: float
    RMSE: float
    Std: float
    M_p: int
    threshold: float = IA_THRESHOLD

    @property
    def passed(self) -> bool:
        return self.IA >= self.threshold

    def as_dict(self) -> dict:
        return {
            "IA": self.IA,
            "RMSE": self.RMSE,
            "Std": self.Std,
            "M_p": self.M_p,
            "threshold": self.threshold,
            "passed": self.passed,
        }


def report(inverted, actual, std=None) -> MetricReport:
    """Score an inverted curve against the truth at the same angles."""
    qi, qa = _pair(inverted, actual, 2)
    s = std_factor(std) if std is not None else float("nan")
    return MetricReport(IA=index_of_agreement(qi, qa), RMSE=rmse(qi, qa), Std=s, M_p=qi.size)
