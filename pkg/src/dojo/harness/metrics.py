"""Evaluation metrics: interquartile mean, crash and completion rates."""

from __future__ import annotations

from dataclasses import dataclass

from dojo.env import REASONS


@dataclass(frozen=True)
class RunRecord:
    seed: int
    total_return: float
    outcome: str
    steps: int
    completion: float  # fraction of the route covered, in [0, 1]

    def __post_init__(self):
        if self.outcome not in REASONS or self.outcome == "running":
            raise ValueError(f"outcome must be a termination reason, got {self.outcome!r}")


@dataclass(frozen=True)
class MetricsReport:
    iqm_return: float
    crash_rate: float  # percent
    completion_rate: float  # percent
    n: int
    outcomes: dict

    def lines(self) -> list[str]:
        out = [
            f"n                {self.n}",
            f"iqm return       {self.iqm_return:.3f}",
            f"completion rate  {self.completion_rate:.2f}",
            f"crash rate       {self.crash_rate:.2f}",
        ]
        for reason in sorted(self.outcomes):
            out.append(f"  {reason:<14} {self.outcomes[reason]}")
        return out


def iqm(values) -> float:
    """Mean of the middle 50%: sort, drop floor(n/4) from each end."""
    vals = sorted(float(v) for v in values)
    if not vals:
        raise ValueError("iqm of an empty sequence")
    trim = len(vals) // 4
    kept = vals[trim : len(vals) - trim]
    return sum(kept) / len(kept)


def rates(runs) -> MetricsReport:
    runs = list(runs)
    if not runs:
        raise ValueError("rates of an empty run set")
    outcomes: dict[str, int] = {}
    for r in runs:
        outcomes[r.outcome] = outcomes.get(r.outcome, 0) + 1
    n = len(runs)
    return MetricsReport(
        iqm_return=iqm(r.total_return for r in runs),
        crash_rate=100.0 * outcomes.get("crash", 0) / n,
        completion_rate=100.0 * outcomes.get("goal", 0) / n,
        n=n,
        outcomes=outcomes,
    )
