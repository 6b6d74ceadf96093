"""Cross-run comparison of identified function sets.

Runs are compared by which component supports they found, ignoring the
node counts; complexity is aggregated separately. The medoid run (the
one closest to all others in Jaccard distance) serves as the ensemble's
representative model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import PradaNetError
from .extraction import AdditiveComponent


@dataclass(frozen=True)
class FunctionSet:
    """Supports identified in one run, with node counts per support."""

    supports: frozenset
    complexity: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_components(cls, components: list[AdditiveComponent]) -> "FunctionSet":
        supports = frozenset(c.support for c in components)
        complexity = {c.support: c.complexity for c in components}
        return cls(supports=supports, complexity=complexity)

    @classmethod
    def from_supports(cls, supports, complexity=None) -> "FunctionSet":
        sup = frozenset(tuple(s) for s in supports)
        return cls(supports=sup, complexity=dict(complexity or {}))


def jaccard_distance(a: FunctionSet, b: FunctionSet) -> float:
    """1 - |intersection| / |union|; two empty sets have distance 0."""
    union = a.supports | b.supports
    if not union:
        return 0.0
    return 1.0 - len(a.supports & b.supports) / len(union)


def medoid_model(runs: list[FunctionSet]) -> int:
    """Index of the run minimizing total Jaccard distance to all runs;
    ties broken by the lowest index."""
    if not runs:
        raise PradaNetError("need at least one run")
    sums = [
        sum(jaccard_distance(runs[i], runs[j]) for j in range(len(runs)))
        for i in range(len(runs))
    ]
    return int(np.argmin(sums))


def mean_similarity_to_medoid(runs: list[FunctionSet]) -> float:
    """Average Jaccard similarity between the medoid and the other runs.

    The medoid itself is excluded from the average.
    """
    if len(runs) < 2:
        raise PradaNetError("need at least two runs")
    m = medoid_model(runs)
    sims = [
        1.0 - jaccard_distance(runs[m], runs[j]) for j in range(len(runs)) if j != m
    ]
    return float(np.mean(sims))


@dataclass(frozen=True)
class EnsembleSummary:
    """Per-support presence fraction and mean complexity across runs."""

    presence: dict
    mean_complexity: dict
    n_runs: int


def summarize_ensemble(runs: list[FunctionSet]) -> EnsembleSummary:
    """Presence (fraction of runs containing a support) and average
    complexity over the runs that contain it."""
    if not runs:
        raise PradaNetError("need at least one run")
    counts: dict = {}
    complexity_sums: dict = {}
    for run in runs:
        for sup in run.supports:
            counts[sup] = counts.get(sup, 0) + 1
            complexity_sums[sup] = complexity_sums.get(sup, 0.0) + run.complexity.get(
                sup, 1
            )
    n = len(runs)
    presence = {sup: counts[sup] / n for sup in counts}
    mean_complexity = {sup: complexity_sums[sup] / counts[sup] for sup in counts}
    return EnsembleSummary(presence=presence, mean_complexity=mean_complexity, n_runs=n)


def support_label(support, column_names=None) -> str:
    if column_names is None:
        names = [f"x{d + 1}" for d in support]
    else:
        names = [column_names[d] for d in support]
    return "f(" + ",".join(names) + ")"


def write_ensemble_csv(summary: EnsembleSummary, path, column_names=None) -> None:
    """Presence table sorted by presence descending (support order on ties)."""
    rows = sorted(
        summary.presence,
        key=lambda sup: (-summary.presence[sup], len(sup), sup),
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["support", "presence", "mean_complexity"])
        for sup in rows:
            writer.writerow(
                [
                    support_label(sup, column_names),
                    repr(float(summary.presence[sup])),
                    repr(float(summary.mean_complexity[sup])),
                ]
            )
