"""Per-configuration ranking of algorithms and wins / mean-rank summaries."""

from __future__ import annotations

import logging
from collections import defaultdict

from .records import ResultRecord

log = logging.getLogger(__name__)

TIE_TOL = 1e-12


def rank_configuration(scores: dict[str, float], tol: float = TIE_TOL) -> tuple[dict[str, float], set[str]]:
    """Ascending ranks with ties (gaps <= ``tol``) sharing their averaged rank.

    Returns ``(ranks, winners)``; every algorithm within ``tol`` of the best
    score is a winner.
    """
    order = sorted(scores, key=scores.get)
    ranks: dict[str, float] = {}
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and scores[order[j]] - scores[order[j - 1]] <= tol:
            j += 1
        shared = (i + 1 + j) / 2.0  # mean of ranks i+1 .. j
        for name in order[i:j]:
            ranks[name] = shared
        i = j
    best = scores[order[0]]
    return ranks, {name for name, v in scores.items() if v - best <= tol}


def aggregate(
    records: list[ResultRecord],
    group_by=("dataset",),
    metric: str = "mse",
    algorithms=None,
) -> dict[tuple, dict[str, dict[str, float]]]:
    """``{group: {algorithm: {"wins", "mean_rank", "configs"}}}``.

    A configuration is dataset x series x prediction length x seed x budget.
    Configurations missing any algorithm are dropped with a warning; a
    repeated record replaces the earlier one.
    """
    by_config: dict[tuple, dict[str, ResultRecord]] = defaultdict(dict)
    duplicates = 0
    for r in records:
        duplicates += r.algorithm in by_config[r.config_key()]
        by_config[r.config_key()][r.algorithm] = r
    if duplicates:
        log.warning("%d repeated records (same configuration and algorithm); the last of each is used", duplicates)
    names = sorted(set(algorithms) if algorithms is not None else {r.algorithm for r in records})

    totals: dict[tuple, dict[str, list[float]]] = defaultdict(lambda: {a: [0.0, 0.0, 0] for a in names})
    for key in sorted(by_config, key=repr):
        entries = by_config[key]
        if any(a not in entries for a in names):
            log.warning("configuration %s lacks some algorithms; excluded", key)
            continue
        ranks, winners = rank_configuration({a: entries[a].metric(metric) for a in names})
        first = entries[names[0]]
        group = tuple(getattr(first, g) for g in group_by)
        for a in names:
            acc = totals[group][a]
            acc[0] += a in winners
            acc[1] += ranks[a]
            acc[2] += 1
    return {
        group: {a: {"wins": int(w), "mean_rank": s / n, "configs": n} for a, (w, s, n) in per_alg.items()}
        for group, per_alg in totals.items()
    }
