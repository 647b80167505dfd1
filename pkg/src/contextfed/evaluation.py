"""Tasks, metrics, and leave-one-user-out fold construction.

Depression is the single classification task (PHQ-9 >= 5 over the whole
study window); stress, anxiety, and mood are per-day regressions on a
0..100 scale. AUROC is computed from midranks, which equals the pairwise
probability P(score+ > score-) with ties counted half.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEPRESSION_THRESHOLD = 5

TASK_DEPRESSION = "depression"
REGRESSION_TASKS = ("stress", "anxiety", "mood")


@dataclass(frozen=True)
class TaskSpec:
    name: str
    kind: str  # "classification" | "regression"
    window: str  # "per_period" (whole study) | "per_day"


TASKS: dict[str, TaskSpec] = {
    TASK_DEPRESSION: TaskSpec(TASK_DEPRESSION, "classification", "per_period"),
    **{name: TaskSpec(name, "regression", "per_day") for name in REGRESSION_TASKS},
}


def binarize_phq9(score: int) -> int:
    """Mild depression iff PHQ-9 >= 5."""
    if not 0 <= score <= 27:
        raise ValueError(f"PHQ-9 score out of range: {score}")
    return 1 if score >= DEPRESSION_THRESHOLD else 0


def _midranks(values: list[float]) -> list[float]:
    """1-based ranks with tied values sharing the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + 1 + j + 1) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def auroc(scores: list[float], labels: list[int]) -> float:
    """Rank-based AUROC = P(score+ > score-) + 0.5 * P(tie)."""
    if len(scores) != len(labels):
        raise ValueError("scores and labels must have equal length")
    n_pos = sum(1 for y in labels if y == 1)
    n_neg = sum(1 for y in labels if y == 0)
    if n_pos + n_neg != len(labels):
        raise ValueError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise ValueError("undefined AUROC: labels contain a single class")
    ranks = _midranks(list(scores))
    rank_sum_pos = sum(r for r, y in zip(ranks, labels) if y == 1)
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def mae(preds: list[float], labels: list[float]) -> float:
    if len(preds) != len(labels):
        raise ValueError("preds and labels must have equal length")
    if not preds:
        raise ValueError("empty prediction list")
    return float(np.mean(np.abs(np.asarray(preds, dtype=np.float64)
                                - np.asarray(labels, dtype=np.float64))))


def louo_folds(user_ids: list[str]) -> list[tuple[str, list[str]]]:
    """One fold per user: (test_user, all other users)."""
    if len(user_ids) < 2:
        raise ValueError("leave-one-user-out needs at least 2 users")
    if len(set(user_ids)) != len(user_ids):
        raise ValueError("duplicate user ids")
    return [(u, [v for v in user_ids if v != u]) for u in user_ids]


def louo_with_validation(
    user_ids: list[str], v: int = 5
) -> list[tuple[str, list[str], list[str]]]:
    """(test, validation, train) folds with the next v users as validation,
    assigned cyclically."""
    if len(user_ids) < v + 2:
        raise ValueError(f"need at least {v + 2} users for v={v}")
    n = len(user_ids)
    folds = []
    for i, test in enumerate(user_ids):
        validation = [user_ids[(i + 1 + j) % n] for j in range(v)]
        train = [u for u in user_ids if u != test and u not in validation]
        folds.append((test, validation, train))
    return folds
