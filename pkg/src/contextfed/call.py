"""Context-aware language learning: per-context linear heads plus ensembling.

Text is partitioned by (source, context label); each partition trains its
own head on its own samples. Predictions combine member scores either by
uniform averaging (E_A) or by a trained weight vector W constrained to the
probability simplex (E_E), so the combined output is always a convex
combination of member scores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .context import (
    KEYBOARD_LABELS,
    SPEECH_LABELS,
    ContextLabel,
    UserProfile,
    assign_contexts,
    local_day_index,
)
from .embed import chunk_tokens, pool_max
from .model import (
    CLASSIFICATION,
    LinearModel,
    TrainConfig,
    predict_logit,
    sgd_epoch,
    sigmoid,
    zero_model,
)
from .seeding import derive_seed, shuffled_indices

MODE_AVERAGE = "E_A"
MODE_WEIGHTED = "E_E"

FULL_POOL = "full_pool"
SINGLE = "single"

PER_DAY = "per_day"
PER_PERIOD = "per_period"

MemberKey = tuple[str, ContextLabel]


def member_keys(sources: set[str] | frozenset[str]) -> list[MemberKey]:
    """Canonical member ordering for a source set."""
    unknown = set(sources) - {"speech", "keyboard"}
    if unknown:
        raise ValueError(f"unknown sources: {sorted(unknown)}")
    if not sources:
        raise ValueError("at least one source required")
    keys: list[MemberKey] = []
    for source in sorted(sources):
        labels = KEYBOARD_LABELS if source == "keyboard" else SPEECH_LABELS
        keys.extend((source, label) for label in labels)
    return keys


def count_members(sources: set[str] | frozenset[str]) -> int:
    """6 for speech only, 8 for keyboard only, 14 for both."""
    return len(member_keys(sources))


@dataclass(frozen=True)
class ContextSample:
    member_key: MemberKey
    x: np.ndarray
    label: float
    user_id: str
    day_index: int


@dataclass(frozen=True)
class EnsembleModel:
    member_order: tuple[MemberKey, ...]
    members: dict[MemberKey, LinearModel]
    weights: np.ndarray  # ensemble weights W, aligned with member_order
    mode: str
    task: str

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        if self.mode not in (MODE_AVERAGE, MODE_WEIGHTED):
            raise ValueError(f"unknown ensemble mode: {self.mode!r}")
        if self.weights.shape[0] != len(self.member_order):
            raise ValueError("W length must match member count")

    @property
    def n_members(self) -> int:
        return len(self.member_order)

    @property
    def dim(self) -> int:
        return self.members[self.member_order[0]].dim

    def effective_weights(self) -> np.ndarray:
        if self.mode == MODE_AVERAGE:
            return np.full(self.n_members, 1.0 / self.n_members)
        return self.weights

    def flatten(self) -> np.ndarray:
        """Member parameters in canonical order, then W."""
        parts = [self.members[key].flatten() for key in self.member_order]
        parts.append(self.weights)
        return np.concatenate(parts)

    def with_flat(self, params: np.ndarray) -> "EnsembleModel":
        params = np.asarray(params, dtype=np.float64)
        span = self.dim + 1
        expected = span * self.n_members + self.n_members
        if params.shape[0] != expected:
            raise ValueError(f"expected {expected} parameters, got {params.shape[0]}")
        members = {}
        for i, key in enumerate(self.member_order):
            members[key] = self.members[key].with_flat(params[i * span : (i + 1) * span])
        weights = params[span * self.n_members :].copy()
        return EnsembleModel(member_order=self.member_order, members=members,
                             weights=weights, mode=self.mode, task=self.task)


def new_ensemble(sources: set[str], dim: int, task: str, mode: str) -> EnsembleModel:
    """Fresh ensemble with zero members and uniform W = 1/N."""
    order = tuple(member_keys(sources))
    members = {key: zero_model(dim, task) for key in order}
    weights = np.full(len(order), 1.0 / len(order))
    return EnsembleModel(member_order=order, members=members, weights=weights,
                         mode=mode, task=task)


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w : w_i >= 0, sum w = 1}."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u)
    indices = np.arange(1, v.shape[0] + 1)
    feasible = u - (cumulative - 1.0) / indices > 0
    rho = int(np.nonzero(feasible)[0][-1]) + 1
    theta = (cumulative[rho - 1] - 1.0) / rho
    return np.maximum(v - theta, 0.0)


def group_sample_id(user_id: str, period: int, source: str,
                    label: ContextLabel, chunk_idx: int) -> str:
    """Stable id for one chunk of one (user, period, source, context) group.

    File-backed embedding stores are keyed by these ids, so the exporter and
    the training pipeline agree on which vector belongs to which chunk.
    """
    return f"{user_id}|{period}|{source}|{label.value}|{chunk_idx}"


def build_context_datasets(
    events,
    profile: UserProfile,
    granularity: str,
    mode: str,
    embed_fn,
    chunk_size: int = 512,
    label_fn=None,
) -> list[ContextSample]:
    """Partition events into per-(user, period, source, context) samples.

    Tokens of each group concatenate in timestamp order and are chunked;
    `full_pool` max-pools chunk embeddings into one sample, `single` emits
    one sample per chunk. An event contributes to every context label it
    carries. `label_fn(user_id, period) -> float | None` supplies labels
    (None skips the group); omit it for unlabeled structural use.

    `embed_fn(tokens, sample_id)` maps one chunk to its vector.
    """
    if granularity not in (PER_DAY, PER_PERIOD):
        raise ValueError(f"unknown granularity: {granularity!r}")
    if mode not in (FULL_POOL, SINGLE):
        raise ValueError(f"unknown mode: {mode!r}")

    groups: dict[tuple[str, int, str, ContextLabel], list] = {}
    for event in events:
        period = (
            local_day_index(event.timestamp, profile.utc_offset_minutes)
            if granularity == PER_DAY
            else 0
        )
        for label in assign_contexts(event, profile):
            key = (event.user_id, period, event.source, label)
            groups.setdefault(key, []).append(event)

    samples: list[ContextSample] = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3].value)):
        user_id, period, source, label = key
        if label_fn is not None:
            target = label_fn(user_id, period)
            if target is None:
                continue
        else:
            target = 0.0
        tokens: list[str] = []
        for event in sorted(groups[key], key=lambda e: e.timestamp):
            tokens.extend(event.tokens)
        chunks = chunk_tokens(tokens, chunk_size)
        vectors = [
            embed_fn(chunk, group_sample_id(user_id, period, source, label, i))
            for i, chunk in enumerate(chunks)
        ]
        if not vectors:
            continue
        member = (source, label)
        if mode == FULL_POOL:
            samples.append(ContextSample(member_key=member, x=pool_max(vectors),
                                         label=float(target), user_id=user_id,
                                         day_index=period))
        else:
            samples.extend(
                ContextSample(member_key=member, x=vec, label=float(target),
                              user_id=user_id, day_index=period)
                for vec in vectors
            )
    return samples


def _member_score(model: LinearModel, mean_logit: float) -> float:
    if model.task == CLASSIFICATION:
        return sigmoid(float(mean_logit))
    return float(mean_logit)


def ensemble_predict(ens: EnsembleModel, per_member_inputs: dict[MemberKey, np.ndarray | None]) -> float:
    """Weighted sum of member scores; absent members score at the zero vector."""
    present = [x for x in per_member_inputs.values() if x is not None]
    if not present:
        raise ValueError("no context data")
    zero = np.zeros(ens.dim)
    weights = ens.effective_weights()
    total = 0.0
    for weight, key in zip(weights, ens.member_order):
        x = per_member_inputs.get(key)
        logit = predict_logit(ens.members[key], zero if x is None else x)
        total += weight * _member_score(ens.members[key], logit)
    return total


def member_period_scores(
    ens: EnsembleModel, samples: list[ContextSample]
) -> list[tuple[str, int, np.ndarray, float]]:
    """Per-(user, period) member-score vectors.

    A member with several samples in a period (single mode) contributes the
    score of its mean logit; a member with none contributes its bias-only
    score. Returns (user_id, period, scores, label) in deterministic order.
    """
    periods: dict[tuple[str, int], dict[MemberKey, list[float]]] = {}
    labels: dict[tuple[str, int], float] = {}
    for sample in samples:
        pkey = (sample.user_id, sample.day_index)
        periods.setdefault(pkey, {}).setdefault(sample.member_key, []).append(
            predict_logit(ens.members[sample.member_key], sample.x)
        )
        labels[pkey] = sample.label
    rows = []
    for pkey in sorted(periods):
        by_member = periods[pkey]
        scores = np.array(
            [
                _member_score(
                    ens.members[key],
                    sum(by_member[key]) / len(by_member[key]) if key in by_member
                    else ens.members[key].bias,
                )
                for key in ens.member_order
            ]
        )
        rows.append((pkey[0], pkey[1], scores, labels[pkey]))
    return rows


def _ensemble_grad(weights: np.ndarray, score_rows: list[np.ndarray],
                   targets: np.ndarray, task: str) -> np.ndarray:
    scores = np.stack(score_rows)
    combined = scores @ weights
    if task == CLASSIFICATION:
        eps = 1e-12
        combined = np.clip(combined, eps, 1.0 - eps)
        dloss = (combined - targets) / (combined * (1.0 - combined))
    else:
        dloss = 2.0 * (combined - targets / 100.0)
    return scores.T @ dloss / len(score_rows)


def train_ensemble_weights(
    ens: EnsembleModel, samples: list[ContextSample], cfg: TrainConfig
) -> np.ndarray:
    """SGD on W over per-period member-score vectors, members held fixed.

    Same task loss as the members, applied to the combined score; W is
    projected back onto the simplex after every batch.
    """
    rows = member_period_scores(ens, samples)
    if not rows:
        return ens.weights.copy()
    score_rows = [row[2] for row in rows]
    targets = np.array([row[3] for row in rows])
    weights = ens.weights.copy()
    for epoch in range(cfg.epochs):
        seed = derive_seed(cfg.rng_seed, "ensemble-w", epoch)
        order = shuffled_indices(len(rows), seed)
        for start in range(0, len(order), cfg.batch_size):
            chosen = order[start : start + cfg.batch_size]
            g = _ensemble_grad(weights, [score_rows[i] for i in chosen],
                               targets[chosen], ens.task)
            weights = project_to_simplex(weights - cfg.learning_rate * g)
    return weights


def train_call_local(
    ens: EnsembleModel, samples: list[ContextSample], cfg: TrainConfig
) -> EnsembleModel:
    """Local training pass: each member on its own partition, then W (E_E).

    Member updates are isolated: each member shuffles with its own derived
    seed and only sees its own samples, so members train independently.
    """
    by_member: dict[MemberKey, list[tuple[np.ndarray, float]]] = {}
    for sample in samples:
        by_member.setdefault(sample.member_key, []).append((sample.x, sample.label))

    members = dict(ens.members)
    for key in ens.member_order:
        member_samples = by_member.get(key)
        if not member_samples:
            continue
        model = members[key]
        for epoch in range(cfg.epochs):
            seed = derive_seed(cfg.rng_seed, "member", key[0], key[1].value, epoch)
            model = sgd_epoch(model, member_samples, cfg, seed=seed)
        members[key] = model

    trained = EnsembleModel(member_order=ens.member_order, members=members,
                            weights=ens.weights.copy(), mode=ens.mode, task=ens.task)
    if ens.mode == MODE_WEIGHTED and cfg.epochs > 0:
        weights = train_ensemble_weights(trained, samples, cfg)
        trained = EnsembleModel(member_order=ens.member_order, members=members,
                                weights=weights, mode=ens.mode, task=ens.task)
    return trained


def save_ensemble(ens: EnsembleModel, path) -> None:
    payload = {
        "mode": ens.mode,
        "task": ens.task,
        "members": [
            {
                "source": key[0],
                "context": key[1].value,
                "bias": ens.members[key].bias,
                "weights": [float(w) for w in ens.members[key].weights],
            }
            for key in ens.member_order
        ],
        "ensemble_weights": [float(w) for w in ens.weights],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_ensemble(path) -> EnsembleModel:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    order = []
    members = {}
    for entry in obj["members"]:
        key = (entry["source"], ContextLabel(entry["context"]))
        order.append(key)
        members[key] = LinearModel(weights=np.asarray(entry["weights"], dtype=np.float64),
                                   bias=float(entry["bias"]), task=obj["task"])
    return EnsembleModel(member_order=tuple(order), members=members,
                         weights=np.asarray(obj["ensemble_weights"], dtype=np.float64),
                         mode=obj["mode"], task=obj["task"])
