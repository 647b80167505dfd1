"""Experiment harness: method x task x seeds over leave-one-user-out folds.

Three methods reproduce the comparison structure of the source system:
a centralized baseline on the seven non-text daily features, federated
training of one pooled text model, and federated training of the
context-ensemble (the full pipeline). Datasets are assembled once per
experiment; seeds only vary training randomness, mirroring repeated runs
on fixed data.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import call as call_mod
from .call import (
    FULL_POOL,
    MODE_AVERAGE,
    MODE_WEIGHTED,
    SINGLE,
    ContextSample,
    EnsembleModel,
    build_context_datasets,
    new_ensemble,
)
from .context import local_day_index
from .embed import (
    chunk_tokens,
    hash_embed,
    load_embeddings,
    pool_max,
    tfidf_embed,
    tfidf_fit,
)
from .evaluation import TASKS, auroc, binarize_phq9, louo_folds, mae
from .fl import Client, FLConfig, ensemble_epoch, linear_epoch, run_rounds
from .model import (
    CLASSIFICATION,
    REGRESSION,
    TrainConfig,
    predict_logit,
    sigmoid,
    to_report_scale,
    train_model,
    zero_model,
)
from .seeding import derive_seed
from .synth import ClientDataset, CohortSpec, generate_cohort, load_cohort, nontext_features

METHOD_CL_NONTEXT = "cl_nontext"
METHOD_FL_TEXT = "fl_text"
METHOD_FEDTHERAPIST = "fedtherapist"
METHODS = (METHOD_CL_NONTEXT, METHOD_FL_TEXT, METHOD_FEDTHERAPIST)

DEFAULT_SEEDS = (17, 42, 1009)


class ConfigError(ValueError):
    """Raised for experiment configuration problems, before any training."""


@dataclass(frozen=True)
class ExperimentConfig:
    method: str
    task: str
    sources: tuple[str, ...] = ("keyboard",)
    ensemble_mode: str = MODE_WEIGHTED
    chunk_size: int = 512
    chunk_mode: str = FULL_POOL
    embedding_mode: str = "hash"  # hash | tfidf | file
    embedding_dim: int = 256
    embedding_seed: int = 7
    embedding_path: str | None = None
    tfidf_vocab_size: int = 5000
    learning_rate: float = 0.01
    batch_size: int = 10
    l1_lambda: float = 0.0
    rounds: int = 1000
    local_epochs: int = 1
    sampled_per_round: int | None = None
    cl_epochs: int = 1000
    seeds: tuple[int, ...] = DEFAULT_SEEDS

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.method != METHOD_CL_NONTEXT and not self.sources:
            raise ConfigError(f"method {self.method} requires nonempty sources")
        unknown = set(self.sources) - {"speech", "keyboard"}
        if unknown:
            raise ConfigError(f"unknown sources: {sorted(unknown)}")
        if self.ensemble_mode not in (MODE_AVERAGE, MODE_WEIGHTED):
            raise ConfigError(f"unknown ensemble_mode {self.ensemble_mode!r}")
        if self.chunk_mode not in (FULL_POOL, SINGLE):
            raise ConfigError(f"unknown chunk_mode {self.chunk_mode!r}")
        if self.embedding_mode not in ("hash", "tfidf", "file"):
            raise ConfigError(f"unknown embedding_mode {self.embedding_mode!r}")
        if self.embedding_mode == "file" and not self.embedding_path:
            raise ConfigError("embedding_mode 'file' requires embedding_path")
        if not self.seeds:
            raise ConfigError("at least one seed required")

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known - {"cohort", "output_dir"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {k: v for k, v in obj.items() if k in known}
        if "sources" in kwargs:
            kwargs["sources"] = tuple(kwargs["sources"])
        if "seeds" in kwargs:
            kwargs["seeds"] = tuple(int(s) for s in kwargs["seeds"])
        try:
            config = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        config.validate()
        return config

    def to_dict(self) -> dict:
        out = asdict(self)
        out["sources"] = list(self.sources)
        out["seeds"] = list(self.seeds)
        return out


@dataclass(frozen=True)
class PeriodSample:
    """One pooled-text sample: all selected sources of one (user, period)."""

    user_id: str
    period: int
    x: np.ndarray
    label: float


class FoldCenterer:
    """Per-fold mean-centering of feature vectors, one mean per group.

    Scores pooled across LOUO folds are only comparable if the model cannot
    read the training class balance out of shared feature mass, so each
    fold's vectors are centered on that fold's training mean (computed
    without the test user; precomputed per-user sums make this O(1) per
    fold). Groups are member keys for ensembles, a single key for pooled
    models.
    """

    def __init__(self):
        self.user_sums: dict[str, dict] = {}
        self.user_counts: dict[str, dict] = {}

    def observe(self, user_id: str, group, x: np.ndarray) -> None:
        sums = self.user_sums.setdefault(user_id, {})
        counts = self.user_counts.setdefault(user_id, {})
        if group in sums:
            sums[group] = sums[group] + x
            counts[group] += 1
        else:
            sums[group] = x.copy()
            counts[group] = 1

    def fold_means(self, train_users: list[str]) -> dict:
        totals: dict = {}
        counts: dict = {}
        for user in train_users:
            for group, vec in self.user_sums.get(user, {}).items():
                if group in totals:
                    totals[group] = totals[group] + vec
                    counts[group] += self.user_counts[user][group]
                else:
                    totals[group] = vec.copy()
                    counts[group] = self.user_counts[user][group]
        return {g: totals[g] / counts[g] for g in totals}


@dataclass
class Report:
    method: str
    task: str
    metric_name: str
    seeds: list[int]
    n_users: int
    n_folds: int
    per_seed: dict[int, dict] = field(default_factory=dict)
    aggregate: dict = field(default_factory=dict)

    def finalize(self) -> None:
        values = [self.per_seed[s]["metric"] for s in self.seeds]
        self.aggregate = {
            "mean": float(np.mean(values)),
            "std": float(np.std(values)),
        }
        members = [self.per_seed[s].get("per_member") for s in self.seeds]
        if all(m is not None for m in members):
            keys = sorted(members[0])
            self.aggregate["per_member_mean"] = {
                k: float(np.mean([m[k] for m in members])) for k in keys
            }

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "task": self.task,
            "metric": self.metric_name,
            "seeds": self.seeds,
            "n_users": self.n_users,
            "n_folds": self.n_folds,
            "per_seed": {str(s): self.per_seed[s] for s in self.seeds},
            "aggregate": self.aggregate,
        }

    def write(self, out_dir) -> None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
        with open(os.path.join(out_dir, "report.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seed", "scope", "name", "value"])
            for seed in self.seeds:
                entry = self.per_seed[seed]
                writer.writerow([seed, "overall", self.metric_name, entry["metric"]])
                for member, value in sorted((entry.get("per_member") or {}).items()):
                    writer.writerow([seed, "member", member, value])
            writer.writerow(["all", "aggregate", f"{self.metric_name}_mean",
                             self.aggregate["mean"]])
            writer.writerow(["all", "aggregate", f"{self.metric_name}_std",
                             self.aggregate["std"]])


def _pooled_source_tag(sources: tuple[str, ...]) -> str:
    return "+".join(sorted(sources))


def pooled_sample_id(user_id: str, period: int, sources: tuple[str, ...],
                     chunk_idx: int) -> str:
    return f"{user_id}|{period}|{_pooled_source_tag(sources)}|pooled|{chunk_idx}"


def _label_fn_for(task: str, cohort: list[ClientDataset]):
    by_user = {c.user_id: c for c in cohort}
    if TASKS[task].kind == "classification":
        def label_fn(user_id: str, period: int) -> float | None:
            return float(binarize_phq9(by_user[user_id].phq9))
    else:
        def label_fn(user_id: str, period: int) -> float | None:
            client = by_user[user_id]
            if 0 <= period < len(client.daily_labels):
                return float(client.daily_labels[period][task])
            return None
    return label_fn


def _pooled_chunks(client: ClientDataset, sources: tuple[str, ...],
                   granularity: str, chunk_size: int) -> dict[int, list[list[str]]]:
    """period -> token chunks of the user's pooled text in timestamp order."""
    events = sorted(
        (e for e in client.events if e.source in sources), key=lambda e: e.timestamp
    )
    by_period: dict[int, list[str]] = {}
    for event in events:
        period = (
            local_day_index(event.timestamp, client.profile.utc_offset_minutes)
            if granularity == call_mod.PER_DAY
            else 0
        )
        by_period.setdefault(period, []).extend(event.tokens)
    return {p: chunk_tokens(tokens, chunk_size) for p, tokens in by_period.items()}


def _make_embed_fn(config: ExperimentConfig, cohort: list[ClientDataset],
                   granularity: str):
    if config.embedding_mode == "hash":
        dim, seed = config.embedding_dim, config.embedding_seed
        return lambda tokens, sample_id: hash_embed(tokens, dim, seed)
    if config.embedding_mode == "tfidf":
        corpus = []
        for client in cohort:
            for chunks in _pooled_chunks(client, config.sources, granularity,
                                         config.chunk_size).values():
                corpus.extend(chunks)
        if not corpus:
            raise ConfigError("no text available to fit the TF-IDF vocabulary")
        vocab = tfidf_fit(corpus, vocab_size=config.tfidf_vocab_size)
        return lambda tokens, sample_id: tfidf_embed(tokens, vocab)
    store = load_embeddings(config.embedding_path)

    def from_file(tokens, sample_id):
        if sample_id not in store:
            raise ConfigError(
                f"embedding file {config.embedding_path} lacks sample_id {sample_id!r}"
            )
        return store.vectors[sample_id]

    return from_file


def _assemble_context_samples(cohort, config: ExperimentConfig, embed_fn,
                              label_fn, granularity: str) -> dict[str, list[ContextSample]]:
    per_user: dict[str, list[ContextSample]] = {}
    for client in cohort:
        events = [e for e in client.events if e.source in config.sources]
        samples = build_context_datasets(
            events, client.profile, granularity, config.chunk_mode, embed_fn,
            chunk_size=config.chunk_size, label_fn=label_fn,
        )
        per_user[client.user_id] = samples
    return per_user


def _assemble_pooled_samples(cohort, config: ExperimentConfig, embed_fn,
                             label_fn, granularity: str) -> dict[str, list[PeriodSample]]:
    per_user: dict[str, list[PeriodSample]] = {}
    for client in cohort:
        rows: list[PeriodSample] = []
        chunks_by_period = _pooled_chunks(client, config.sources, granularity,
                                          config.chunk_size)
        for period in sorted(chunks_by_period):
            label = label_fn(client.user_id, period)
            if label is None:
                continue
            vectors = [
                embed_fn(chunk, pooled_sample_id(client.user_id, period,
                                                 config.sources, i))
                for i, chunk in enumerate(chunks_by_period[period])
            ]
            if not vectors:
                continue
            if config.chunk_mode == FULL_POOL:
                rows.append(PeriodSample(client.user_id, period, pool_max(vectors),
                                         float(label)))
            else:
                rows.extend(
                    PeriodSample(client.user_id, period, vec, float(label))
                    for vec in vectors
                )
        per_user[client.user_id] = rows
    return per_user


def _assemble_nontext_samples(cohort, task: str) -> dict[str, list[PeriodSample]]:
    """Per-day feature vectors, or their mean over the window for depression."""
    per_user: dict[str, list[PeriodSample]] = {}
    spec = TASKS[task]
    for client in cohort:
        features = [nontext_features(client, day) for day in range(client.days)]
        if spec.window == "per_period":
            x = np.mean(np.stack(features), axis=0)
            label = float(binarize_phq9(client.phq9))
            per_user[client.user_id] = [PeriodSample(client.user_id, 0, x, label)]
        else:
            rows = []
            for day, x in enumerate(features):
                if day < len(client.daily_labels):
                    rows.append(PeriodSample(client.user_id, day, x,
                                             float(client.daily_labels[day][task])))
            per_user[client.user_id] = rows
    return per_user


def _standardize(train_rows: list[PeriodSample], rows: list[PeriodSample]):
    """Z-score features with training-fold statistics (zero-variance safe)."""
    stacked = np.stack([r.x for r in train_rows])
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std[std == 0.0] = 1.0
    return [PeriodSample(r.user_id, r.period, (r.x - mean) / std, r.label) for r in rows]


def _init_linear(template, run_seed: int):
    """Small random start so repeat seeds genuinely vary the run."""
    rng = np.random.default_rng(derive_seed(run_seed, "init"))
    return template.with_flat(rng.normal(0.0, 0.01, size=template.flatten().shape[0]))


def _init_ensemble(template: EnsembleModel, run_seed: int) -> EnsembleModel:
    """Randomize member parameters; W starts at the uniform 1/N."""
    rng = np.random.default_rng(derive_seed(run_seed, "init"))
    flat = template.flatten()
    member_span = (template.dim + 1) * template.n_members
    flat = flat.copy()
    flat[:member_span] = rng.normal(0.0, 0.01, size=member_span)
    return template.with_flat(flat)


def _report_value(task_kind: str, score: float) -> float:
    return score if task_kind == "classification" else to_report_scale(score)


def _metric(task_kind: str, preds: list[float], labels: list[float]) -> float:
    if task_kind == "classification":
        return auroc(preds, [int(y) for y in labels])
    return mae(preds, labels)


def run_experiment(config: ExperimentConfig,
                   cohort: list[ClientDataset] | None = None,
                   cohort_spec: CohortSpec | None = None,
                   cohort_path: str | None = None) -> Report:
    """Run the configured method over LOUO folds for each seed.

    Config problems (including missing context data and single-class
    depression labels) surface as ConfigError before any training starts.
    """
    config.validate()
    if cohort is None:
        if cohort_path is not None:
            cohort = load_cohort(cohort_path)
        else:
            cohort = generate_cohort(cohort_spec or CohortSpec())
    if len(cohort) < 2:
        raise ConfigError("need at least 2 users for leave-one-user-out")

    task = TASKS[config.task]
    task_model = CLASSIFICATION if task.kind == "classification" else REGRESSION
    granularity = task.window
    user_ids = [c.user_id for c in cohort]
    label_fn = _label_fn_for(config.task, cohort)

    if task.kind == "classification":
        classes = {binarize_phq9(c.phq9) for c in cohort}
        if len(classes) < 2:
            raise ConfigError("depression labels contain a single class; AUROC undefined")

    centerer = FoldCenterer()
    if config.method == METHOD_CL_NONTEXT:
        per_user_any = _assemble_nontext_samples(cohort, config.task)
    else:
        embed_fn = _make_embed_fn(config, cohort, granularity)
        if config.method == METHOD_FL_TEXT:
            per_user_any = _assemble_pooled_samples(cohort, config, embed_fn,
                                                    label_fn, granularity)
            for user, rows in per_user_any.items():
                for row in rows:
                    centerer.observe(user, "pooled", row.x)
        else:
            per_user_any = _assemble_context_samples(cohort, config, embed_fn,
                                                     label_fn, granularity)
            for user, rows in per_user_any.items():
                for row in rows:
                    centerer.observe(user, row.member_key, row.x)
        if all(not rows for rows in per_user_any.values()):
            raise ConfigError(
                f"no text data for sources {list(config.sources)}; nothing to train"
            )

    folds = louo_folds(user_ids)
    report = Report(method=config.method, task=config.task,
                    metric_name="auroc" if task.kind == "classification" else "mae",
                    seeds=list(config.seeds), n_users=len(user_ids),
                    n_folds=len(folds))

    for seed in config.seeds:
        preds: list[float] = []
        labels: list[float] = []
        predictions_log: list[list] = []
        skipped: list[str] = []
        member_scores: dict[str, list[float]] = {}
        member_labels: dict[str, list[float]] = {}

        for fold_index, (test_user, train_users) in enumerate(folds):
            run_seed = derive_seed(seed, "fold", fold_index)
            train_cfg = TrainConfig(
                learning_rate=config.learning_rate, batch_size=config.batch_size,
                l1_lambda=config.l1_lambda, epochs=1, rng_seed=run_seed,
            )

            if config.method == METHOD_CL_NONTEXT:
                fold_rows = _run_cl_fold(per_user_any, test_user, train_users,
                                         config, task_model, train_cfg, run_seed)
            elif config.method == METHOD_FL_TEXT:
                fold_rows = _run_fl_text_fold(per_user_any, test_user, train_users,
                                              config, task_model, train_cfg,
                                              run_seed, centerer)
            else:
                fold_rows = _run_fedtherapist_fold(
                    per_user_any, test_user, train_users, config, task_model,
                    train_cfg, run_seed, member_scores, member_labels, centerer,
                )
            if not fold_rows:
                skipped.append(test_user)
                continue
            for period, score, label in fold_rows:
                value = _report_value(task.kind, score)
                preds.append(value)
                labels.append(label)
                predictions_log.append([test_user, period, value, label])

        per_member = None
        if config.method == METHOD_FEDTHERAPIST:
            per_member = {}
            for key in sorted(member_scores):
                reported = [_report_value(task.kind, s) for s in member_scores[key]]
                per_member[key] = float(_metric(task.kind, reported, member_labels[key]))

        entry = {
            "metric": float(_metric(task.kind, preds, labels)),
            "n_predictions": len(preds),
            "skipped": skipped,
            "predictions": predictions_log,
        }
        if per_member is not None:
            entry["per_member"] = per_member
        report.per_seed[seed] = entry

    report.finalize()
    return report


def _centered_scores(task_kind: str, by_period: dict[int, list[float]],
                     bias: float):
    """Per-period scores; classification drops the fold model's bias.

    LOUO folds differ in training class balance by exactly the held-out
    label, and a converged intercept encodes that balance, so pooling
    sigmoid(w.x + b) across folds leaks the answer. Ranking on
    sigmoid(w.x) keeps scores comparable across folds.
    """
    out = {}
    for period, logits in by_period.items():
        mean_logit = float(np.mean(logits))
        if task_kind == "classification":
            out[period] = float(sigmoid(mean_logit - bias))
        else:
            out[period] = mean_logit
    return out


def _run_cl_fold(per_user, test_user, train_users, config, task_model,
                 train_cfg: TrainConfig, run_seed: int):
    train_rows = [r for u in train_users for r in per_user[u]]
    test_rows = per_user[test_user]
    if not train_rows or not test_rows:
        return []
    std_train = _standardize(train_rows, train_rows)
    std_test = _standardize(train_rows, test_rows)
    samples = [(r.x, r.label) for r in std_train]
    model = _init_linear(zero_model(std_train[0].x.shape[0], task_model), run_seed)
    cfg = TrainConfig(learning_rate=train_cfg.learning_rate,
                      batch_size=train_cfg.batch_size,
                      l1_lambda=train_cfg.l1_lambda,
                      epochs=config.cl_epochs, rng_seed=run_seed)
    model = train_model(model, samples, cfg)
    by_period: dict[int, list[float]] = {}
    for row in std_test:
        by_period.setdefault(row.period, []).append(predict_logit(model, row.x))
    task_kind = TASKS[config.task].kind
    scores = _centered_scores(task_kind, by_period, model.bias)
    return [
        (period, scores[period],
         next(r.label for r in test_rows if r.period == period))
        for period in sorted(scores)
    ]


def _fl_config(config: ExperimentConfig, n_clients: int, train_cfg: TrainConfig,
               run_seed: int) -> FLConfig:
    k = config.sampled_per_round
    if k is not None:
        k = min(k, n_clients)
    return FLConfig(total_clients=n_clients, sampled_per_round=k,
                    local_epochs=config.local_epochs, rounds=config.rounds,
                    train=train_cfg, rng_seed=run_seed)


def _run_fl_text_fold(per_user, test_user, train_users, config, task_model,
                      train_cfg: TrainConfig, run_seed: int, centerer: FoldCenterer):
    test_rows = per_user[test_user]
    if not test_rows:
        return []
    mean = centerer.fold_means(train_users).get("pooled")
    if mean is None:
        return []
    clients = []
    for i, user in enumerate(train_users):
        rows = per_user[user]
        if rows:
            clients.append(
                Client(client_id=i, samples=[(r.x - mean, r.label) for r in rows])
            )
    if not clients:
        return []
    dim = test_rows[0].x.shape[0]
    template = zero_model(dim, task_model)
    initial = _init_linear(template, run_seed)
    state = run_rounds(_fl_config(config, len(clients), train_cfg, run_seed),
                       clients, initial, linear_epoch)
    model = template.with_flat(state.global_params)
    by_period: dict[int, list[float]] = {}
    for row in test_rows:
        by_period.setdefault(row.period, []).append(predict_logit(model, row.x - mean))
    task_kind = TASKS[config.task].kind
    scores = _centered_scores(task_kind, by_period, model.bias)
    return [
        (period, scores[period],
         next(r.label for r in test_rows if r.period == period))
        for period in sorted(scores)
    ]


def _center_context_samples(rows: list[ContextSample], means: dict) -> list[ContextSample]:
    out = []
    for r in rows:
        mean = means.get(r.member_key)
        if mean is None:
            out.append(r)
        else:
            out.append(ContextSample(r.member_key, r.x - mean, r.label,
                                     r.user_id, r.day_index))
    return out


def _evaluated_member_rows(ens: EnsembleModel, samples: list[ContextSample],
                           task_kind: str):
    """(period, member-score vector, label) rows for evaluation.

    Classification member scores drop the member's bias (see
    `_centered_scores`); members without samples in a period contribute the
    neutral score of a zero logit.
    """
    by_period: dict[int, dict] = {}
    labels: dict[int, float] = {}
    for sample in samples:
        per = by_period.setdefault(sample.day_index, {})
        per.setdefault(sample.member_key, []).append(
            predict_logit(ens.members[sample.member_key], sample.x)
        )
        labels[sample.day_index] = sample.label
    rows = []
    for period in sorted(by_period):
        per = by_period[period]
        scores = []
        for key in ens.member_order:
            member = ens.members[key]
            logit = (sum(per[key]) / len(per[key])) if key in per else member.bias
            if task_kind == "classification":
                # absent members land on the neutral 0.5
                scores.append(sigmoid(logit - member.bias))
            else:
                scores.append(logit)
        rows.append((period, np.array(scores), labels[period]))
    return rows


def _run_fedtherapist_fold(per_user, test_user, train_users, config, task_model,
                           train_cfg: TrainConfig, run_seed: int,
                           member_scores: dict, member_labels: dict,
                           centerer: FoldCenterer):
    test_rows = per_user[test_user]
    if not test_rows:
        return []
    means = centerer.fold_means(train_users)
    clients = []
    for i, user in enumerate(train_users):
        rows = per_user[user]
        if rows:
            clients.append(Client(client_id=i,
                                  samples=_center_context_samples(rows, means)))
    if not clients:
        return []
    template = new_ensemble(set(config.sources), config_dim(config, test_rows),
                            task_model, config.ensemble_mode)
    initial = _init_ensemble(template, run_seed)
    state = run_rounds(_fl_config(config, len(clients), train_cfg, run_seed),
                       clients, initial, ensemble_epoch)
    ens = template.with_flat(state.global_params)

    task_kind = TASKS[config.task].kind
    centered_test = _center_context_samples(test_rows, means)
    rows = _evaluated_member_rows(ens, centered_test, task_kind)
    weights = ens.effective_weights()
    out = []
    for period, scores, label in rows:
        out.append((period, float(weights @ scores), label))
        for key, score in zip(ens.member_order, scores):
            name = f"{key[0]}:{key[1].value}"
            member_scores.setdefault(name, []).append(float(score))
            member_labels.setdefault(name, []).append(label)
    return out


def config_dim(config: ExperimentConfig, rows: list[ContextSample]) -> int:
    if rows:
        return rows[0].x.shape[0]
    return config.embedding_dim


def emit_sample_texts(config: ExperimentConfig,
                      cohort: list[ClientDataset]) -> list[tuple[str, str]]:
    """Every (sample_id, text) pair the configured run will ask a file-backed
    embedding store for, in deterministic order.

    Runs the exact dataset-assembly path with a recording embedder, so an
    external encoder fed these lines produces a store that covers the run.
    """
    if config.method == METHOD_CL_NONTEXT:
        raise ConfigError("cl_nontext uses no text embeddings")
    task = TASKS[config.task]
    label_fn = _label_fn_for(config.task, cohort)
    recorded: dict[str, str] = {}

    def recording_embed(tokens, sample_id):
        recorded[sample_id] = " ".join(tokens)
        return np.zeros(1)

    if config.method == METHOD_FL_TEXT:
        _assemble_pooled_samples(cohort, config, recording_embed, label_fn, task.window)
    else:
        _assemble_context_samples(cohort, config, recording_embed, label_fn, task.window)
    return sorted(recorded.items())
