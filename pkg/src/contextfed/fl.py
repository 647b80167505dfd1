"""Synchronous FedAvg over simulated clients.

Each round samples K of the eligible clients, trains each locally for E
epochs from the current global parameters, and aggregates the returned
parameter vectors by data-size-weighted average. Every random choice
derives from (base seed, round, client), so a run is reproducible and
independent of execution interleaving.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Protocol

import numpy as np

from .model import TrainConfig
from .seeding import DetRng, derive_seed


class FlatModel(Protocol):
    """Anything trainable here: flattens to a vector and rebuilds from one."""

    def flatten(self) -> np.ndarray: ...

    def with_flat(self, params: np.ndarray) -> "FlatModel": ...


# Trains one epoch: (model, samples, train_cfg, shuffle_seed) -> model.
EpochFn = Callable[[Any, Any, TrainConfig, int], Any]
EvalHook = Callable[[int, np.ndarray], dict[str, float] | None]


@dataclass(frozen=True)
class FLConfig:
    total_clients: int
    sampled_per_round: int | None = None  # None: every eligible client
    local_epochs: int = 1
    rounds: int = 1000
    train: TrainConfig = field(default_factory=TrainConfig)
    rng_seed: int = 0

    def __post_init__(self):
        if self.total_clients < 1:
            raise ValueError("total_clients must be >= 1")
        if self.sampled_per_round is not None and not (
            1 <= self.sampled_per_round <= self.total_clients
        ):
            raise ValueError("sampled_per_round must satisfy 1 <= K <= N")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.local_epochs < 0:
            raise ValueError("local_epochs must be >= 0")


@dataclass(frozen=True)
class Client:
    client_id: int
    samples: Any

    @property
    def n_samples(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class RoundUpdate:
    client_id: int
    n_i: int
    params: np.ndarray

    def __post_init__(self):
        if self.n_i < 1:
            raise ValueError("n_i must be >= 1")
        if not np.all(np.isfinite(self.params)):
            raise ValueError("update parameters must be finite")


@dataclass
class ServerState:
    round_index: int
    global_params: np.ndarray
    history: list[tuple[int, str, float]] = field(default_factory=list)


def sample_clients(n: int, k: int, rng: DetRng) -> list[int]:
    """K distinct indices from range(n), uniform without replacement, sorted."""
    if k > n:
        raise ValueError(f"cannot sample {k} clients from {n}")
    return sorted(rng.sample_without_replacement(n, k))


def client_round_seed(base_seed: int, round_index: int, client_id: int) -> int:
    """Seed for one client's local training in one round."""
    return derive_seed(base_seed, round_index, client_id)


def local_update(
    template: FlatModel,
    global_params: np.ndarray,
    client: Client,
    epochs: int,
    train_cfg: TrainConfig,
    seed: int,
    train_epoch: EpochFn,
) -> RoundUpdate:
    """Copy the global parameters in, train E epochs, return the result.

    Epoch e shuffles with derive_seed(seed, e); E=0 returns the global
    parameters unchanged (with the client's sample count).
    """
    if client.n_samples < 1:
        raise ValueError(f"client {client.client_id} has no samples")
    model = template.with_flat(np.asarray(global_params, dtype=np.float64))
    for epoch in range(epochs):
        model = train_epoch(model, client.samples, train_cfg, derive_seed(seed, epoch))
    return RoundUpdate(client_id=client.client_id, n_i=client.n_samples,
                       params=model.flatten())


def aggregate(updates: list[RoundUpdate]) -> np.ndarray:
    """Data-size-weighted average, summed in ascending client_id order.

    Each weight is the one float division n_i/n, so scaling every n_i by the
    same integer produces bit-identical output (IEEE division is correctly
    rounded, and the exact rationals are equal).
    """
    if not updates:
        raise ValueError("no updates to aggregate")
    ordered = sorted(updates, key=lambda u: u.client_id)
    dim = ordered[0].params.shape[0]
    for update in ordered:
        if update.params.shape[0] != dim:
            raise ValueError(
                f"parameter dimension mismatch for client {update.client_id}"
            )
    n = sum(update.n_i for update in ordered)
    total = np.zeros(dim, dtype=np.float64)
    for update in ordered:
        total += (update.n_i / n) * update.params
    return total


def run_rounds(
    cfg: FLConfig,
    clients: list[Client],
    template: FlatModel,
    train_epoch: EpochFn,
    eval_hook: EvalHook | None = None,
) -> ServerState:
    """The FedAvg loop: sample -> local update -> aggregate, R times.

    Clients with zero samples are excluded from the sampling pool up front.
    """
    if not clients:
        raise ValueError("no clients")
    eligible = sorted(
        (c for c in clients if c.n_samples >= 1), key=lambda c: c.client_id
    )
    if not eligible:
        raise ValueError("no clients with training data")
    k = cfg.sampled_per_round
    if k is None:
        k = len(eligible)
    if k > len(eligible):
        raise ValueError(f"cannot sample {k} clients from {len(eligible)} eligible")

    params = template.flatten()
    state = ServerState(round_index=0, global_params=params)
    for round_index in range(cfg.rounds):
        rng = DetRng(derive_seed(cfg.rng_seed, "client-sample", round_index))
        chosen = sample_clients(len(eligible), k, rng)
        updates = []
        for idx in chosen:
            client = eligible[idx]
            seed = client_round_seed(cfg.rng_seed, round_index, client.client_id)
            updates.append(
                local_update(template, params, client, cfg.local_epochs,
                             cfg.train, seed, train_epoch)
            )
        params = aggregate(updates)
        state.round_index = round_index + 1
        state.global_params = params
        if eval_hook is not None:
            metrics = eval_hook(round_index, params)
            if metrics:
                for name in sorted(metrics):
                    state.history.append((round_index, name, float(metrics[name])))
    return state


def linear_epoch(model, samples, train_cfg: TrainConfig, seed: int):
    """Epoch runner for plain LinearModel clients."""
    from .model import sgd_epoch

    return sgd_epoch(model, samples, train_cfg, seed=seed)


def ensemble_epoch(model, samples, train_cfg: TrainConfig, seed: int):
    """Epoch runner for CALL ensembles: one member pass (+ W pass for E_E)."""
    from .call import train_call_local

    return train_call_local(model, samples, replace(train_cfg, epochs=1, rng_seed=seed))


def write_history_csv(history: list[tuple[int, str, float]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "metric", "value"])
        writer.writerows(history)
