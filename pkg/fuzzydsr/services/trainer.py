from __future__ import annotations

import logging
import math
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from datetime import UTC, datetime
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike

from fuzzydsr.config import TrainConfig
from fuzzydsr.schemas import BatchStats, HallOfFameEntry, Metrics, RunMetadata, SeedBest, SweepSummary, TrainResult
from fuzzydsr.services.artifacts import ArtifactStore
from fuzzydsr.services.constraints import SearchMode, enforce_root_implication
from fuzzydsr.services.controller import gradient_step, init_controller, sample_traversal, save_checkpoint
from fuzzydsr.services.expression import ExprTree, complexity, evaluate_batch, render, tree_from_traversal
from fuzzydsr.services.features import default_terminals
from fuzzydsr.services.fuzzifier import FuzzyDataset
from fuzzydsr.services.metrics import RewardKind, confusion, metrics, reward_from
from fuzzydsr.services.tokens import Library, build_library

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


def score_expression(tree: ExprTree, data: FuzzyDataset, threshold: float) -> Metrics:
    predictions = (evaluate_batch(tree, data) >= threshold).astype(np.int8)
    return metrics(confusion(predictions, data.labels))


def compute_reward(tree: ExprTree, data: FuzzyDataset, threshold: float, reward_kind: RewardKind) -> float:
    return reward_from(score_expression(tree, data, threshold), reward_kind)


def risk_filter(rewards: ArrayLike, epsilon: float) -> tuple[float, np.ndarray]:
    """Nearest-rank (1 - epsilon) quantile and the indices at or above it."""
    values = np.asarray(rewards, dtype=np.float64)
    if values.size == 0:
        raise TrainingError("Cannot filter an empty batch")
    if not 0.0 < epsilon < 1.0:
        raise TrainingError(f"epsilon must lie in (0, 1), got {epsilon}")
    # round() absorbs float noise such as 0.05 * 100 = 5.000000000000001
    keep = max(math.ceil(round(epsilon * values.size, 9)), 1)
    threshold = float(np.sort(values)[values.size - keep])
    return threshold, np.flatnonzero(values >= threshold)


def _entry_order(entry: HallOfFameEntry) -> tuple[float, int, str]:
    return (-entry.reward, entry.complexity, entry.expression)


class HallOfFame:
    """Best distinct expressions seen so far, keyed by rendered string."""

    def __init__(self, capacity: int = 20):
        if capacity <= 0:
            raise TrainingError("Hall of fame capacity must be positive")
        self.capacity = capacity
        self._entries: dict[str, HallOfFameEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def offer(self, entry: HallOfFameEntry) -> None:
        if entry.expression in self._entries:
            return
        self._entries[entry.expression] = entry
        if len(self._entries) > self.capacity:
            worst = max(self._entries.values(), key=_entry_order)
            del self._entries[worst.expression]

    def entries(self) -> list[HallOfFameEntry]:
        return sorted(self._entries.values(), key=_entry_order)

    @property
    def best_reward(self) -> float:
        return max((entry.reward for entry in self._entries.values()), default=0.0)


def training_library(cfg: TrainConfig, columns: Sequence[str]) -> Library:
    return build_library(cfg.library_mode, columns, cfg.semantics)


def _score_batch(
    trees: list[ExprTree],
    data: FuzzyDataset,
    cfg: TrainConfig,
) -> list[Metrics]:
    if cfg.reward_workers == 1 or len(trees) == 1:
        return [score_expression(tree, data, cfg.sigmoid_threshold) for tree in trees]
    with ThreadPoolExecutor(max_workers=cfg.reward_workers) as pool:
        return list(pool.map(lambda tree: score_expression(tree, data, cfg.sigmoid_threshold), trees))


def train(
    cfg: TrainConfig,
    data: FuzzyDataset,
    terminals: Sequence[str] | None = None,
    *,
    checkpoint: Path | None = None,
) -> TrainResult:
    """Risk-seeking policy gradient over fuzzy expressions, rewarded on ``data``.

    When ``checkpoint`` is given the final controller and optimizer state are saved there.
    """
    started = time.perf_counter()
    names = list(terminals) if terminals is not None else default_terminals(data.columns)
    data = data.select(names)
    if data.n_rows == 0:
        raise TrainingError("Training data is empty")
    if data.frauds in (0, data.n_rows):
        raise TrainingError(
            f"Training labels hold a single class ({data.frauds} frauds in {data.n_rows} rows); "
            "every expression would earn the same reward"
        )

    lib = training_library(cfg, names)
    constraints = cfg.constraints()
    ctrl = init_controller(len(lib), cfg.hidden_size, cfg.seed, embedding_size=cfg.embedding_size)
    rng = np.random.default_rng(cfg.seed)
    hall = HallOfFame(cfg.hall_of_fame_size)
    curve: list[BatchStats] = []
    cache: dict[tuple[int, ...], Metrics] = {}

    logger.info(
        "train_start method=%s reward=%s mode=%s seed=%s rows=%s frauds=%s tokens=%s batches=%s",
        cfg.method,
        cfg.reward_kind,
        cfg.mode,
        cfg.seed,
        data.n_rows,
        data.frauds,
        len(lib),
        cfg.n_batches,
    )

    for batch in range(cfg.n_batches):
        size = min(cfg.batch_size, cfg.n_samples - batch * cfg.batch_size)
        trajectories = [sample_traversal(ctrl, lib, constraints, rng) for _ in range(size)]
        traversals = [t.traversal for t in trajectories]
        if cfg.mode is SearchMode.CONSTRAINED:
            traversals = [enforce_root_implication(t, lib, rng) for t in traversals]

        pending = sorted({t for t in traversals if t not in cache})
        if pending:
            trees = [tree_from_traversal(t, lib) for t in pending]
            for traversal, scores in zip(pending, _score_batch(trees, data, cfg), strict=True):
                cache[traversal] = scores

        batch_metrics = [cache[t] for t in traversals]
        rewards = np.array([reward_from(m, cfg.reward_kind) for m in batch_metrics])
        quantile, kept = risk_filter(rewards, cfg.epsilon)
        gradient_step(
            ctrl,
            [trajectories[i] for i in kept],
            [float(rewards[i] - quantile) for i in kept],
            cfg.learning_rate,
            cfg.entropy_weight,
            lib=lib,
            cfg=constraints,
        )

        for i in kept:
            tree = tree_from_traversal(traversals[i], lib)
            hall.offer(
                HallOfFameEntry(
                    expression=render(tree),
                    traversal=list(traversals[i]),
                    reward=float(rewards[i]),
                    complexity=complexity(tree),
                    metrics=batch_metrics[i],
                )
            )

        stats = BatchStats(
            batch=batch,
            max_reward=float(rewards.max()),
            mean_reward=float(rewards.mean()),
            quantile=quantile,
            best_so_far=hall.best_reward,
        )
        curve.append(stats)
        logger.debug(
            "train_batch batch=%s max=%.4f mean=%.4f quantile=%.4f best=%.4f kept=%s",
            batch,
            stats.max_reward,
            stats.mean_reward,
            stats.quantile,
            stats.best_so_far,
            kept.size,
        )

    if checkpoint is not None:
        save_checkpoint(ctrl, checkpoint)

    entries = hall.entries()
    result = TrainResult(
        method=cfg.method.value,
        reward_kind=cfg.reward_kind.value,
        mode=cfg.mode.value,
        seed=cfg.seed,
        feature_names=names,
        hall_of_fame=entries,
        best=entries[0],
        reward_curve=curve,
        n_batches=len(curve),
        metadata=RunMetadata(created_at=datetime.now(UTC), duration_seconds=time.perf_counter() - started),
    )
    logger.info(
        "train_done method=%s seed=%s best_reward=%.4f best=%s distinct=%s",
        result.method,
        cfg.seed,
        result.best.reward,
        result.best.expression,
        len(cache),
    )
    return result


def _train_job(args: tuple[TrainConfig, FuzzyDataset, list[str] | None, Path | None]) -> TrainResult:
    cfg, data, terminals, checkpoint = args
    return train(cfg, data, terminals, checkpoint=checkpoint)


def run_seed_sweep(
    cfg: TrainConfig,
    data: FuzzyDataset,
    seeds: Sequence[int],
    terminals: Sequence[str] | None = None,
    *,
    max_workers: int = 1,
    checkpoint_root: Path | None = None,
) -> list[TrainResult]:
    """One independent run per seed, returned in ``seeds`` order.

    With ``checkpoint_root`` each run saves its controller to ``<root>/seed_<n>/controller.json``.
    """
    if not seeds:
        raise TrainingError("A seed sweep needs at least one seed")
    names = list(terminals) if terminals is not None else None
    jobs = [
        (
            cfg.model_copy(update={"seed": int(seed)}),
            data,
            names,
            None if checkpoint_root is None else Path(checkpoint_root) / f"seed_{seed}" / "controller.json",
        )
        for seed in seeds
    ]
    if max_workers <= 1 or len(jobs) == 1:
        return [_train_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(_train_job, jobs))


def mean_metrics(items: Iterable[Metrics]) -> Metrics:
    collected = list(items)
    if not collected:
        raise TrainingError("Cannot average an empty set of metrics")
    fields = ("accuracy", "precision", "recall", "f1", "f2")
    return Metrics(**{name: float(np.mean([getattr(m, name) for m in collected])) for name in fields})


def sweep_summary(results: Sequence[TrainResult]) -> SweepSummary:
    if not results:
        raise TrainingError("No results to summarize")
    first = results[0]
    per_seed = [
        SeedBest(
            seed=r.seed,
            expression=r.best.expression,
            complexity=r.best.complexity,
            reward=r.best.reward,
            metrics=r.best.metrics,
        )
        for r in results
    ]
    return SweepSummary(
        method=first.method,
        reward_kind=first.reward_kind,
        mode=first.mode,
        per_seed=per_seed,
        mean_best=mean_metrics(s.metrics for s in per_seed),
        mean_best_reward=float(np.mean([s.reward for s in per_seed])),
    )


def rank_entries(entries: Iterable[HallOfFameEntry], reward_kind: RewardKind) -> list[HallOfFameEntry]:
    """Order entries by the chosen F-measure, then by complexity and rendered string."""
    return sorted(
        entries,
        key=lambda e: (-reward_from(e.metrics, reward_kind), e.complexity, e.expression),
    )


def training_log_frame(result: TrainResult) -> pd.DataFrame:
    return pd.DataFrame(
        [stats.model_dump() for stats in result.reward_curve],
        columns=["batch", "max_reward", "mean_reward", "quantile", "best_so_far"],
    )


def write_training_log(store: ArtifactStore, key: str, result: TrainResult) -> None:
    store.write_frame(key=key, frame=training_log_frame(result))
