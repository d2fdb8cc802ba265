from __future__ import annotations

import json
import logging
from pathlib import Path

import pandas as pd

from fuzzydsr.config import Method, RunConfig, SyntheticSpec, get_settings
from fuzzydsr.schemas import FuzzifierModel, PrepareSummary, SplitSummary, SweepSummary, TrainResult
from fuzzydsr.services.artifacts import ArtifactError, ArtifactStore, create_artifact_store
from fuzzydsr.services.features import FeatureDataset, add_gaussian_noise, engineer_features, stratified_split
from fuzzydsr.services.fuzzifier import FuzzyDataset, apply_fuzzifier, fit_fuzzifier
from fuzzydsr.services.report import pareto_frame, render_report_text, report
from fuzzydsr.services.synthetic import generate_synthetic
from fuzzydsr.services.trainer import run_seed_sweep, sweep_summary, write_training_log
from fuzzydsr.services.transactions import load_paysim_csv, write_paysim_csv

logger = logging.getLogger(__name__)

PREPARED_DIR = "prepared"
RESULTS_DIR = "results"
REPORT_DIR = "report"
FUZZIFIER_KEY = f"{PREPARED_DIR}/fuzzifier.json"
TRAIN_KEY = f"{PREPARED_DIR}/train.csv"
TEST_KEY = f"{PREPARED_DIR}/test.csv"


def _split_summary(ds: FeatureDataset | FuzzyDataset) -> SplitSummary:
    return SplitSummary(rows=ds.n_rows, frauds=ds.frauds, fraud_rate=ds.frauds / ds.n_rows)


def _load_rows(config: RunConfig) -> pd.DataFrame:
    if config.csv_path is not None:
        return load_paysim_csv(config.csv_path)
    spec = config.synthetic
    return generate_synthetic(
        spec.n_rows,
        spec.fraud_rate,
        spec.seed,
        spec.planted_rule,
        label_noise=spec.label_noise,
    )


def cmd_prepare(config: RunConfig) -> PrepareSummary:
    """Ingest, engineer, split, add noise to train, fuzzify both splits and write them out."""
    store = create_artifact_store(config.output_dir)
    features = engineer_features(_load_rows(config))
    train_raw, test_raw = stratified_split(features, config.split_ratio, config.split_seed)
    train_noisy = add_gaussian_noise(train_raw, config.noise_level, config.noise_seed)

    model = fit_fuzzifier(train_noisy)
    train = apply_fuzzifier(model, train_noisy)
    test = apply_fuzzifier(model, test_raw)

    store.write_frame(key=f"{PREPARED_DIR}/train_features.csv", frame=train_noisy.to_frame())
    store.write_frame(key=f"{PREPARED_DIR}/test_features.csv", frame=test_raw.to_frame())
    store.write_frame(key=TRAIN_KEY, frame=train.to_frame())
    store.write_frame(key=TEST_KEY, frame=test.to_frame())
    store.write_model(key=FUZZIFIER_KEY, model=model)

    summary = PrepareSummary(
        source=config.source_label,
        train=_split_summary(train),
        test=_split_summary(test),
        columns=list(train.columns),
        noise_level=config.noise_level,
    )
    store.write_model(key=f"{PREPARED_DIR}/summary.json", model=summary)
    logger.info(
        "prepare_done train_rows=%s test_rows=%s train_frauds=%s test_frauds=%s",
        summary.train.rows,
        summary.test.rows,
        summary.train.frauds,
        summary.test.frauds,
    )
    for name, split in (("train", summary.train), ("test", summary.test)):
        print(f"{name}: rows={split.rows} frauds={split.frauds} fraud_rate={split.fraud_rate:.5f}")
    return summary


def load_prepared(store: ArtifactStore, key: str) -> FuzzyDataset:
    if not store.exists(key=FUZZIFIER_KEY) or not store.exists(key=key):
        raise ArtifactError(f"Prepared data missing under {store.path(key=PREPARED_DIR)}; run 'prepare' first")
    model = FuzzifierModel.model_validate_json(store.read_text(key=FUZZIFIER_KEY))
    return FuzzyDataset.from_csv(store.path(key=key), binary_columns=model.binary_columns)


def run_dir(method: Method | str, reward_kind: str, mode: str) -> str:
    return f"{RESULTS_DIR}/{Method(method).value}/{reward_kind}/{mode}"


def seed_dir(method: Method | str, reward_kind: str, mode: str, seed: int) -> str:
    return f"{run_dir(method, reward_kind, mode)}/seed_{seed}"


def _summary_table(summaries: list[SweepSummary]) -> str:
    frame = pd.DataFrame.from_records(
        [
            {
                "method": s.method,
                "reward": s.reward_kind,
                "mode": s.mode,
                "seeds": len(s.per_seed),
                "best_reward": max(seed.reward for seed in s.per_seed),
                "mean_best_reward": s.mean_best_reward,
                "mean_precision": s.mean_best.precision,
                "mean_recall": s.mean_best.recall,
            }
            for s in summaries
        ]
    )
    return frame.to_string(index=False, float_format=lambda v: f"{v:.3f}") + "\n"


def cmd_train(config: RunConfig) -> list[TrainResult]:
    """Run every configured method over every seed; one result folder per (method, reward, mode, seed)."""
    store = create_artifact_store(config.output_dir)
    data = load_prepared(store, TRAIN_KEY)
    max_workers = get_settings().max_workers

    results: list[TrainResult] = []
    for method in config.methods:
        cfg = config.train_config(method, config.seeds[0])
        folder = run_dir(method, cfg.reward_kind.value, cfg.mode.value)
        sweep = run_seed_sweep(
            cfg,
            data,
            config.seeds,
            config.terminals,
            max_workers=max_workers,
            checkpoint_root=store.path(key=folder),
        )
        for result in sweep:
            seed_folder = seed_dir(method, result.reward_kind, result.mode, result.seed)
            store.write_model(key=f"{seed_folder}/result.json", model=result)
            write_training_log(store, f"{seed_folder}/training_log.csv", result)
        summary = sweep_summary(sweep)
        store.write_model(key=f"{folder}/summary.json", model=summary)
        results.extend(sweep)
        logger.info(
            "sweep_done method=%s reward=%s mode=%s seeds=%s mean_best_reward=%.4f",
            method.value,
            summary.reward_kind,
            summary.mode,
            len(sweep),
            summary.mean_best_reward,
        )

    table = _summary_table(load_summaries(store.path(key=RESULTS_DIR)))
    store.write_text(key=f"{RESULTS_DIR}/summary.txt", content=table)
    print(table, end="")
    return results


def load_summaries(results_dir: Path) -> list[SweepSummary]:
    """Every sweep summary under ``results_dir``, including runs from earlier invocations."""
    paths = sorted(Path(results_dir).glob("*/*/*/summary.json"))
    return [SweepSummary.model_validate_json(path.read_text(encoding="utf-8")) for path in paths]


def load_results(results_dir: Path) -> list[TrainResult]:
    paths = sorted(Path(results_dir).glob("**/seed_*/result.json"))
    if not paths:
        raise ArtifactError(f"No training results found under {results_dir}")
    results = []
    for path in paths:
        try:
            results.append(TrainResult.model_validate_json(path.read_text(encoding="utf-8")))
        except ValueError as exc:
            raise ArtifactError(f"Unreadable result file {path}: {exc}") from exc
    return results


def cmd_evaluate(config: RunConfig, results_dir: Path | None = None) -> Path:
    store = create_artifact_store(config.output_dir)
    results = load_results(results_dir or store.path(key=RESULTS_DIR))
    test = load_prepared(store, TEST_KEY)

    comparison = report(results, test, config.sigmoid_threshold, selection_metric=config.reward_kind)
    target = store.write_model(key=f"{REPORT_DIR}/report.json", model=comparison)
    text = render_report_text(comparison)
    store.write_text(key=f"{REPORT_DIR}/report.txt", content=text)
    store.write_frame(key=f"{REPORT_DIR}/pareto.csv", frame=pareto_frame(comparison))
    logger.info("evaluate_done results=%s rows=%s front=%s", len(results), len(comparison.rows), len(comparison.pareto_front))
    print(text, end="")
    return target


def cmd_synth(spec: SyntheticSpec, out: Path) -> Path:
    frame = generate_synthetic(
        spec.n_rows,
        spec.fraud_rate,
        spec.seed,
        spec.planted_rule,
        label_noise=spec.label_noise,
    )
    target = create_artifact_store(Path(out).parent).write_text(key=Path(out).name, content=write_paysim_csv(frame))
    print(json.dumps({"path": str(target), "rows": len(frame), "fraud_rate": frame.attrs["fraud_rate"]}))
    return target
