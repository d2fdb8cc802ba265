from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from datetime import UTC, datetime

import numpy as np
import pandas as pd

from fuzzydsr.schemas import (
    ComparisonReport,
    HallOfFameEntry,
    Metrics,
    ParetoPointModel,
    ReportRow,
    RunMetadata,
    TrainResult,
)
from fuzzydsr.services.expression import ExprTree, ExpressionError, complexity, parse, pretty
from fuzzydsr.services.fuzzifier import FuzzyDataset
from fuzzydsr.services.metrics import RewardKind, reward_from
from fuzzydsr.services.pareto import ParetoPoint, pareto_front
from fuzzydsr.services.tokens import Library, LibraryError, LibraryMode, build_library
from fuzzydsr.services.trainer import mean_metrics, rank_entries, score_expression

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ("accuracy", "precision", "recall", "f1", "f2")


class ReportError(ValueError):
    pass


def select_best(entries: Iterable[HallOfFameEntry], reward_kind: RewardKind) -> HallOfFameEntry:
    ranked = rank_entries(entries, reward_kind)
    if not ranked:
        raise ReportError("No entries to select from")
    return ranked[0]


class _TestScorer:
    def __init__(self, test: FuzzyDataset, threshold: float):
        self.test = test
        self.threshold = threshold
        self.lib: Library = build_library(LibraryMode.COMBINED, test.columns)
        self._trees: dict[str, ExprTree] = {}
        self._cache: dict[str, tuple[int, Metrics]] = {}

    def tree(self, expression: str) -> ExprTree:
        if expression not in self._trees:
            try:
                self._trees[expression] = parse(expression, self.lib)
            except (ExpressionError, LibraryError) as exc:
                raise ReportError(f"Cannot evaluate '{expression}' on the test split: {exc}") from exc
        return self._trees[expression]

    def score(self, expression: str) -> tuple[int, Metrics]:
        if expression not in self._cache:
            tree = self.tree(expression)
            self._cache[expression] = (complexity(tree), score_expression(tree, self.test, self.threshold))
        return self._cache[expression]


def _group_key(result: TrainResult) -> tuple[str, str, str]:
    return (result.method, result.reward_kind, result.mode)


def report(
    results: Sequence[TrainResult],
    test: FuzzyDataset,
    threshold: float,
    *,
    selection_metric: RewardKind = RewardKind.F1,
) -> ComparisonReport:
    """Best-expression and mean-of-best rows per method on the test split, plus the pooled Pareto front."""
    if not results:
        raise ReportError("No training results to report on")
    scorer = _TestScorer(test, threshold)

    groups: dict[tuple[str, str, str], list[TrainResult]] = {}
    for result in sorted(results, key=lambda r: (_group_key(r), r.seed)):
        groups.setdefault(_group_key(result), []).append(result)

    rows: list[ReportRow] = []
    for (method, reward_kind, mode), members in groups.items():
        per_seed: list[HallOfFameEntry] = []
        for result in members:
            size, scores = scorer.score(result.best.expression)
            per_seed.append(
                result.best.model_copy(
                    update={"complexity": size, "metrics": scores, "reward": reward_from(scores, selection_metric)}
                )
            )
        best = select_best(per_seed, selection_metric)
        common = {"method": method, "reward_kind": reward_kind, "mode": mode, "n_seeds": len(members)}
        rows.append(
            ReportRow(
                row="best",
                expression=best.expression,
                infix=pretty(scorer.tree(best.expression)),
                complexity=best.complexity,
                metrics=best.metrics,
                **common,
            )
        )
        rows.append(
            ReportRow(
                row="average",
                complexity=float(np.mean([e.complexity for e in per_seed])),
                metrics=mean_metrics(e.metrics for e in per_seed),
                **common,
            )
        )

    pooled = sorted({entry.expression for result in results for entry in result.hall_of_fame})
    points = []
    for expression in pooled:
        size, scores = scorer.score(expression)
        points.append(ParetoPoint(complexity=size, reward=reward_from(scores, selection_metric), expression=expression))
    front = pareto_front(points)

    logger.info(
        "report_built groups=%s results=%s pooled=%s front=%s",
        len(groups),
        len(results),
        len(points),
        len(front),
    )
    return ComparisonReport(
        threshold=threshold,
        selection_metric=selection_metric.value,
        rows=rows,
        pareto_front=[ParetoPointModel(complexity=p.complexity, reward=p.reward, expression=p.expression) for p in front],
        metadata=RunMetadata(created_at=datetime.now(UTC)),
    )


def report_frame(comparison: ComparisonReport) -> pd.DataFrame:
    records = []
    for row in comparison.rows:
        record = {
            "method": row.method,
            "reward": row.reward_kind,
            "mode": row.mode,
            "row": row.row,
            "seeds": row.n_seeds,
            "complexity": row.complexity,
        }
        record.update({name: getattr(row.metrics, name) for name in METRIC_COLUMNS})
        record["expression"] = row.expression or ""
        records.append(record)
    return pd.DataFrame.from_records(records)


def render_report_text(comparison: ComparisonReport) -> str:
    frame = report_frame(comparison)
    lines = [
        f"threshold={comparison.threshold} selection={comparison.selection_metric}",
        "",
        frame.to_string(index=False, float_format=lambda v: f"{v:.3f}"),
        "",
        "best rules",
        *(f"  {row.method}/{row.reward_kind}/{row.mode}: {row.infix}" for row in comparison.rows if row.infix),
        "",
        "pareto front",
        pareto_frame(comparison).to_string(index=False, float_format=lambda v: f"{v:.3f}"),
    ]
    return "\n".join(lines) + "\n"


def pareto_frame(comparison: ComparisonReport) -> pd.DataFrame:
    return pd.DataFrame(
        [point.model_dump() for point in comparison.pareto_front],
        columns=["complexity", "reward", "expression"],
    )
