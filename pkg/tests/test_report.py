import pytest

from fuzzydsr.config import TrainConfig
from fuzzydsr.schemas import HallOfFameEntry, Metrics, TrainResult
from fuzzydsr.services.metrics import RewardKind
from fuzzydsr.services.report import (
    ReportError,
    pareto_frame,
    render_report_text,
    report,
    report_frame,
    select_best,
)
from fuzzydsr.services.trainer import run_seed_sweep

QUICK = TrainConfig(batch_size=20, n_samples=60, epsilon=0.1, hidden_size=8, embedding_size=4, max_length=8)


def entry(expression, reward, f1, f2):
    scores = Metrics(accuracy=0.5, precision=0.5, recall=0.5, f1=f1, f2=f2)
    return HallOfFameEntry(expression=expression, traversal=[0], reward=reward, complexity=3, metrics=scores)


@pytest.fixture
def sweep(small_fuzzy) -> list[TrainResult]:
    return run_seed_sweep(QUICK, small_fuzzy, [0, 1])


def test_select_best_follows_the_reward_kind():
    # precision 0.3 / recall 0.9 against precision 0.9 / recall 0.3: equal F1, F2 prefers recall
    entries = [entry("precise", 0.45, f1=0.45, f2=0.3214), entry("sensitive", 0.45, f1=0.45, f2=0.6429)]
    assert select_best(entries, RewardKind.F2).expression == "sensitive"
    with pytest.raises(ReportError):
        select_best([], RewardKind.F1)


def test_report_has_best_and_average_rows(sweep, small_fuzzy):
    comparison = report(sweep, small_fuzzy, 0.5)
    assert [row.row for row in comparison.rows] == ["best", "average"]
    best, average = comparison.rows
    assert best.method == "lukasiewicz"
    assert best.n_seeds == 2
    assert best.expression in {r.best.expression for r in sweep}
    assert average.expression is None
    assert best.metrics.f1 >= average.metrics.f1
    assert best.infix is not None and average.infix is None


def test_single_seed_best_equals_average(small_fuzzy):
    comparison = report(run_seed_sweep(QUICK, small_fuzzy, [0]), small_fuzzy, 0.5)
    best, average = comparison.rows
    assert best.metrics == average.metrics
    assert best.complexity == average.complexity


def test_pareto_front_rewards_increase_with_complexity(sweep, small_fuzzy):
    comparison = report(sweep, small_fuzzy, 0.5)
    front = comparison.pareto_front
    assert front
    for earlier, later in zip(front, front[1:], strict=False):
        assert earlier.complexity < later.complexity
        assert earlier.reward < later.reward
    pooled = {e.expression for r in sweep for e in r.hall_of_fame}
    assert {p.expression for p in front} <= pooled
    assert len(pareto_frame(comparison)) == len(front)


def test_rules_must_evaluate_on_the_test_split(sweep, small_fuzzy):
    ghost = sweep[0].model_copy(update={"best": entry("and_lk(x0, ghost)", 0.5, f1=0.5, f2=0.5)})
    with pytest.raises(ReportError, match="ghost"):
        report([ghost, *sweep[1:]], small_fuzzy, 0.5)


def test_empty_results_are_rejected(small_fuzzy):
    with pytest.raises(ReportError):
        report([], small_fuzzy, 0.5)


def test_text_rendering_lists_every_row(sweep, small_fuzzy):
    comparison = report(sweep, small_fuzzy, 0.5, selection_metric=RewardKind.F2)
    frame = report_frame(comparison)
    assert list(frame["row"]) == ["best", "average"]
    assert {"precision", "recall", "f1", "f2", "expression"} <= set(frame.columns)
    text = render_report_text(comparison)
    assert "selection=f2" in text
    assert "pareto front" in text
    assert "best rules" in text
