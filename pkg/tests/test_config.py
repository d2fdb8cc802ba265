from pathlib import Path

import pytest

from fuzzydsr.config import ConfigError, Method, RunConfig, TrainConfig, load_run_config
from fuzzydsr.services.constraints import SearchMode
from fuzzydsr.services.fuzzy_ops import Semantics
from fuzzydsr.services.metrics import RewardKind
from fuzzydsr.services.tokens import LibraryMode


def write_toml(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def test_default_training_settings():
    cfg = TrainConfig()
    assert (cfg.batch_size, cfg.n_samples, cfg.epsilon) == (500, 200_000, 0.05)
    assert (cfg.learning_rate, cfg.entropy_weight, cfg.sigmoid_threshold) == (5e-4, 5e-3, 0.5)
    assert cfg.n_batches == 400
    assert cfg.method is Method.LUKASIEWICZ


@pytest.mark.parametrize(
    "kwargs",
    [
        {"batch_size": 500, "n_samples": 100},
        {"batch_size": 10, "epsilon": 0.05},
        {"library_mode": LibraryMode.COMBINED},
        {"semantics": None},
        {"min_length": 9, "max_length": 8},
        {"mode": SearchMode.CONSTRAINED, "max_length": 2, "min_length": 1},
    ],
)
def test_inconsistent_training_settings_are_rejected(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


def test_methods_map_to_libraries():
    assert Method.COMBINED.library == (LibraryMode.COMBINED, None)
    assert Method.PRODUCT.library == (LibraryMode.SINGLE, Semantics.PRODUCT)
    cfg = RunConfig(synthetic={"n_rows": 10}).train_config(Method.COMBINED, seed=4)
    assert cfg.semantics is None and cfg.seed == 4
    assert cfg.method is Method.COMBINED


def test_file_values_and_overrides(tmp_path: Path):
    path = write_toml(
        tmp_path / "run.toml",
        'csv_path = "data/paysim.csv"\nseeds = [1, 2]\nmethods = ["goedel", "combined"]\nbatch_size = 100\n'
        'reward_kind = "f2"\n',
    )
    config = load_run_config(path, {"batch_size": 200, "epsilon": None, "mode": "constrained"})
    assert config.csv_path == tmp_path / "data" / "paysim.csv"
    assert config.seeds == [1, 2]
    assert config.methods == [Method.GOEDEL, Method.COMBINED]
    assert config.batch_size == 200
    assert config.epsilon == 0.05
    assert config.reward_kind is RewardKind.F2
    assert config.mode is SearchMode.CONSTRAINED


def test_environment_fills_what_the_file_leaves_out(tmp_path: Path, monkeypatch):
    monkeypatch.setenv("FUZZYDSR_EPSILON", "0.1")
    monkeypatch.setenv("FUZZYDSR_BATCH_SIZE", "50")
    path = write_toml(tmp_path / "run.toml", "batch_size = 40\n[synthetic]\nn_rows = 100\n")
    config = load_run_config(path)
    assert config.epsilon == 0.1
    assert config.batch_size == 40


def test_exactly_one_data_source(tmp_path: Path):
    with pytest.raises(ConfigError, match="exactly one data source"):
        load_run_config(write_toml(tmp_path / "none.toml", "seeds = [0]\n"))
    both = write_toml(tmp_path / "both.toml", 'csv_path = "x.csv"\n[synthetic]\nn_rows = 10\n')
    with pytest.raises(ConfigError, match="exactly one data source"):
        load_run_config(both)


def test_bad_files_raise_config_errors(tmp_path: Path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "missing.toml")
    with pytest.raises(ConfigError, match="not valid TOML"):
        load_run_config(write_toml(tmp_path / "broken.toml", "seeds = [0\n"))
    with pytest.raises(ConfigError, match="Invalid training settings"):
        load_run_config(write_toml(tmp_path / "tiny.toml", "batch_size = 10\n[synthetic]\nn_rows = 10\n"))
    with pytest.raises(ConfigError):
        load_run_config(write_toml(tmp_path / "method.toml", 'methods = ["frank"]\n[synthetic]\nn_rows = 10\n'))
