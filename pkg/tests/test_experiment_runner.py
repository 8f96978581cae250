import math

import orjson
import pandas as pd
import pytest

from config import REGRET_CSV_COLUMNS
from exceptions import ConfigurationError, DomainError
from experiment_runner import ExperimentConfig, ExperimentRunner, load_experiment, resolve_for_n
from mixtures import StrategySpec
from model_families import build_family
from priors import PriorSpec
from spec_loader import detect_format, load_family_spec, load_strategy_spec, read_symbols, write_symbols

SCAN = {
    "family": "bernoulli_mean",
    "strategies": [
        {"kind": "bayes", "id": "kt", "prior": {"kind": "jeffreys"}},
        {"kind": "nml", "id": "nml"},
    ],
    "n": [4, 8],
    "strings": "all",
}


def _write_json(path, payload):
    path.write_bytes(orjson.dumps(payload))
    return path


class TestLoadExperiment:

    def test_valid_config(self, tmp_path):
        config = load_experiment(_write_json(tmp_path / "scan.json", SCAN))
        assert [s.label for s in config.strategies] == ["kt", "nml"]
        assert config.strings == "all"

    def test_empty_strategies(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_experiment(_write_json(tmp_path / "scan.json", {**SCAN, "strategies": []}))

    def test_unknown_field(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_experiment(_write_json(tmp_path / "scan.json", {**SCAN, "bogus": 1}))

    def test_nonpositive_length(self, tmp_path):
        with pytest.raises(ConfigurationError, match="at least 1"):
            load_experiment(_write_json(tmp_path / "scan.json", {**SCAN, "n": [4, 0]}))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigurationError, match="invalid JSON"):
            load_experiment(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_experiment(tmp_path / "absent.json")


class TestResolveForN:

    def test_fills_n_for_length_dependent_kinds(self):
        assert resolve_for_n(StrategySpec(kind="nml"), 12, 1).n == 12
        assert resolve_for_n(StrategySpec(kind="bayes"), 12, 1).n is None

    def test_keeps_explicit_n(self):
        assert resolve_for_n(StrategySpec(kind="theorem5", n=64), 12, 1).n == 64

    def test_ideal_prior_gets_n_and_seed(self):
        spec = StrategySpec(kind="composite", weights=[1.0], children=[
            StrategySpec(kind="bayes", prior=PriorSpec(kind="ideal")),
        ])
        child = resolve_for_n(spec, 30, 99).children[0]
        assert child.prior.n == 30 and child.prior.mc_seed == 99


class TestExperimentRunner:

    def test_scan_order_and_csv(self, tmp_path):
        config = ExperimentConfig.model_validate(SCAN)
        out = tmp_path / "regret.csv"
        reports = ExperimentRunner(config).run(out=out, show_progress=False)
        assert [(r.n, r.strategy) for r in reports] == [(4, "kt"), (4, "nml"), (8, "kt"), (8, "nml")]
        frame = pd.read_csv(out, dtype={"argmax_counts": str})
        assert list(frame.columns) == REGRET_CSV_COLUMNS
        assert frame.loc[2, "argmax_counts"] in ("0|8", "8|0")
        expected = -sum(math.log((i - 0.5) / i) for i in range(1, 9))
        assert frame.loc[2, "max_regret_nats"] == pytest.approx(expected, rel=1e-11)

    def test_compare_against_shtarkov(self):
        runner = ExperimentRunner(ExperimentConfig.model_validate(SCAN))
        reports, shtarkov = runner.compare(6)
        assert all(r.max_regret_nats >= shtarkov - 1e-9 for r in reports)
        nml = next(r for r in reports if r.strategy == "nml")
        assert nml.max_regret_nats == pytest.approx(shtarkov, abs=1e-9)

    def test_against_jeffreys(self):
        runner = ExperimentRunner(ExperimentConfig.model_validate(SCAN))
        reports, _ = runner.compare(6)
        kt, nml = runner.against_jeffreys(reports, 6)
        assert kt.label == nml.label == "not_good"
        assert kt.improved == 0 and kt.worst_loss == 0.0
        assert nml.classes == kt.classes

    def test_jeffreys_constant_is_cached(self):
        runner = ExperimentRunner(ExperimentConfig.model_validate(SCAN))
        assert runner.jeffreys == pytest.approx(math.pi, rel=1e-6)
        assert runner._jeffreys is not None

    def test_domain_dimension_mismatch(self):
        config = ExperimentConfig.model_validate({**SCAN, "domain": {"shape": "box", "lo": [0.1, 0.1],
                                                                     "hi": [0.2, 0.2]}})
        with pytest.raises(ConfigurationError):
            ExperimentRunner(config)


class TestSpecLoader:

    def test_family_preset_name(self, tmp_path):
        assert load_family_spec(_write_json(tmp_path / "family.json", "multinomial3")) == "multinomial3"

    def test_family_document(self, tmp_path):
        payload = {"kind": "exponential", "d": 1, "name": "coin", "alphabet": [0, 1],
                   "sufficient_stat": [[0.0], [1.0]],
                   "domain": {"shape": "clipped", "lo": [-4.0], "hi": [4.0]}}
        spec = load_family_spec(_write_json(tmp_path / "family.json", payload))
        assert build_family(spec).k == 2

    def test_strategy_validation_error(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_strategy_spec(_write_json(tmp_path / "strategy.json", {"kind": "fixed"}))

    def test_strategy_document(self, tmp_path):
        spec = load_strategy_spec(_write_json(tmp_path / "strategy.json",
                                              {"kind": "theorem8", "n": 256, "mix_weight": 0.1, "tau": 0.05}))
        assert spec.kind == "theorem8" and spec.mix_weight == 0.1

    @pytest.mark.parametrize("name, fmt", [("a.txt", "digits"), ("a.tok", "tokens"), ("a.csv", "tokens"),
                                           ("a.bin", "bits")])
    def test_detect_format(self, name, fmt):
        assert detect_format(name) == fmt

    @pytest.mark.parametrize("fmt, suffix", [("bits", ".bin"), ("digits", ".txt"), ("tokens", ".tok")])
    def test_symbol_files(self, bernoulli, tmp_path, fmt, suffix):
        symbols = [1, 0, 0, 1, 1, 1, 0, 1, 0, 0, 0, 0, 1, 1, 1, 1]
        path = tmp_path / f"symbols{suffix}"
        write_symbols(path, symbols, fmt)
        assert read_symbols(path, bernoulli) == symbols

    def test_negative_tokens(self, tmp_path):
        family = build_family("poisson_truncated")
        path = tmp_path / "counts.tok"
        path.write_text("0, -3 -1\n-2", encoding="utf-8")
        assert read_symbols(path, family) == [0, -3, -1, -2]

    def test_symbol_outside_alphabet(self, bernoulli, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0102", encoding="utf-8")
        with pytest.raises(DomainError):
            read_symbols(path, bernoulli)

    def test_digits_reject_letters(self, bernoulli, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("01a1", encoding="utf-8")
        with pytest.raises(DomainError):
            read_symbols(path, bernoulli)

    def test_bits_need_whole_bytes(self, tmp_path):
        with pytest.raises(ConfigurationError):
            write_symbols(tmp_path / "x.bin", [1, 0, 1], "bits")
