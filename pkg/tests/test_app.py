import numpy as np
import orjson
import pandas as pd
import pytest
from typer.testing import CliRunner

from app import app, contaminated_report, main
from arith_coding import HEADER_SIZE
from config import EXIT_DATA, EXIT_GUARD, EXIT_OK, EXIT_USAGE
from mixtures import jeffreys_strategy
from model_families import bernoulli_mean
from regret_lab import worst_case_regret

KT = {"kind": "bayes", "family": "bernoulli_mean", "prior": {"kind": "jeffreys"}}
FAIR_COIN = {"kind": "fixed", "family": "bernoulli_mean", "theta": [0.5]}
SYMBOLS = "0110100111010001011101000011101011110000101"


@pytest.fixture
def coding_files(tmp_path):
    strategy = tmp_path / "kt.json"
    strategy.write_bytes(orjson.dumps(KT))
    source = tmp_path / "input.txt"
    source.write_text(SYMBOLS, encoding="utf-8")
    return strategy, source


class TestExitCodes:

    def test_nml(self):
        assert main(["nml", "--n", "1"]) == EXIT_OK

    def test_nml_on_a_restricted_box(self):
        assert main(["nml", "--n", "6", "--family", "bernoulli_natural", "--lo=-2", "--hi=2"]) == EXIT_OK

    def test_unknown_flag(self):
        assert main(["nml", "--n", "3", "--bogus"]) == EXIT_USAGE

    def test_missing_option(self):
        assert main(["nml"]) == EXIT_USAGE

    def test_unknown_family(self):
        assert main(["nml", "--n", "3", "--family", "no_such_family"]) == EXIT_USAGE

    def test_box_options_on_a_simplex_family(self):
        assert main(["nml", "--n", "3", "--lo", "0.1", "--hi", "0.9"]) == EXIT_USAGE

    def test_enumeration_guard(self):
        assert main(["nml", "--n", "4472", "--family", "multinomial3"]) == EXIT_GUARD

    def test_empty_strategy_list(self, tmp_path):
        config = tmp_path / "scan.json"
        config.write_bytes(orjson.dumps({"family": "bernoulli_mean", "strategies": [], "n": [4]}))
        assert main(["regret-scan", "--config", str(config), "--out", str(tmp_path / "r.csv")]) == EXIT_USAGE

    def test_nml_with_sampled_equalizer_check(self):
        assert main(["nml", "--n", "6", "--trials", "50", "--seed", "3"]) == EXIT_OK

    def test_demo_contaminated(self):
        assert main(["demo-contaminated"]) == EXIT_OK

    def test_demo_ideal_prior(self):
        assert main(["demo-ideal-prior", "--n", "100", "--n", "1000"]) == EXIT_OK


class TestRegretScan:

    def test_writes_csv(self, tmp_path):
        config = tmp_path / "scan.json"
        config.write_bytes(orjson.dumps({
            "family": "bernoulli_mean",
            "strategies": [KT, {"kind": "nml", "id": "nml"}],
            "n": [6],
            "strings": "all",
        }))
        out = tmp_path / "regret.csv"
        assert main(["regret-scan", "--config", str(config), "--out", str(out)]) == EXIT_OK
        frame = pd.read_csv(out)
        assert frame["strategy"].tolist() == ["bayes", "nml"]

    def test_needs_an_output(self, tmp_path):
        config = tmp_path / "scan.json"
        config.write_bytes(orjson.dumps({"family": "bernoulli_mean", "strategies": [KT], "n": [4]}))
        assert main(["regret-scan", "--config", str(config)]) == EXIT_USAGE

    def test_compare(self, tmp_path):
        config = tmp_path / "scan.json"
        config.write_bytes(orjson.dumps({"family": "bernoulli_mean", "strategies": [KT], "n": [5]}))
        assert main(["compare", "--config", str(config)]) == EXIT_OK


class TestCoding:

    def test_round_trip(self, coding_files, tmp_path):
        strategy, source = coding_files
        container = tmp_path / "input.mnx"
        restored = tmp_path / "restored.txt"
        assert main(["compress", str(source), str(container), "--strategy", str(strategy)]) == EXIT_OK
        assert main(["decompress", str(container), str(restored), "--strategy", str(strategy)]) == EXIT_OK
        assert restored.read_text(encoding="utf-8") == SYMBOLS

    def test_truncated_container(self, coding_files, tmp_path):
        strategy, source = coding_files
        container = tmp_path / "input.mnx"
        assert main(["compress", str(source), str(container), "--strategy", str(strategy)]) == EXIT_OK
        container.write_bytes(container.read_bytes()[:-1])
        assert main(["decompress", str(container), str(tmp_path / "out.txt"), "--strategy", str(strategy)]) == EXIT_DATA

    def test_digest_mismatch(self, coding_files, tmp_path):
        strategy, source = coding_files
        container = tmp_path / "input.mnx"
        assert main(["compress", str(source), str(container), "--strategy", str(strategy)]) == EXIT_OK
        other = tmp_path / "dirichlet.json"
        other.write_bytes(orjson.dumps({**KT, "prior": {"kind": "dirichlet_alpha", "alpha": 0.25}}))
        assert main(["decompress", str(container), str(tmp_path / "out.txt"), "--strategy", str(other)]) == EXIT_DATA

    def test_not_a_container(self, coding_files, tmp_path):
        strategy, _ = coding_files
        junk = tmp_path / "junk.mnx"
        junk.write_bytes(b"hello world, not a container at all.......")
        assert main(["decompress", str(junk), str(tmp_path / "out.txt"), "--strategy", str(strategy)]) == EXIT_DATA


class TestContaminatedReport:

    def test_two_maximizers_at_the_critical_radius(self):
        report = contaminated_report(5.0, 0.01)
        assert report["critical radius c"] == pytest.approx(3.78, abs=0.01)
        assert report["J_hat_1(c) at theta=0"] < 0.0
        assert report["multiple maximizers"]
        assert report["theta_hat"] != report["mirror maximizer"]


class TestCliRunner:

    @pytest.fixture
    def runner(self):
        return CliRunner()

    def test_kt_beats_a_fair_coin_on_a_biased_file(self, runner, tmp_path):
        rng = np.random.default_rng(5)
        source = tmp_path / "biased.txt"
        source.write_text("".join("1" if u < 0.9 else "0" for u in rng.uniform(size=10_000)), encoding="utf-8")
        sizes = {}
        for name, spec in (("kt", KT), ("fair", FAIR_COIN)):
            strategy = tmp_path / f"{name}.json"
            strategy.write_bytes(orjson.dumps(spec))
            container = tmp_path / f"{name}.mnx"
            result = runner.invoke(app, ["compress", str(source), str(container), "--strategy", str(strategy)])
            assert result.exit_code == 0, result.output
            sizes[name] = len(container.read_bytes()) - HEADER_SIZE
        assert 8 * (sizes["fair"] - sizes["kt"]) / 10_000 >= 0.3

    def test_regret_scan_is_byte_identical_across_runs(self, runner, tmp_path):
        config = tmp_path / "scan.json"
        config.write_bytes(orjson.dumps({
            "family": "bernoulli_mean",
            "strategies": [KT, {"kind": "theorem8", "id": "simplex-mix", "mix_weight": 0.1, "tau": 0.05}],
            "n": [8, 16],
            "strings": "all",
        }))
        outputs = [tmp_path / "first.csv", tmp_path / "second.csv"]
        for out in outputs:
            result = runner.invoke(app, ["regret-scan", "--config", str(config), "--out", str(out)])
            assert result.exit_code == 0, result.output
        assert outputs[0].read_bytes() == outputs[1].read_bytes()

    def test_reports_serialize_identically(self):
        kt = jeffreys_strategy(bernoulli_mean())
        dumps = [worst_case_regret(kt, bernoulli_mean(), None, 12, strings="all").model_dump_json() for _ in range(2)]
        assert dumps[0] == dumps[1]
