import csv
import json
import math
import os

import numpy as np
import pytest

from dichromatic import cli
from dichromatic.config import DEFAULTS, ConfigError, build

from .conftest import GAMMA, GAMMA_M, OMEGA_M


def run(tmp_path, command, doc=None, *extra):
    args = [command, "--out", str(tmp_path / "out")]
    if doc is not None:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        args += ["--config", str(path)]
    return cli.main(args + list(extra))


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


class TestSpectrum:
    def test_sweep_minimum_is_sql(self, tmp_path):
        assert run(tmp_path, "spectrum") == 0
        header, data = read_csv(tmp_path / "out" / "spectrum.csv")
        assert tuple(header) == cli.SPECTRUM_HEADER
        for w in np.unique(data[:, 0]):
            block = data[data[:, 0] == w]
            assert block[:, 2].min() == pytest.approx(block[0, 6], rel=1e-9)

    def test_combined_ratio_at_hundredfold_power(self, tmp_path):
        doc = {"power": {"K_sweep_over_sql": [100.0]}, "grid": {"points": [0.0, GAMMA_M]}}
        assert run(tmp_path, "spectrum", doc) == 0
        _, data = read_csv(tmp_path / "out" / "spectrum.csv")
        assert data[0, 3] / data[0, 6] == pytest.approx(0.005, rel=1e-12)

    def test_lossless_oscillator_skips_degenerate_point(self, tmp_path, capsys):
        doc = {"params": {"gamma_m": 0.0}, "power": {"K_sweep_over_sql": [1.0]},
               "grid": {"points": [0.0, 100.0]}}
        assert run(tmp_path, "spectrum", doc) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["skipped_omega"] == [0.0]
        _, data = read_csv(tmp_path / "out" / "spectrum.csv")
        assert data.shape[0] == 1 and data[0, 2] == pytest.approx(data[0, 6], rel=1e-12)

    def test_round_trip_formatting(self, tmp_path):
        assert run(tmp_path, "spectrum", {"grid": {"n": 7}}) == 0
        with open(tmp_path / "out" / "spectrum.csv") as fh:
            fh.readline()
            for field in fh.readline().strip().split(","):
                assert cli.fmt(float(field)) == field
        assert not [f for f in os.listdir(tmp_path / "out") if f.startswith(".tmp")]

    def test_json_and_svg(self, tmp_path):
        assert run(tmp_path, "spectrum", {"grid": {"n": 5}}, "--format", "json", "--format", "svg") == 0
        dump = json.loads((tmp_path / "out" / "spectrum.json").read_text())
        first = dump["points"][0]["rows"]["raw_minus_amplitude"]
        assert set(first["coeffs"]) >= {"alpha_a+", "f_phi"}
        assert (tmp_path / "out" / "spectrum.svg").read_text().lstrip().startswith("<?xml")

    def test_svg_deterministic(self, tmp_path):
        run(tmp_path, "spectrum", {"grid": {"n": 5}}, "--format", "svg")
        a = (tmp_path / "out" / "spectrum.svg").read_bytes()
        run(tmp_path, "spectrum", {"grid": {"n": 5}}, "--format", "svg")
        assert a == (tmp_path / "out" / "spectrum.svg").read_bytes()


class TestErrors:
    def test_empty_grid(self, tmp_path, capsys):
        assert run(tmp_path, "spectrum", {"grid": {"points": []}}) == 1
        assert "grid" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path):
        assert run(tmp_path, "spectrum", {"params": {"gama": 1.0}}) == 1

    def test_bad_json(self, tmp_path):
        (tmp_path / "bad.json").write_text("{not json")
        assert cli.main(["spectrum", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path)]) == 1

    def test_missing_config_is_io(self, tmp_path):
        assert cli.main(["spectrum", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert cli.main(["spectrum", "--out", str(blocker / "sub")]) == 2

    def test_no_command(self):
        assert cli.main([]) == 1

    def test_build_defaults(self):
        cfg = build({})
        assert cfg.params.K0 == pytest.approx(GAMMA_M)
        assert len(cfg.grid) == DEFAULTS["grid"]["n"]
        with pytest.raises(ConfigError):
            build({"power": {"K0": 1.0, "K_sweep_over_sql": [1.0]}})
        with pytest.raises(ConfigError):
            build({"params": {"gamma_m": 0.0}, "power": {"K0_over_gamma_m": 1.0}})

    def test_temperature_sets_occupation(self):
        cfg = build({"params": {"temperature": 1.0, "thermal_on": True}})
        assert cfg.params.n_T == pytest.approx(1 / math.expm1(1.054571817646e-34 * 2 * math.pi * 1e6 / (1.380649e-23 * 1.0)), rel=1e-9)


class TestOptimize:
    def test_raw_and_sideband_optima(self, tmp_path):
        doc = {"grid": {"n": 21}, "strategies": ["raw_minus_amplitude", "combined_amplitude"]}
        assert run(tmp_path, "optimize", doc) == 0
        report = json.loads((tmp_path / "out" / "optimize.json").read_text())
        for p in report["points"]:
            w = p["omega"]
            raw = p["strategies"]["raw_minus_amplitude"]
            assert raw["K_opt"] == pytest.approx(math.hypot(GAMMA_M, w), rel=1e-9)
            sb = p["strategies"]["sidebands"]
            k36 = 2 * OMEGA_M * math.sqrt((GAMMA_M ** 2 + w ** 2) / (GAMMA ** 2 + w ** 2))
            assert sb["K_opt"] == pytest.approx(k36, rel=1e-9)
            assert "note" in p["strategies"]["combined_amplitude"]
        assert report["checks"][0]["passed"]

    def test_filtered_lossless(self, tmp_path):
        doc = {"params": {"gamma_m": 0.0}, "power": {"K0": 1e4}, "grid": {"points": [50.0, 500.0, 5000.0]},
               "strategies": ["combined_amplitude"]}
        assert run(tmp_path, "optimize", doc, "--format", "svg") == 0
        report = json.loads((tmp_path / "out" / "optimize.json").read_text())
        for p in report["points"]:
            rec = p["strategies"]["filtered"]
            assert rec["S_f_min"] == pytest.approx(GAMMA * p["omega"] ** 2 / (2 * OMEGA_M ** 2), rel=1e-12)
            assert rec["S_f_min"] == pytest.approx(rec["S_f_expected"], rel=1e-12)

    def test_generalized_pair(self, tmp_path):
        doc = {"grid": {"points": [0.0, 300.0]}, "strategies": [{"kind": "generalized_pair", "varphi": 0.4}],
               "sidebands": {"enabled": False}}
        assert run(tmp_path, "optimize", doc) == 0


class TestVerify:
    def test_canonical_passes(self, tmp_path):
        assert run(tmp_path, "verify", {"grid": {"n": 11}}) == 0
        report = json.loads((tmp_path / "out" / "verify.json").read_text())
        assert report["passed"]
        gap = next(c for c in report["checks"] if c["name"] == "sideband_approximation_gap")
        assert gap["passed"] and gap["detail"]["max_gap"] <= gap["detail"]["max_bound"]

    def test_injected_fault(self, tmp_path, capsys):
        assert run(tmp_path, "verify", {"grid": {"n": 5}}, "--inject-fault", "beta_a-") == 3
        report = json.loads(capsys.readouterr().out)
        assert "oracle_rows" in {c["name"] for c in report["checks"] if not c["passed"]}


class TestSteady:
    def test_compensation_scenarios(self, tmp_path):
        assert run(tmp_path, "steady", {"steady": {"A_plus": 1e5, "A_minus": 1e5}}) == 0
        report = json.loads((tmp_path / "out" / "steady.json").read_text())
        assert [c["eta_e"] for c in report["compensation"]] == [1.0, 0.01]
        for c in report["compensation"]:
            assert c["relative_residual"] <= 1e-12
        assert report["nu_g2_A_plus2"] == pytest.approx(1e10 * 2 / GAMMA / (GAMMA * GAMMA_M), rel=1e-12)

    def test_paper_mode(self, tmp_path):
        assert run(tmp_path, "steady", {"steady": {"paper_mode": True}}) == 0
        report = json.loads((tmp_path / "out" / "steady.json").read_text())
        assert report["D"] == [0.0, 0.0]


class TestMonteCarlo:
    DOC = {"power": {"K0_over_gamma_m": 100.0},
           "montecarlo": {"duration": 1.2, "segment_length": 1024,
                          "force": {"f_s0_over_threshold": 10.0, "tau": 0.05, "t_start": 0.7}}}

    def test_reproducible_and_detects(self, tmp_path):
        assert run(tmp_path, "montecarlo", self.DOC, "--seed", "4") == 0
        out = tmp_path / "out"
        first = {f: (out / f).read_bytes() for f in os.listdir(out) if f.endswith(".csv")}
        report = json.loads((out / "montecarlo.json").read_text())
        assert report["seed"] == 4
        assert 10 * 0.7 <= report["detection"]["snr"] <= 10 * 1.3 * 1.2
        assert run(tmp_path, "montecarlo", self.DOC, "--seed", "4") == 0
        assert first == {f: (out / f).read_bytes() for f in first}

    def test_null_injection(self, tmp_path):
        doc = json.loads(json.dumps(self.DOC))
        doc["montecarlo"]["force"]["f_s0_over_threshold"] = 0.0
        assert run(tmp_path, "montecarlo", doc, "--seed", "9") == 0
        report = json.loads((tmp_path / "out" / "montecarlo.json").read_text())
        assert abs(report["detection"]["snr"]) < 3


def test_schema_dump(capsys):
    assert cli.main(["--schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert schema["additionalProperties"] is False and "default" in schema


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "envout"))
    assert cli.main(["steady"]) == 0
    assert (tmp_path / "envout" / "steady.json").exists()
