"""CLI commands, config round-trip, output formats, determinism."""

import json
import os
import xml.etree.ElementTree as ET

import pytest

from hanoispec.cli import (
    config_from_dict,
    config_hash,
    config_to_dict,
    load_config,
    main,
)
from hanoispec.errors import ConfigError


def base_config(outdir, **overrides):
    cfg = {
        "sequence": {"kind": "constant", "r": 0.5},
        "level": 2,
        "subdivisions": 2,
        "beta": 0.25,
        "grid": {"mode": "explicit", "points": 60,
                 "values": [5.0, 20.0, 80.0, 320.0, 1280.0]},
        "outputs": {"directory": str(outdir), "formats": ["csv", "json", "svg"]},
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestConfig:
    def test_round_trip(self):
        cfg = config_from_dict(base_config("out"))
        again = config_from_dict(config_to_dict(cfg))
        assert cfg == again
        assert config_hash(cfg) == config_hash(again)

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as exc:
            config_from_dict(base_config("out", typo=1))
        assert "typo" in str(exc.value)

    def test_bad_beta_names_key(self):
        with pytest.raises(ConfigError) as exc:
            config_from_dict(base_config("out", beta=0.4))
        assert "beta" in str(exc.value) and "1/3" in str(exc.value)

    def test_missing_sequence_key(self):
        cfg = base_config("out")
        del cfg["sequence"]
        with pytest.raises(ConfigError):
            config_from_dict(cfg)

    def test_load_reports_json_position(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\n  broken\n}")
        with pytest.raises(ConfigError) as exc:
            load_config(str(path))
        assert "line" in str(exc.value)


class TestValidateCommand:
    def test_good_config_exit_zero(self, tmp_path, capsys):
        cfgfile = write_config(tmp_path, base_config(tmp_path / "out", level=3))
        assert main(["validate", "--config", cfgfile]) == 0
        out = capsys.readouterr().out
        assert "d_S" in out and "all invariant checks pass" in out

    def test_bad_beta_exit_one(self, tmp_path):
        cfgfile = write_config(tmp_path, base_config(tmp_path / "out", beta=0.4))
        assert main(["validate", "--config", cfgfile]) == 1

    def test_bad_explicit_pair_nonzero_exit(self, tmp_path, capsys):
        cfg = base_config(
            tmp_path / "out",
            sequence={"kind": "explicit", "values": [0.5, 0.7], "tail": "cycle"},
        )
        cfgfile = write_config(tmp_path, cfg)
        code = main(["validate", "--config", cfgfile])
        assert code != 0
        assert "pair 2" in capsys.readouterr().out

    def test_quiet(self, tmp_path, capsys):
        cfgfile = write_config(tmp_path, base_config(tmp_path / "out"))
        assert main(["validate", "--config", cfgfile, "--quiet"]) == 0
        assert capsys.readouterr().out == ""


class TestSpectrumCommand:
    def test_m0_golden_eigenvalues(self, tmp_path):
        cfg = base_config(tmp_path / "out", level=0, subdivisions=1)
        cfgfile = write_config(tmp_path, cfg)
        assert main(["spectrum", "--config", cfgfile, "--quiet"]) == 0
        lines = (tmp_path / "out" / "eigenvalues.csv").read_text().splitlines()
        assert lines[0].startswith("# config=")
        assert lines[1] == "k,lambda,boundary"
        rows = [l.split(",") for l in lines[2:]]
        assert [r[2] for r in rows] == ["neumann"] * 3
        vals = [float(r[1]) for r in rows]
        assert vals[0] == pytest.approx(0.0, abs=1e-9)
        assert vals[1] == pytest.approx(9.0, rel=1e-9)
        assert vals[2] == pytest.approx(9.0, rel=1e-9)

    def test_multiplicity_table(self, tmp_path):
        cfg = base_config(tmp_path / "out", level=1, subdivisions=1)
        cfgfile = write_config(tmp_path, cfg)
        assert main(["spectrum", "--config", cfgfile, "--quiet"]) == 0
        text = (tmp_path / "out" / "multiplicity.csv").read_text()
        assert "neumann" in text and "dirichlet_v0" in text

    def test_size_error_suggests_counting(self, tmp_path, capsys):
        cfg = base_config(tmp_path / "out", level=3)
        cfg["solver"] = {"dense_limit": 10}
        cfgfile = write_config(tmp_path, cfg)
        assert main(["spectrum", "--config", cfgfile, "--quiet"]) == 1
        assert "counting" in capsys.readouterr().err

    def test_k_lowest_path(self, tmp_path):
        cfg = base_config(tmp_path / "out", level=3)
        cfg["solver"] = {"dense_limit": 10, "k_lowest": 4}
        cfgfile = write_config(tmp_path, cfg)
        assert main(["spectrum", "--config", cfgfile, "--quiet"]) == 0
        lines = (tmp_path / "out" / "eigenvalues.csv").read_text().splitlines()
        assert len([l for l in lines if l.endswith(",neumann")]) == 4


class TestCountingCommand:
    def _run(self, tmp_path, outname="out", **overrides):
        cfg = base_config(
            tmp_path / outname,
            level=3,
            grid={"mode": "auto", "points": 40},
            **overrides,
        )
        cfgfile = write_config(tmp_path, cfg, name=f"{outname}.json")
        code = main(["counting", "--config", cfgfile, "--quiet"])
        return code, tmp_path / outname

    def test_full_run(self, tmp_path):
        code, outdir = self._run(tmp_path, fit={"n_min": 10, "eta": 0.2,
                                                "slope_tol": 0.2})
        assert code == 0
        report = json.loads((outdir / "report.json").read_text())
        assert report["verdict"] == "pass"
        assert set(report["fit"]) >= {"slope", "stderr", "window", "predicted"}
        lines = (outdir / "counting.csv").read_text().splitlines()
        assert lines[1] == "x,n_dirichlet,n_neumann,lower_sum,upper_sum,weyl_ratio"

    def test_svg_well_formed(self, tmp_path):
        code, outdir = self._run(tmp_path, fit={"n_min": 10, "eta": 0.2,
                                                "slope_tol": 0.2})
        assert code == 0
        svg = (outdir / "loglog.svg").read_text()
        root = ET.fromstring(svg)
        ns = "{http://www.w3.org/2000/svg}"
        lines = root.findall(f".//{ns}line")
        circles = root.findall(f".//{ns}circle")
        assert len(lines) == 2
        report = json.loads((outdir / "report.json").read_text())
        assert len(circles) >= report["fit"]["n_points"]

    def test_bracketing_in_report(self, tmp_path):
        cfg = base_config(
            tmp_path / "outb",
            level=3,
            grid={"mode": "auto", "points": 30},
            bracketing_level=1,
            fit={"n_min": 10, "eta": 0.2, "slope_tol": 0.2},
        )
        cfgfile = write_config(tmp_path, cfg)
        assert main(["counting", "--config", cfgfile, "--quiet"]) == 0
        report = json.loads((tmp_path / "outb" / "report.json").read_text())
        assert report["bracketing"]["violations"] == []

    def test_insufficient_window_exit_two(self, tmp_path):
        cfg = base_config(tmp_path / "outx", level=1, subdivisions=1)
        cfg["grid"] = {"mode": "explicit", "values": [1.0, 2.0]}
        cfgfile = write_config(tmp_path, cfg)
        assert main(["counting", "--config", cfgfile, "--quiet"]) == 2


class TestResistanceCommand:
    def test_outputs(self, tmp_path):
        cfg = base_config(tmp_path / "outr", level=3, subdivisions=1)
        cfgfile = write_config(tmp_path, cfg)
        assert main(["resistance", "--config", cfgfile, "--quiet"]) == 0
        compat = (tmp_path / "outr" / "compatibility.csv").read_text().splitlines()
        assert compat[1] == "m,pair,resistance,deviation"
        first = compat[2].split(",")
        assert first[0] == "0"
        assert float(first[2]) == pytest.approx(2.0 / 3.0, rel=1e-9)
        report = json.loads((tmp_path / "outr" / "resistance_report.json").read_text())
        assert report["compatibility"]["ok"]
        assert report["verdict"] == "pass"
        assert "diameter_fit" in report

    def test_out_flag_overrides_directory(self, tmp_path):
        cfg = base_config(tmp_path / "ignored", level=1, subdivisions=1)
        cfgfile = write_config(tmp_path, cfg)
        target = tmp_path / "flagged"
        assert main(["resistance", "--config", cfgfile, "--quiet",
                     "--out", str(target)]) == 0
        assert (target / "compatibility.csv").exists()
        assert not (tmp_path / "ignored").exists()


class TestDeterminism:
    @pytest.mark.parametrize("command", ["spectrum", "counting", "resistance"])
    def test_byte_identical_reruns(self, tmp_path, command):
        cfg = base_config(
            tmp_path / "det",
            level=2,
            subdivisions=2,
            grid={"mode": "auto", "points": 25},
            fit={"n_min": 5, "eta": 0.35, "slope_tol": 0.5},
        )
        cfgfile = write_config(tmp_path, cfg)
        main([command, "--config", cfgfile, "--quiet"])
        snapshot = {
            name: (tmp_path / "det" / name).read_bytes()
            for name in os.listdir(tmp_path / "det")
        }
        main([command, "--config", cfgfile, "--quiet"])
        for name, blob in snapshot.items():
            assert (tmp_path / "det" / name).read_bytes() == blob
