import json

import pytest

from pilotmix.cli import main

PAPER_FIG3 = {
    "n_slots": 62,
    "n_pilots": 128,
    "n_antennas": 256,
    "payload_symbols": 256,
    "lambda": {"2": 1.0},
    "psi": {"2": 1.0},
    "snr_db": 10.0,
    "receiver_mode": "Nested",
    "framed": True,
}

TOY = {
    "n_slots": 4,
    "n_pilots": 8,
    "n_antennas": 16,
    "payload_symbols": 256,
    "lambda": {"2": 1.0},
    "psi": {"2": 1.0},
    "snr_db": 10.0,
    "receiver_mode": "Nested",
    "framed": True,
}


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def rows_of(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


class TestBounds:
    def test_floor_reference_values(self, tmp_path, capsys):
        cfg = write_config(tmp_path, PAPER_FIG3)
        out = tmp_path / "bounds.csv"
        code = main([
            "bounds", "--config", cfg, "--sweep", "k_a=1800:1800:1",
            "--p-orders", "1,2", "--out", str(out),
        ])
        assert code == 0
        floors = {r["p_or_psi"]: float(r["plr"]) for r in rows_of(out) if r["mode"] == "floor"}
        assert float(f"{floors['x^1']:.1e}") == 5.7e-5
        assert float(f"{floors['x^2']:.1e}") == 1.4e-8

    def test_default_uses_config_psi(self, tmp_path):
        cfg = write_config(tmp_path, PAPER_FIG3)
        out = tmp_path / "bounds.csv"
        assert main(["bounds", "--config", cfg, "--sweep", "k_a=400:400:1", "--out", str(out)]) == 0
        rows = rows_of(out)
        assert {r["mode"] for r in rows} == {"floor", "nosic"}
        nosic = [r for r in rows if r["mode"] == "nosic"][0]
        assert 5e-4 < float(nosic["plr"]) < 2e-3


class TestSimulate:
    def test_oracle_sweep_to_csv(self, tmp_path):
        cfg = write_config(tmp_path, TOY)
        out = tmp_path / "sim.csv"
        code = main([
            "simulate", "--config", cfg, "--engine", "CollisionOracle",
            "--sweep", "k_a=2:4:2", "--trials", "20", "--seed", "7",
            "--out", str(out),
        ])
        assert code == 0
        rows = rows_of(out)
        assert [r["swept_value"] for r in rows] == ["2", "4"]
        assert all(r["engine"] == "CollisionOracle" for r in rows)

    def test_reruns_are_byte_identical_modulo_walltime(self, tmp_path):
        cfg = write_config(tmp_path, TOY)
        outputs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            main([
                "simulate", "--config", cfg, "--engine", "CollisionOracle",
                "--sweep", "k_a=3:3:1", "--trials", "30", "--seed", "11",
                "--out", str(out),
            ])
            outputs.append([l.rsplit(",", 1)[0] for l in out.read_text().splitlines()])
        assert outputs[0] == outputs[1]

    def test_mode_override(self, tmp_path):
        cfg = write_config(tmp_path, TOY)
        out = tmp_path / "sim.csv"
        main([
            "simulate", "--config", cfg, "--engine", "CollisionOracle",
            "--mode", "NoSic", "--sweep", "k_a=2:2:1", "--trials", "5",
            "--out", str(out),
        ])
        assert rows_of(out)[0]["mode"] == "NoSic"

    def test_sweep_variable_must_match_framing(self, tmp_path, capsys):
        cfg = write_config(tmp_path, TOY)
        code = main(["simulate", "--config", cfg, "--sweep", "k_s=2:2:1", "--trials", "1"])
        assert code == 2
        assert "error" in capsys.readouterr().err


class TestErrors:
    def test_missing_config_file(self, capsys):
        code = main(["simulate", "--config", "/no/such/file.json", "--sweep", "k_a=1:1:1"])
        assert code == 2
        err = capsys.readouterr().err
        assert json.loads(err.strip())["error"]

    def test_unknown_config_field(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dict(TOY, extra=1))
        code = main(["bounds", "--config", cfg, "--sweep", "k_a=1:1:1"])
        assert code == 2
        assert "unknown" in capsys.readouterr().err

    def test_invalid_config_value(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dict(TOY, n_pilots=100))
        code = main(["simulate", "--config", cfg, "--sweep", "k_a=1:1:1"])
        assert code == 2
        assert "power of two" in capsys.readouterr().err


class TestVerify:
    def test_verify_passes_and_reports_modules(self, capsys):
        assert main(["verify"]) == 0
        out = capsys.readouterr().out
        for module in ("core", "baseband", "codec", "receiver", "collision", "analysis", "harness"):
            assert f"PASS {module}:" in out


class TestTrace:
    def test_trace_lines(self, tmp_path, capsys):
        cfg = write_config(tmp_path, TOY)
        out = tmp_path / "trace.log"
        code = main(["trace", "--config", cfg, "--k", "2", "--seed", "3", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines, "expected at least one decode event"
        for line in lines:
            fields = dict(part.split("=") for part in line.split())
            assert set(fields) == {"trial", "slot", "pilot", "sic", "user", "phase"}
            assert fields["phase"] in ("inner", "outer")
