import csv
import io
import json

import pytest

from symproj import cli


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def strip_wall_time(text):
    return "\n".join(line.rsplit(",", 1)[0] for line in text.splitlines())


def scenario(tmp_path, **kw):
    sc = {"name": "t", "experiment": "theorem-check", "system": {"kind": "spins", "N": 3},
          "sweep": {"parameter": "replicate", "count": 4},
          "output": {"csv": str(tmp_path / "out.csv"), "json": str(tmp_path / "out.json")}}
    sc.update(kw)
    return sc


def write_config(tmp_path, sc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(sc))
    return str(p)


class TestRun:
    def test_theorem_check_50_seeds(self, tmp_path):
        out = tmp_path / "tc.csv"
        code = cli.main(["theorem-check", "--N", "4", "--seeds", "50", "--csv", str(out),
                         "--json", str(tmp_path / "tc.json")])
        assert code == 0
        rows = read_csv(out)
        assert len(rows) == 50 and all(r["passed"] == "true" for r in rows)
        assert [int(r["seed"]) for r in rows] == list(range(50))  # seed 0 xor index
        ranks = {int(r["rank"]) for r in rows}
        assert ranks == set(range(1, 9))
        summary = json.loads((tmp_path / "tc.json").read_text())
        assert summary["passed"] and summary["rows"] == 50

    def test_seed_xor_index(self, tmp_path):
        cfg = write_config(tmp_path, scenario(tmp_path, seed=12345))
        assert cli.run(cfg) == 0
        assert [int(r["seed"]) for r in read_csv(tmp_path / "out.csv")] == [12345 ^ i for i in range(4)]

    def test_rows_carry_tolerances(self, tmp_path):
        cfg = write_config(tmp_path, scenario(tmp_path, tolerances={"theorem": 1e-9}))
        assert cli.run(cfg) == 0
        for r in read_csv(tmp_path / "out.csv"):
            assert float(r["tol_theorem"]) == 1e-9
            assert float(r["tol_xi"]) == cli.DEFAULT_TOLERANCES["xi"]
            assert r["seed"] != "" and float(r["wall_time"]) >= 0

    def test_float_format(self, tmp_path):
        cfg = write_config(tmp_path, scenario(tmp_path))
        cli.run(cfg)
        row = read_csv(tmp_path / "out.csv")[0]
        mantissa = row["qfi"].split("e")[0]
        assert len(mantissa.replace(".", "").lstrip("-")) == 17

    def test_theorem_failure_exit_2(self, tmp_path):
        cfg = write_config(tmp_path, scenario(tmp_path, generator={"kind": "collective", "axis": "x"}))
        assert cli.run(cfg) == 2
        rows = read_csv(tmp_path / "out.csv")
        assert all(r["passed"] == "false" for r in rows)

    def test_rank_sweep(self, tmp_path):
        sc = scenario(tmp_path, sweep={"parameter": "rank", "values": [1, 2, 4]})
        assert cli.run(write_config(tmp_path, sc)) == 0
        assert [int(r["rank"]) for r in read_csv(tmp_path / "out.csv")] == [1, 2, 4]

    def test_dicke_system(self, tmp_path):
        sc = scenario(tmp_path, system={"kind": "dicke", "N": 12})
        assert cli.run(write_config(tmp_path, sc)) == 0


class TestReproducibility:
    def test_byte_identical(self, tmp_path):
        sc = scenario(tmp_path, seed=7)
        cfg = write_config(tmp_path, sc)
        cli.run(cfg)
        first = (tmp_path / "out.csv").read_text()
        cli.run(cfg)
        second = (tmp_path / "out.csv").read_text()
        assert strip_wall_time(first) == strip_wall_time(second)

    def test_workers_do_not_change_rows(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path, scenario(tmp_path, seed=3))
        cli.run(cfg, workers=1)
        serial = (tmp_path / "out.csv").read_text()
        monkeypatch.setenv(cli.WORKERS_ENV, "2")
        cli.run(cfg)
        parallel = (tmp_path / "out.csv").read_text()
        assert strip_wall_time(serial) == strip_wall_time(parallel)

    def test_bad_worker_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.WORKERS_ENV, "many")
        assert cli.run(write_config(tmp_path, scenario(tmp_path))) == 1


class TestErrors:
    def test_malformed_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert cli.run(str(p)) == 1
        assert not any(tmp_path.glob("out.*"))

    def test_missing_file(self, tmp_path):
        assert cli.run(str(tmp_path / "missing.json")) == 1

    def test_schema_violation(self, tmp_path):
        sc = scenario(tmp_path)
        sc["system"]["N"] = 0
        assert cli.run(write_config(tmp_path, sc)) == 1
        sc = scenario(tmp_path, bogus=1)
        assert cli.run(write_config(tmp_path, sc)) == 1
        assert not (tmp_path / "out.csv").exists()

    def test_cap_exceeded(self, tmp_path):
        sc = scenario(tmp_path, system={"kind": "spins", "N": 13})
        assert cli.run(write_config(tmp_path, sc)) == 1
        sc = scenario(tmp_path, experiment="bec", system={"kind": "bosons", "N": 8, "NA": 8, "NB": 8})
        assert cli.run(write_config(tmp_path, sc)) == 1
        assert not any(tmp_path.glob("out.*"))

    def test_incompatible_system(self, tmp_path):
        sc = scenario(tmp_path, experiment="ramp", system={"kind": "dicke", "N": 4})
        assert cli.run(write_config(tmp_path, sc)) == 1

    def test_rank_out_of_range(self, tmp_path):
        sc = scenario(tmp_path, sweep={"parameter": "rank", "values": [9]})
        assert cli.run(write_config(tmp_path, sc)) == 1

    def test_runtime_error_leaves_no_output(self, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise RuntimeError("solver exploded")
        monkeypatch.setitem(cli.RUNNERS, "theorem-check", boom)
        assert cli.run(write_config(tmp_path, scenario(tmp_path))) == 1
        assert not any(tmp_path.glob("out.*"))
        assert not any(tmp_path.glob(".out*"))

    def test_validate_only(self, tmp_path, capsys):
        cfg = write_config(tmp_path, scenario(tmp_path))
        assert cli.main(["run", cfg, "--validate-only"]) == 0
        assert "valid" in capsys.readouterr().out
        assert not (tmp_path / "out.csv").exists()


class TestSubcommands:
    def run_csv(self, argv, capsys):
        code = cli.main(argv)
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        return code, rows

    def test_schema(self, capsys):
        assert cli.main(["schema"]) == 0
        assert json.loads(capsys.readouterr().out)["title"] == "symproj scenario"

    def test_bec(self, capsys):
        code, rows = self.run_csv(["bec", "--N", "2", "--NA", "1", "--NB", "1", "--ideal"], capsys)
        assert code == 0 and len(rows) == 1
        r = rows[0]
        assert float(r["qfi"]) == pytest.approx(4.0)
        assert float(r["f_sep"]) == pytest.approx(3.0)
        assert r["entangled"] == "true"

    def test_bec_diagonal(self, capsys):
        code, rows = self.run_csv(["bec", "--N", "3", "--NA", "2", "--NB", "2", "--diagonal"], capsys)
        assert code == 0 and rows[0]["entangled"] == "false"

    def test_circuit(self, capsys):
        code, rows = self.run_csv(["circuit", "--N", "4", "--input", "css-x"], capsys)
        assert code == 0
        assert [float(r["probability"]) for r in rows] == pytest.approx([0.5, 0.5])
        assert [float(r["qfi_Jx"]) for r in rows] == pytest.approx([16.0, 16.0])

    @pytest.mark.parametrize("inp", ["cat", "zero", "classical-x", "random"])
    def test_circuit_inputs(self, inp, capsys):
        code, rows = self.run_csv(["circuit", "--N", "3", "--input", inp], capsys)
        assert code == 0 and len(rows) == 2

    def test_oat_sweep(self, capsys):
        code, rows = self.run_csv(["oat-sweep", "--N", "8", "--points", "9"], capsys)
        assert code == 0 and len(rows) == 9
        for r in rows:
            assert float(r["qfi_Jy"]) == pytest.approx(float(r["four_Jy2"]), rel=1e-8)
        assert float(rows[-1]["qfi_Jx"]) == pytest.approx(64.0, rel=1e-6)

    def test_ramp(self, tmp_path, capsys):
        js = tmp_path / "ramp.json"
        code, rows = self.run_csv(["ramp", "--N", "6", "--model", "ising", "--omega-from", "5",
                                   "--omega-to", "0.1", "--T", "50", "--json", str(js)], capsys)
        assert code == 0 and rows
        assert all(float(r["parity"]) == pytest.approx(1.0, abs=1e-9) for r in rows)
        summary = json.loads(js.read_text())
        assert summary["diagonal_ensemble_theorem"]["passed"]
        assert summary["diagonal_ensemble_purity"] < 1

    @pytest.mark.parametrize("argv, expected", [
        (["witness", "--N", "4", "--state", "css-x", "--axis", "z", "--expect", "separable"], "false"),
        (["witness", "--N", "4", "--state", "cat", "--axis", "x", "--expect", "entangled"], "true"),
        (["witness", "--N", "2", "--state", "bec", "--expect", "entangled"], "true"),
    ])
    def test_witness(self, argv, expected, capsys):
        code, rows = self.run_csv(argv, capsys)
        assert code == 0 and rows[0]["entangled"] == expected

    def test_witness_wrong_expectation(self, capsys):
        code, _ = self.run_csv(["witness", "--N", "3", "--state", "css-x", "--expect", "entangled"], capsys)
        assert code == 2


def test_example_configs_validate():
    from pathlib import Path
    for cfg in sorted((Path(__file__).parent.parent / "scenarios").glob("*.json")):
        assert cli.run(str(cfg), validate_only=True) == 0, cfg
