"""Run configuration, CSV provenance and the ``dbar`` command line."""

import csv
import json

import numpy as np
import pytest

from dbarspec.cli import main
from dbarspec.config import (
    ConfigError,
    RunConfig,
    build_config,
    parse_complex_list,
    read_config_file,
    write_csv,
)
from dbarspec.fieldio import read_field, write_field
from dbarspec.grid import SpectralGrid2D
from dbarspec.oracles import gaussian


def read_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    return list(csv.reader(lines[1:]))


class TestParsing:
    def test_complex_list(self):
        assert parse_complex_list("0.5+0.5j, 1 ; -2i") == [0.5 + 0.5j, 1 + 0j, -2j]

    def test_complex_list_error(self):
        with pytest.raises(ConfigError, match="complex"):
            parse_complex_list("1+x")

    def test_config_file(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("# comment\nn = 32\nl = 1.5  # trailing\nk = 0.5+0.5j, 1\nplot = yes\n")
        vals = read_config_file(p)
        assert vals == {"n": 32, "l": 1.5, "k": [0.5 + 0.5j, 1 + 0j], "plot": True}

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("colour = red\n")
        with pytest.raises(ConfigError, match="unknown key"):
            read_config_file(p)

    def test_missing_equals(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("n 32\n")
        with pytest.raises(ConfigError, match=":1:"):
            read_config_file(p)


class TestRunConfig:
    def test_precedence(self):
        cfg = build_config("x", {"n": 16, "l": 2.0}, {"n": 32, "l": None}, {"n": 8, "l": 1.0, "m": 5})
        assert (cfg.n, cfg.l, cfg.m) == (32, 2.0, 5)

    def test_workers_from_environment(self, monkeypatch):
        monkeypatch.setenv("DBAR_NUM_WORKERS", "3")
        assert build_config("x", {}, {}, {}).workers == 3
        assert build_config("x", {}, {"workers": 1}, {}).workers == 1

    @pytest.mark.parametrize(
        "kwargs",
        [{"n": 7}, {"l": -1.0}, {"m": 21}, {"tol": 1.0}, {"maxit": 0}, {"nt": 0}, {"workers": 0}, {"method": "other"}, {"q0": "/no/such/file"}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            RunConfig(**kwargs).validate()

    def test_hash_ignores_output_location(self):
        a = RunConfig(n=16, out="a", workers=1)
        b = RunConfig(n=16, out="b", workers=4, plot=True)
        assert a.hash() == b.hash()
        assert len(a.hash()) == 16
        assert RunConfig(n=32).hash() != a.hash()

    def test_csv_header(self, tmp_path):
        cfg = RunConfig(experiment="demo", n=8)
        path = write_csv(tmp_path / "sub" / "t.csv", ["a", "b"], [(1, 0.1)], cfg)
        first = path.read_text().splitlines()[0]
        assert first == f"# config_hash={cfg.hash()} experiment=demo"
        assert read_rows(path) == [["a", "b"], ["1", "0.1"]]


class TestCommandLine:
    def test_dbar_convergence(self, tmp_path, capsys):
        assert main(["dbar-convergence", "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "dbar_convergence.csv")
        assert rows[0] == ["sweep_var", "value", "linf_error"]
        m11 = [r for r in rows[1:] if r[:2] == ["M", "11"]]
        assert float(m11[0][2]) <= 1e-12
        assert capsys.readouterr().out.count("[PASS]") == 3

    def test_shift_compare_single_row(self, tmp_path):
        assert main(["shift-compare", "--n", "128", "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "shift_compare.csv")
        assert rows[0] == ["n", "k_re", "k_im", "err_unshifted", "err_shifted"]
        edge = [r for r in rows[1:] if r[1] == "8.0"][0]
        assert float(edge[4]) <= 1e-10 <= 1e-4 <= float(edge[3])

    def test_cgo_solve_outputs(self, tmp_path):
        args = ["cgo-solve", "--n", "16", "--l", "1.075", "--k", "0,0.4651162790697674+0.4651162790697674j", "--m", "3", "--out", str(tmp_path), "--dump-kernels"]
        assert main(args) == 0
        for name in ("k0_h.dbarf", "k0_m.dbarf", "k1_h.dbarf", "k1_residuals.csv", "W0.dbarf", "W3.dbarf"):
            assert (tmp_path / name).exists(), name
        recs = [json.loads(line) for line in (tmp_path / "runlog.jsonl").read_text().splitlines()]
        assert len(recs) == 2 and all(r["converged"] for r in recs)
        assert read_field(tmp_path / "k1_h.dbarf").grid == SpectralGrid2D.square(16, 1.075)

    def test_cgo_solve_is_deterministic(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            d = tmp_path / sub
            assert main(["cgo-solve", "--n", "16", "--l", "1.075", "--method", "direct", "--k", "0.2", "--out", str(d)]) == 0
            outs.append((d / "k0_S.dbarf").read_text())
        assert outs[0] == outs[1]

    def test_roundtrip_row(self, tmp_path):
        assert main(["roundtrip", "--n", "8", "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "roundtrip.csv")
        assert rows[0] == ["n", "l", "error", "published", "seconds"]
        assert float(rows[1][3]) == 7.09e-3

    def test_ds2_pipelines(self, tmp_path):
        q0 = tmp_path / "q0.dbarf"
        write_field(q0, gaussian(SpectralGrid2D.square(8, 0.7515)))
        assert main(["ds2", "ist", "--q0", str(q0), "--out", str(tmp_path / "ist")]) == 0
        for name in ("r_k_0.dbarf", "r_k_t.dbarf", "q_t.dbarf", "diagnostics.csv"):
            assert (tmp_path / "ist" / name).exists()
        assert main(["ds2", "direct", "--q0", str(q0), "--nt", "200", "--stride", "50", "--out", str(tmp_path / "dir")]) == 0
        rows = read_rows(tmp_path / "dir" / "diagnostics.csv")
        assert rows[0] == ["t", "l2", "energy"] and len(rows) == 6

    def test_ds2_compare_reports_failure(self, tmp_path, capsys):
        """At n = 8 the reconstruction is only good to 1e-2, so the check fails."""
        rc = main(["ds2", "compare", "--n", "8", "--l", "0.7515", "--nt", "100", "--out", str(tmp_path)])
        assert rc == 1
        assert "[FAIL] IST vs direct" in capsys.readouterr().out
        rows = read_rows(tmp_path / "compare.csv")
        assert rows[0][:6] == ["n", "l", "t", "nt", "points", "max_diff"]
        assert (tmp_path / "q_ist.dbarf").exists() and (tmp_path / "q_direct.dbarf").exists()

    def test_plots_written_beside_csv(self, tmp_path):
        pytest.importorskip("matplotlib")
        assert main(["roundtrip", "--n", "8", "--out", str(tmp_path), "--plot"]) == 0
        assert (tmp_path / "roundtrip.png").stat().st_size > 0
        assert (tmp_path / "roundtrip.csv").exists()

    def test_config_file_and_bad_values(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n = 7\n")
        assert main(["roundtrip", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "even" in capsys.readouterr().err

    def test_builtin_initial_data(self, tmp_path):
        assert main(["ds2", "direct", "--n", "8", "--l", "0.7515", "--nt", "20", "--out", str(tmp_path)]) == 0
        assert main(["cgo-solve", "--q0", "builtin:sech", "--out", str(tmp_path)]) == 2
