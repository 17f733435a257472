"""End-to-end checks of the command line front end.

Everything runs in-process through cli.execute so exit codes and
emitted files can be asserted without shelling out.
"""

import os
import shutil
import subprocess

import numpy as np
import pytest

from fracspec.cli import execute


def run(args, out):
    return execute(list(args) + ["--out", str(out)])


def report_lines(out, task):
    text = (out / f"{task}-report.txt").read_text()
    rows = {}
    for line in text.splitlines():
        key, _, val = line.partition(" = ")
        rows[key] = val
    return rows


class TestWorkedExamples:
    def test_toy_zaremba_console(self, tmp_path, capsys):
        assert run(["zaremba", "--toy"], tmp_path) == 0
        got = capsys.readouterr().out
        assert "M eigenvalue = 1.25" in got
        assert "identity mismatch = 0" in got

    def test_weyl_const_square_headline(self, tmp_path, capsys):
        rc = run(
            ["weyl-const", "--op", "frac-laplacian", "--a", "0.5",
             "--domain", "square", "--n", "2"],
            tmp_path,
        )
        assert rc == 0
        assert "C' = 0.0795775" in capsys.readouterr().out
        rows = report_lines(tmp_path, "weyl-const")
        assert float(rows["constant"]) == pytest.approx(1 / (4 * np.pi), rel=1e-12)

    def test_interface_constants_box_face(self, tmp_path):
        assert run(
            ["weyl-const", "--which", "interface-m", "--coeffs", "identity",
             "--domain", "box", "--n", "3"],
            tmp_path,
        ) == 0
        rows = report_lines(tmp_path, "weyl-const")
        assert float(rows["constant"]) == pytest.approx(1 / (8 * np.pi), rel=1e-10)

    def test_symbol_check_console_floor(self, tmp_path, capsys):
        rc = run(
            ["symbol-check", "--coeffs", "identity", "--n", "3",
             "--samples", "32", "--seed", "7"],
            tmp_path,
        )
        assert rc == 0
        out = capsys.readouterr().out
        # roundoff-level residuals print as 0; the report keeps the raw value
        assert "factorization residual = 0" in out
        assert "transmission residual = 0" in out
        rows = report_lines(tmp_path, "symbol-check")
        assert 0.0 <= float(rows["factorization_residual"]) < 1e-13

    def test_singular_probe_pinned_deltas(self, tmp_path):
        rc = run(
            ["singular-probe", "--decay", "harmonic",
             "--deltas", "1e-2,1e-3,1e-4,1e-5,1e-6",
             "--assert", "--tol", "0.05"],
            tmp_path,
        )
        assert rc == 0
        rows = report_lines(tmp_path, "singular-probe")
        assert abs(float(rows["normalized_slope"]) - 1.0) <= 0.05
        assert rows["divergent"] == "True"


class TestPipelines:
    def test_spectrum_export(self, tmp_path):
        assert run(
            ["spectrum", "--coeffs", "identity", "--domain", "square",
             "--n", "2", "--nodes", "24", "--bc", "dirichlet", "--count", "40"],
            tmp_path,
        ) == 0
        lines = (tmp_path / "spectrum-values.csv").read_text().splitlines()
        assert lines[0] == "j,value"
        assert len(lines) == 41
        j, val = lines[1].split(",")
        assert int(j) == 1
        assert float(val) == pytest.approx(2 * np.pi**2, rel=0.05)

    def test_plot_script_compiles(self, tmp_path):
        run(
            ["spectrum", "--coeffs", "identity", "--domain", "square",
             "--n", "2", "--nodes", "16", "--count", "10"],
            tmp_path,
        )
        src = (tmp_path / "spectrum-values-plot.py").read_text()
        compile(src, "spectrum-values-plot.py", "exec")

    def test_weyl_fit_from_csv(self, tmp_path):
        seq = tmp_path / "seq.csv"
        j = np.arange(1, 101)
        seq.write_text("j,value\n" + "\n".join(f"{i},{0.25 * i**-2.0}" for i in j))
        rc = run(
            ["weyl-fit", "--input", str(seq), "--window", "10,60",
             "--expect-exponent", "-2", "--tol-exponent", "0.01",
             "--expect-constant", "0.25", "--tol-constant", "0.01", "--assert"],
            tmp_path,
        )
        assert rc == 0
        rows = report_lines(tmp_path, "weyl-fit")
        assert float(rows["exponent"]) == pytest.approx(-2.0, abs=1e-8)
        assert float(rows["constant"]) == pytest.approx(0.25, rel=1e-8)

    def test_boundary_exp_interval(self, tmp_path):
        assert run(
            ["boundary-exp", "--coeffs", "identity", "--domain", "interval",
             "--n", "1", "--nodes", "512"],
            tmp_path,
        ) == 0
        rows = report_lines(tmp_path, "boundary-exp")
        assert float(rows["exponent"]) == pytest.approx(1.0, abs=0.05)
        assert rows["ratio_nonvanishing"] == "True"

    def test_zaremba_square_grid(self, tmp_path):
        assert run(
            ["zaremba", "--coeffs", "identity", "--domain", "square",
             "--n", "2", "--nodes", "12", "--sigma", "0.0"],
            tmp_path,
        ) == 0
        rows = report_lines(tmp_path, "zaremba")
        assert float(rows["identity_mismatch"]) <= 1e-10
        assert rows["rank_bound_ok"] == "True"
        mu = (tmp_path / "zaremba-mu.csv").read_text().splitlines()
        assert mu[0] == "j,value"
        vals = np.array([float(r.split(",")[1]) for r in mu[1:]])
        assert np.all(np.diff(vals) <= 1e-15)

    def test_zaremba_disk_flagged(self, tmp_path):
        assert run(
            ["zaremba", "--coeffs", "identity", "--domain", "disk",
             "--n", "2", "--n-r", "24", "--n-theta", "48", "--arc", "0,3.141592653589793"],
            tmp_path,
        ) == 0
        rows = report_lines(tmp_path, "zaremba")
        assert rows["n2_flagged"] == "True"

    def test_dtn_probe_assert_modes(self, tmp_path):
        args = ["dtn-probe", "--coeffs", "matrix:2,1;1,2", "--xi", "1,2",
                "--h", "0.015625"]
        assert run(args, tmp_path) == 0
        rows = report_lines(tmp_path, "dtn-probe")
        assert float(rows["max_rel_error"]) <= 1e-3
        strict = tmp_path / "strict"
        assert run(args + ["--assert", "--tol", "1e-6"], strict) == 4


class TestConfigHandling:
    def test_config_file_and_flag_override(self, tmp_path):
        cfgfile = tmp_path / "run.ini"
        cfgfile.write_text(
            "[operator]\nkind = frac-laplacian\na = 0.25\n"
            "[domain]\nkind = square\nn = 2\n"
        )
        out1 = tmp_path / "a"
        assert execute(["weyl-const", "--config", str(cfgfile), "--out", str(out1)]) == 0
        assert report_lines(out1, "weyl-const")["power"] == "0.25"
        out2 = tmp_path / "b"
        assert execute(
            ["weyl-const", "--config", str(cfgfile), "--a", "0.5", "--out", str(out2)]
        ) == 0
        assert report_lines(out2, "weyl-const")["power"] == "0.5"

    def test_unknown_config_key_rejected(self, tmp_path):
        cfgfile = tmp_path / "bad.ini"
        cfgfile.write_text("[task]\nfrobnicate = 1\n")
        assert execute(["singular-probe", "--config", str(cfgfile),
                        "--out", str(tmp_path / "o")]) == 2

    def test_unknown_config_section_rejected(self, tmp_path):
        cfgfile = tmp_path / "bad.ini"
        cfgfile.write_text("[mystery]\nx = 1\n")
        assert execute(["singular-probe", "--config", str(cfgfile),
                        "--out", str(tmp_path / "o")]) == 2

    def test_bad_values_exit_2(self, tmp_path):
        assert run(["symbol-check", "--coeffs", "matrix:1,2"], tmp_path) == 2
        assert run(["weyl-const", "--which", "bogus", "--coeffs", "identity",
                    "--domain", "square", "--n", "2"], tmp_path) == 2
        assert run(["dtn-probe", "--coeffs", "identity", "--xi", "1.5",
                    "--h", "0.015625"], tmp_path) == 2

    def test_unknown_subcommand_exit_2(self, capsys):
        assert execute(["frobnicate"]) == 2
        capsys.readouterr()

    def test_numeric_failure_exit_3(self, tmp_path):
        seq = tmp_path / "seq.csv"
        seq.write_text("j,value\n" + "\n".join(f"{i},0.0" for i in range(1, 40)))
        assert run(["weyl-fit", "--input", str(seq), "--window", "2,30"], tmp_path) == 3

    def test_outdir_from_environment(self, tmp_path, monkeypatch):
        envdir = tmp_path / "fromenv"
        monkeypatch.setenv("FRACSPEC_OUT", str(envdir))
        assert execute(["zaremba", "--toy"]) == 0
        assert (envdir / "zaremba-report.txt").exists()

    def test_flag_beats_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FRACSPEC_OUT", str(tmp_path / "ignored"))
        target = tmp_path / "explicit"
        assert execute(["zaremba", "--toy", "--out", str(target)]) == 0
        assert (target / "zaremba-report.txt").exists()
        assert not (tmp_path / "ignored").exists()


class TestManifest:
    def test_manifest_fields(self, tmp_path):
        run(["zaremba", "--toy", "--seed", "11"], tmp_path)
        text = (tmp_path / "manifest.txt").read_text()
        for key in ("task = zaremba", "config_hash = ", "package_version = ",
                    "numpy_version = ", "kernel_backend = ", "seed = 11",
                    "timestamp = "):
            assert key in text

    def test_repro_reruns_bit_identical(self, tmp_path):
        args = ["singular-probe", "--decay", "harmonic", "--repro",
                "--deltas", "1e-2,1e-3,1e-4", "--out", str(tmp_path)]
        assert execute(args) == 0
        first = {
            p.name: p.read_bytes() for p in tmp_path.iterdir() if p.is_file()
        }
        assert "timestamp = " not in first["manifest.txt"].decode()
        assert execute(args) == 0
        for name, blob in first.items():
            assert (tmp_path / name).read_bytes() == blob

    def test_config_hash_tracks_inputs(self, tmp_path):
        run(["zaremba", "--toy", "--repro"], tmp_path / "a")
        run(["zaremba", "--toy", "--repro", "--seed", "5"], tmp_path / "b")
        ha = report_hash = None
        for line in (tmp_path / "a" / "manifest.txt").read_text().splitlines():
            if line.startswith("config_hash"):
                ha = line
        for line in (tmp_path / "b" / "manifest.txt").read_text().splitlines():
            if line.startswith("config_hash"):
                report_hash = line
        assert ha is not None and report_hash is not None and ha != report_hash


@pytest.mark.skipif(shutil.which("fracspec") is None, reason="entry point not on PATH")
def test_console_script_help():
    proc = subprocess.run(["fracspec", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "symbol-check" in proc.stdout


def test_jobs_flag_caps_thread_env(tmp_path):
    before = os.environ.get("OMP_NUM_THREADS")
    try:
        assert execute(["zaremba", "--toy", "--jobs", "2",
                        "--out", str(tmp_path)]) == 0
        assert os.environ.get("OMP_NUM_THREADS") == "2"
    finally:
        if before is None:
            os.environ.pop("OMP_NUM_THREADS", None)
        else:
            os.environ["OMP_NUM_THREADS"] = before
