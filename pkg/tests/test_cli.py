import os

import pytest

from qg3.cli import main
from qg3.report import VerificationReport
from qg3.suite import CHECKS, FAST_SUITE, RunConfig, run_suite


class TestReportObject:
    def test_csv_layout(self, tmp_path):
        rep = VerificationReport("demo", ["check_id", "measured", "pass"])
        rep.add_row(check_id="a", measured=1.23456789e-4, **{"pass": True})
        p = tmp_path / "demo.csv"
        rep.write_csv(p)
        lines = p.read_text().splitlines()
        assert lines[0] == "check_id,measured,pass"
        assert lines[1] == "a,1.234567890000e-04,true"

    def test_require_flips_pass(self):
        rep = VerificationReport("demo", ["check_id"])
        assert rep.require(True, "fine")
        assert rep.passed
        assert not rep.require(False, "broken")
        assert not rep.passed


class TestSuite:
    def test_fast_suite_passes(self, tmp_path):
        cfg = RunConfig(seed=77, output_dir=str(tmp_path))
        reports, ok = run_suite(cfg, FAST_SUITE)
        assert ok, [r.name for r in reports if not r.passed]

    def test_unknown_check(self):
        with pytest.raises(KeyError):
            run_suite(RunConfig(), ["nonsense"])

    def test_all_checks_registered_return_reports(self):
        # registry sanity: names are kebab-case and callable
        for name, fn in CHECKS.items():
            assert name == name.lower()
            assert callable(fn)


class TestCli:
    def test_usage_error_unknown_check(self, tmp_path, capsys):
        rc = main(["verify", "bogus", "--output-dir", str(tmp_path)])
        assert rc == 1
        assert "unknown checks" in capsys.readouterr().err

    def test_verify_writes_reports(self, tmp_path, capsys):
        rc = main(["verify", "transform-roundtrip", "gamma-decomposition",
                   "--output-dir", str(tmp_path), "--seed", "5"])
        assert rc == 0
        assert (tmp_path / "report.csv").exists()
        assert (tmp_path / "transform-roundtrip.csv").exists()
        assert (tmp_path / "transform-roundtrip.dat").exists()
        out = capsys.readouterr().out
        assert "transform-roundtrip: pass" in out

    def test_degenerate_params_pass(self, tmp_path):
        rc = main(["verify", "gamma-decomposition", "--nu", "1", "--nu-prime",
                   "1", "--output-dir", str(tmp_path)])
        assert rc == 0

    def test_env_var_overrides_output_dir(self, tmp_path, monkeypatch):
        target = tmp_path / "env-out"
        monkeypatch.setenv("QG3_OUTPUT_DIR", str(target))
        rc = main(["verify", "transform-roundtrip", "--output-dir",
                   str(tmp_path / "ignored")])
        assert rc == 0
        assert target.exists()

    def test_config_file_and_override(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("nu = 1.0\nnu_prime = 3.0\nF = 0.5\nseed = 9\n")
        rc = main(["verify", "transform-roundtrip", "--config", str(cfgfile),
                   "--output-dir", str(tmp_path / "out")])
        assert rc == 0

    def test_bad_config_key(self, tmp_path, capsys):
        cfgfile = tmp_path / "bad.cfg"
        cfgfile.write_text("wibble = 3\n")
        rc = main(["verify", "transform-roundtrip", "--config", str(cfgfile)])
        assert rc == 1

    def test_sweep_kernel_l1(self, tmp_path):
        rc = main(["sweep", "--axis", "F", "--values", "0.5,1.0",
                   "--check", "kernel-l1", "--output-dir", str(tmp_path)])
        assert rc == 0
        path = tmp_path / "sweep-kernel-l1-F.csv"
        lines = path.read_text().splitlines()
        assert lines[0].startswith("F,pass")
        assert "l1_norm" in lines[0]
        assert len(lines) == 3

    def test_solve_and_report(self, tmp_path):
        rc = main(["solve-tdqg", "--output-dir", str(tmp_path), "--t-final",
                   "0.1", "--dt", "0.02"])
        assert rc == 0
        archive = tmp_path / "tdqg-archive"
        assert (archive / "manifest.json").exists()
        rc = main(["report", str(archive), "--output-dir", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "archive-report.csv").exists()

    def test_solve_qg(self, tmp_path):
        rc = main(["solve-qg", "--output-dir", str(tmp_path), "--n", "32",
                   "--t-final", "0.05", "--dt", "0.01"])
        assert rc == 0
        assert (tmp_path / "qg-archive" / "manifest.json").exists()


class TestDeterminism:
    def test_same_seed_byte_identical(self, tmp_path):
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            rc = main(["verify", "transform-roundtrip", "bony", "lp-estimate",
                       "--seed", "42", "--output-dir", str(d)])
            assert rc == 0
        for fname in sorted(os.listdir(dirs[0])):
            a = (dirs[0] / fname).read_bytes()
            b = (dirs[1] / fname).read_bytes()
            assert a == b, f"{fname} differs between identical runs"

    def test_different_seed_differs(self, tmp_path):
        outs = []
        for seed in (1, 2):
            d = tmp_path / f"s{seed}"
            main(["verify", "lp-estimate", "--seed", str(seed),
                  "--output-dir", str(d)])
            outs.append((d / "lp-estimate.csv").read_bytes())
        assert outs[0] != outs[1]
