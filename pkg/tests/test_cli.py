import json
import subprocess
import sys

import pytest

from subdiff_cq.cli import ConfigError, RunConfig, dump_config, main, parse_config, parse_config_text
from subdiff_cq.experiments import StudySpec

SMALL = """
[run]
jobs = 1

[study quick]
preset = b
scheme = vanilla
alphas = 0.5
t_finals = 1
steps = 10, 20
M = 20
n_ref = 100
"""


def test_weights_command(capsys):
    assert main(["weights", "--alpha", "1", "--method", "bdf2", "-n", "4"]) == 0
    assert [float(v) for v in capsys.readouterr().out.split()] == [1.5, -2.0, 0.5, 0.0, 0.0]


def test_weights_full_precision(capsys):
    main(["weights", "--alpha", "0.5", "-n", "0"])
    assert float(capsys.readouterr().out) == 1.5**0.5


def test_weights_bad_alpha(capsys):
    assert main(["weights", "--alpha", "1.5", "-n", "3"]) == 1
    assert "alpha" in capsys.readouterr().err


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["weights"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 1


def test_minimal_config_defaults():
    cfg = parse_config_text("[study x]\npreset = a\nscheme = corrected\n")
    (spec,) = cfg.studies
    assert (spec.preset, spec.scheme, spec.M, spec.n_ref) == ("a", "corrected", 1000, 5000)


def test_empty_config():
    with pytest.raises(ConfigError, match="no study specified"):
        parse_config_text("")
    with pytest.raises(ConfigError, match="no study specified"):
        parse_config_text("[run]\njobs = 2\n")


def test_alpha_out_of_range():
    with pytest.raises(ConfigError, match=r"\(0, 1\)"):
        parse_config_text("[study x]\nalphas = 0.5, 1.5\n")


@pytest.mark.parametrize("text,needle", [
    ("[study x]\ncolour = red\n", "'colour'"),
    ("[run]\nspeed = 3\n[study x]\n", "'speed'"),
    ("[elsewhere]\n", "unknown section"),
    ("not an ini file", "malformed"),
    ("[study x]\nsteps = 10, twenty\n", "steps"),
    ("[study x]\nscheme = bdf9\n", "scheme"),
    ("[run]\nt_interpretation = maybe\n[study x]\n", "t_interpretation"),
])
def test_config_diagnostics(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config_text(text)


def test_flags_override_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(SMALL)
    cfg = parse_config(path, {"scheme": "corrected", "jobs": "3", "m": None})
    assert cfg.studies[0].scheme == "corrected" and cfg.studies[0].M == 20 and cfg.jobs == 3
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "missing.ini")


def test_round_trip():
    cfg = RunConfig(studies=(StudySpec(preset="c", alphas=(0.3, 0.7), t_finals=(1.0, 0.001)),
                             StudySpec(preset="b", scheme="vanilla", M=50)),
                    output_dir="somewhere", jobs=2, verbosity=1)
    assert parse_config_text(dump_config(cfg)) == cfg


def test_interpretation_propagates():
    cfg = parse_config_text("[run]\nt_interpretation = unit_step\n[study x]\nt_finals = 1\n")
    assert cfg.studies[0].t_interpretation == "unit_step"


def test_study_outputs_are_deterministic(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text(SMALL)
    outs = []
    for name in ("one", "two"):
        assert main(["study", "--config", str(cfg), "-o", str(tmp_path / name)]) == 0
        outs.append(tmp_path / name)
    assert (outs[0] / "results.csv").read_bytes() == (outs[1] / "results.csv").read_bytes()
    for f in ("tables.md", "config.effective", "metadata.json"):
        assert (outs[0] / f).exists()
    assert "runtime_seconds" in json.loads((outs[0] / "metadata.json").read_text())
    assert parse_config(outs[0] / "config.effective") == parse_config(cfg, {"output_dir": str(outs[0])})
    assert "| 1 | 0.50 |" in capsys.readouterr().out


def test_study_from_flags(tmp_path):
    argv = ["study", "--preset", "zero", "--alphas", "0.5", "--t-finals", "1", "-M", "8",
            "-j", "1", "-o", str(tmp_path)]
    assert main(argv) == 0
    assert "—" in (tmp_path / "tables.md").read_text()


def test_study_config_error_exit(tmp_path, capsys):
    assert main(["study", "--alphas", "2", "-o", str(tmp_path)]) == 1
    assert "(0, 1)" in capsys.readouterr().err


def test_solve_writes_snapshot(tmp_path):
    out = tmp_path / "u.csv"
    assert main(["solve", "--preset", "b", "-N", "10", "-M", "8", "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x,u" and len(lines) == 10
    assert lines[1] == "0.0,0.0" and lines[-1] == "1.0,0.0"


def test_numeric_failure_exit_2(monkeypatch, capsys):
    from subdiff_cq import cli
    from subdiff_cq.fem1d import SingularMatrixError

    def boom(*args, **kwargs):
        raise SingularMatrixError("zero pivot")

    monkeypatch.setattr(cli, "run_scheme", boom)
    assert main(["solve", "--preset", "a", "-N", "2", "-M", "4"]) == 2
    assert "zero pivot" in capsys.readouterr().err


def test_verify_list_and_unknown(capsys):
    assert main(["verify", "--list"]) == 0
    assert "oracle_equivalence" in capsys.readouterr().out
    assert main(["verify", "--only", "bogus"]) == 1


def test_verify_failure_exit_3(monkeypatch):
    from subdiff_cq import verify
    monkeypatch.setitem(verify.CHECKS, "weights_alpha_one", lambda: (False, "forced"))
    assert main(["verify", "--only", "weights_alpha_one"]) == 3


def test_verify_clean_build_exit_0():
    proc = subprocess.run([sys.executable, "-m", "subdiff_cq.cli", "verify"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "9/9 checks passed" in proc.stdout
