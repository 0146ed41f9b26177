import os
import subprocess
import sys

import pytest

from saabounds.cli import main


def run_cli(args, env=None):
    proc = subprocess.run([sys.executable, "-m", "saabounds.cli", *args],
                          capture_output=True, text=True,
                          env={**os.environ, **(env or {})})
    return proc


def test_bounds_command_reproduces_width_ratio(capsys):
    rc = main(["bounds", "--alpha", "0.1", "--m1", "1", "--m2", "1",
               "--n-samples", "1000", "--geometry", "euclidean"])
    out = capsys.readouterr().out
    assert rc == 0
    ratio = float([ln for ln in out.splitlines() if "width_ratio" in ln][0].split("=")[1])
    assert ratio == pytest.approx(7.775, rel=0.03)


def test_bounds_command_csv_mode(capsys):
    rc = main(["bounds", "--alpha", "0.1", "--m1", "2", "--m2", "1",
               "--n-samples", "100", "--csv"])
    out = capsys.readouterr().out
    assert rc == 0
    assert out.startswith("quantity,value")
    assert "risk_beta," in out


def test_bounds_alpha_half_warns_zero_floor(capsys):
    rc = main(["bounds", "--alpha", "0.5", "--m1", "1", "--m2", "1",
               "--n-samples", "100"])
    err = capsys.readouterr().err
    assert rc == 0
    assert "width floor is 0" in err


def test_missing_required_argument_exits_2():
    proc = run_cli(["bounds", "--alpha", "0.1", "--m2", "1",
                    "--n-samples", "100"])
    assert proc.returncode == 2
    assert "usage" in proc.stderr.lower()


def test_domain_error_exits_3(capsys):
    rc = main(["bounds", "--alpha", "1.5", "--m1", "1", "--m2", "1",
               "--n-samples", "100"])
    assert rc == 3
    assert "error:" in capsys.readouterr().err


def test_constants_command(capsys):
    rc = main(["constants", "quadratic", "--kappa0", "0.1", "--kappa1", "0.9"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "m1 = 0.65" in out and "m2 = 2" in out


def test_experiment_determinism_bytes(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["experiment", "coverage", "--instance", "quadratic", "--n", "2",
            "--n-samples", "20", "--reps", "15", "--seed", "7"]
    assert main([*args, "--out", str(out1)]) == 0
    assert main([*args, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_experiment_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("instance_kind=quadratic\nn=2\nN=20\nreps=10\nseed=3\n")
    rc = main(["experiment", "coverage", "--config", str(cfg)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "coverage,quadratic,2,20,0.1,10," in out
    # flag override wins over file value
    rc = main(["experiment", "coverage", "--config", str(cfg), "--n-samples", "30"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "coverage,quadratic,2,30," in out


def test_experiment_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("not_a_key=1\n")
    rc = main(["experiment", "coverage", "--config", str(cfg)])
    assert rc == 3
    assert "unknown config key" in capsys.readouterr().err


def test_experiment_echoes_resolved_config(tmp_path):
    out = tmp_path / "r.csv"
    main(["experiment", "coverage", "--instance", "quadratic", "--n", "2",
          "--n-samples", "20", "--reps", "5", "--seed", "9", "--out", str(out)])
    text = out.read_text()
    header = text.splitlines()[0]
    assert header.startswith("# config:")
    for token in ("seed=9", "reps=5", "N=20", "instance_kind=quadratic"):
        assert token in header


def test_env_var_provides_default_seed(tmp_path):
    out1, out2 = tmp_path / "e1.csv", tmp_path / "e2.csv"
    args = ["experiment", "coverage", "--instance", "quadratic", "--n", "2",
            "--n-samples", "20", "--reps", "5"]
    p1 = run_cli([*args, "--out", str(out1)], env={"SAABOUNDS_SEED": "123"})
    p2 = run_cli([*args, "--out", str(out2), "--seed", "123"])
    assert p1.returncode == p2.returncode == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_experiment_plot_renders_png(tmp_path):
    out = tmp_path / "cov.csv"
    rc = main(["experiment", "coverage", "--instance", "quadratic", "--n", "2",
               "--n-samples", "20", "--reps", "5", "--seed", "1",
               "--out", str(out), "--plot"])
    assert rc == 0
    png = tmp_path / "cov.png"
    assert png.exists() and png.stat().st_size > 1000


def test_curves_plot(tmp_path):
    out = tmp_path / "curves.csv"
    rc = main(["experiment", "curves", "--instance", "quadratic", "--n", "3",
               "--reps", "2", "--seed", "1", "--curve-n-min", "32",
               "--curve-n-max", "64", "--out", str(out), "--plot"])
    assert rc == 0
    assert (tmp_path / "curves.png").exists()


def test_solve_command_prints_certificate(capsys):
    rc = main(["solve", "--instance", "cvar", "--n", "2", "--n-samples", "50",
               "--seed", "4", "--eps", "0.5"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "value =" in out and "certificate = dual_pair" in out
    assert "gap =" in out


def test_solve_command_lp_dump(tmp_path, capsys):
    dump = tmp_path / "problem.lp"
    rc = main(["solve", "--instance", "gaussian_var", "--n", "3",
               "--n-samples", "10", "--seed", "2", "--dump-lp", str(dump)])
    assert rc == 0
    text = dump.read_text()
    assert text.startswith("Minimize") and "Subject To" in text


def test_solve_from_instance_file(tmp_path, capsys):
    from saabounds.problems import build_cvar_instance, instance_to_text, philox_rng
    inst = build_cvar_instance(2, 0.1, 0.9, 0.5, rng=philox_rng(3))
    path = tmp_path / "inst.txt"
    path.write_text(instance_to_text(inst))
    rc = main(["solve", "--instance-file", str(path), "--n-samples", "40",
               "--seed", "6"])
    assert rc == 0
    assert "value =" in capsys.readouterr().out
