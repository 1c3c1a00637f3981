import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from magnls import cli
from magnls.config import parse_config
from magnls.grid import load_field

BASE = """
seed = 3
[solver]
substeps = 8
[experiment]
T = 0.25
snapshots = 3
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run_cli(tmp_path, monkeypatch, args, root="out"):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / root))
    return cli.main(["-q"] + args)


def out_dir(tmp_path, root="out", name="out"):
    return tmp_path / root / name


def csv_bytes(d: Path) -> dict:
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*.csv"))}


def validate(doc, name):
    jsonschema.validate(doc, cli.load_schema(name))


def test_run_writes_artifacts(tmp_path, monkeypatch):
    cfg = write(tmp_path, BASE)
    assert run_cli(tmp_path, monkeypatch, ["run", str(cfg)]) == cli.EXIT_OK
    d = out_dir(tmp_path)
    for name in ("summary.json", "effective_config.json", "diagnostics.csv", "picard_stats.csv",
                 "fields/u_00000.bin", "fields/u_00000.bin.json", "fields/u_00000.csv", "fields/A_0_x.bin"):
        assert (d / name).exists(), name
    summary = json.loads((d / "summary.json").read_text())
    validate(summary, cli.SUMMARY_SCHEMA)
    assert summary["status"] == "ok" and summary["results"]["termination"] == "completed"
    assert summary["results"]["diagnostics"]["violations"] == []
    header = (d / "diagnostics.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["time", "mass", "energy"]
    grid, u = load_field(d / "fields" / "u_00000.bin")
    assert grid.n == 128 and np.allclose(np.abs(u).max(), 1.0)
    assert not (d / "failure.json").exists()


def test_csv_formatting_uses_seventeen_digits(tmp_path, monkeypatch):
    run_cli(tmp_path, monkeypatch, ["run", str(write(tmp_path, BASE))])
    row = (out_dir(tmp_path) / "diagnostics.csv").read_text().splitlines()[2].split(",")
    assert float(row[0]) == 1 / 256
    assert all(repr(float(v)) == repr(float(f"{float(v):.17g}")) for v in row)


def test_run_is_deterministic(tmp_path, monkeypatch):
    cfg = write(tmp_path, BASE + '[datum]\nkind = "random"\n')
    run_cli(tmp_path, monkeypatch, ["run", str(cfg)], root="a")
    run_cli(tmp_path, monkeypatch, ["run", str(cfg)], root="b")
    a, b = csv_bytes(out_dir(tmp_path, "a")), csv_bytes(out_dir(tmp_path, "b"))
    assert a and a == b


def test_seed_changes_random_datum(tmp_path, monkeypatch):
    text = BASE + '[datum]\nkind = "random"\n'
    run_cli(tmp_path, monkeypatch, ["run", str(write(tmp_path, text, "a.toml"))], root="a")
    run_cli(tmp_path, monkeypatch, ["run", str(write(tmp_path, text.replace("seed = 3", "seed = 4"), "b.toml"))],
            root="b")
    a, b = csv_bytes(out_dir(tmp_path, "a")), csv_bytes(out_dir(tmp_path, "b"))
    assert a["diagnostics.csv"] != b["diagnostics.csv"]


def test_sweep_with_one_epsilon_matches_run(tmp_path, monkeypatch):
    run_cli(tmp_path, monkeypatch, ["run", str(write(tmp_path, BASE))], root="run")
    sweep = BASE.replace("T = 0.25", "T = 0.25\nepsilons = [0.1]")
    assert run_cli(tmp_path, monkeypatch, ["sweep-eps", str(write(tmp_path, sweep, "s.toml"))], root="sweep") == 0
    run_files = csv_bytes(out_dir(tmp_path, "run"))
    member = csv_bytes(out_dir(tmp_path, "sweep") / "members" / "eps_0")
    assert member == run_files
    d = out_dir(tmp_path, "sweep")
    table = (d / "cauchy_table.csv").read_text().splitlines()
    assert table == ["epsilon,0.10000000000000001", "0.10000000000000001,0"]
    assert not (d / "limit_report.json").exists()
    validate(json.loads((d / "summary.json").read_text()), cli.SUMMARY_SCHEMA)


def test_sweep_family_report(tmp_path, monkeypatch):
    sweep = BASE.replace("T = 0.25", "T = 0.25\nepsilons = [0.2, 0.1, 0.05]")
    assert run_cli(tmp_path, monkeypatch, ["sweep-eps", str(write(tmp_path, sweep))]) == 0
    d = out_dir(tmp_path)
    report = json.loads((d / "limit_report.json").read_text())
    assert report["candidate_epsilon"] == 0.05 and len(report["uniform_bounds"]) == 3
    assert (d / "limit_bounds.csv").exists() and (d / "residuals.csv").exists()
    for k in range(3):
        assert (d / "members" / f"eps_{k}" / "diagnostics.csv").exists()


def test_stability_command(tmp_path, monkeypatch):
    text = BASE.replace("T = 0.25", "T = 0.25\ndeltas = [0.0625, 0.03125, 0.015625]")
    assert run_cli(tmp_path, monkeypatch, ["stability", str(write(tmp_path, text))]) == 0
    d = out_dir(tmp_path)
    summary = json.loads((d / "summary.json").read_text())
    validate(summary, cli.SUMMARY_SCHEMA)
    assert 0.8 <= summary["results"]["observed_order"] <= 1.2
    assert len((d / "stability.csv").read_text().splitlines()) == 4


def test_check_pairs_table(capsys):
    assert cli.main(["check-pairs", "4", "3", "inf,2", "6 18/7"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == list(cli.PAIR_COLUMNS)
    assert len(lines) == 4
    inf2 = lines[2].split()
    assert inf2[:5] == ["inf", "2", "admissible-nonendpoint", "no", "yes"]


def test_check_pairs_errors(capsys):
    assert cli.main(["check-pairs", "4"]) == cli.EXIT_CONFIG
    assert cli.main(["check-pairs", "4", "x"]) == cli.EXIT_CONFIG
    assert cli.main(["check-pairs"]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_check_pairs_with_config(tmp_path, monkeypatch, capsys):
    cfg = write(tmp_path, '[experiment]\npairs = [["2", "6"]]\n')
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "out"))
    assert cli.main(["check-pairs", "4", "3", "--config", str(cfg)]) == 0
    rows = (out_dir(tmp_path) / "pairs.csv").read_text().splitlines()
    assert len(rows) == 3 and rows[2].startswith("2,6,admissible-endpoint")


def test_classify_potential(tmp_path, monkeypatch, capsys):
    demo = Path(__file__).resolve().parents[1] / "demos" / "configs" / "classify.toml"
    assert run_cli(tmp_path, monkeypatch, ["classify-potential", str(demo)]) == 0
    text = capsys.readouterr().out
    assert text.startswith("verdict: in Ã₁")
    summary = json.loads((tmp_path / "out" / "out" / "classify" / "summary.json").read_text())
    assert summary["results"]["verdict"] == "A1_TILDE"
    assert summary["results"]["magnetic_theta"] == "3/40"


def test_report_command(tmp_path, monkeypatch):
    text = '[experiment]\nkind = "report"\ndecay = [{ p = "1", r = "inf", eps = 0.0 }, { p = "2", r = "2" }]\n'
    assert run_cli(tmp_path, monkeypatch, ["report", str(write(tmp_path, text))]) == 0
    rows = (out_dir(tmp_path) / "decay_fits.csv").read_text().splitlines()
    assert rows[0] == "p,r,eps,gradient,fitted_slope,predicted_slope,valid"
    first = rows[1].split(",")
    assert abs(float(first[4]) + 0.5) < 0.025 and float(first[5]) == -0.5 and first[6] == "1"


def test_config_error_exit_code(tmp_path, monkeypatch, capsys):
    cfg = write(tmp_path, "[nonlinearity]\ngamma = \"7\"\n")
    assert run_cli(tmp_path, monkeypatch, ["run", str(cfg)]) == cli.EXIT_CONFIG
    assert "gamma ∈ (1,5]" in capsys.readouterr().err
    assert run_cli(tmp_path, monkeypatch, ["run", str(tmp_path / "missing.toml")]) == cli.EXIT_CONFIG


def test_solver_termination_exit_code(tmp_path, monkeypatch):
    cfg = write(tmp_path, BASE.replace("substeps = 8", "substeps = 8\nh1_blowup_threshold = 2.0"))
    assert run_cli(tmp_path, monkeypatch, ["run", str(cfg)]) == cli.EXIT_SOLVER
    failure = json.loads((out_dir(tmp_path) / "failure.json").read_text())
    validate(failure, cli.FAILURE_SCHEMA)
    assert failure["reason"] == "blowup_detected" and failure["exit_code"] == 3
    summary = json.loads((out_dir(tmp_path) / "summary.json").read_text())
    assert summary["status"] == "solver-termination"


def test_invariant_violation_exit_code(tmp_path, monkeypatch):
    real = cli.compute_record

    def broken(traj, A, config):
        rec = real(traj, A, config)
        rec.violations = ["mass increased"]
        return rec

    monkeypatch.setattr(cli, "compute_record", broken)
    assert run_cli(tmp_path, monkeypatch, ["run", str(write(tmp_path, BASE))]) == cli.EXIT_INVARIANT
    failure = json.loads((out_dir(tmp_path) / "failure.json").read_text())
    validate(failure, cli.FAILURE_SCHEMA)
    assert failure["violations"] == ["mass increased"]


def test_output_root_semantics(tmp_path, monkeypatch):
    monkeypatch.delenv(cli.OUTPUT_ROOT_ENV, raising=False)
    cfg = parse_config('output = "runs/a"')
    assert cli.output_dir(cfg) == Path("runs/a")
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path))
    assert cli.output_dir(cfg) == tmp_path / "runs" / "a"
    assert cli.output_dir(parse_config('output = "/abs/dir/b"')) == tmp_path / "b"


def test_effective_config_echo(tmp_path, monkeypatch, capsys):
    cfg = write(tmp_path, '[experiment]\nkind = "classify-potential"\n')
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "o"))
    cli.main(["classify-potential", str(cfg)])
    echoed = json.loads(capsys.readouterr().err.splitlines()[0])
    assert echoed["grid"]["n"] == 128
    cli.main(["-q", "classify-potential", str(cfg)])
    assert capsys.readouterr().err == ""


def test_critical_run_logs_smallness(tmp_path, monkeypatch):
    text = BASE + '[nonlinearity]\ngamma = "5"\n'
    assert run_cli(tmp_path, monkeypatch, ["run", str(write(tmp_path, text))]) == 0
    res = json.loads((out_dir(tmp_path) / "summary.json").read_text())["results"]
    assert res["critical_smallness"]["value"] > 0 and res["critical_smallness"]["eta0"] == 0.01


def test_dispatch_uses_experiment_kind(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path))
    cfg = parse_config('output = "p"\n[experiment]\nkind = "check-pairs"\npairs = [["4", "3"]]\n')
    assert cli.dispatch(cfg) == 0 and (tmp_path / "p" / "pairs.csv").exists()


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "magnls.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("magnls ")
    bad = subprocess.run([sys.executable, "-m", "magnls.cli", "frobnicate"], capture_output=True, text=True)
    assert bad.returncode == 2
