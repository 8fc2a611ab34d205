import os
import pathlib

import pytest

from acflow.cli import main
from acflow.config import (ConfigError, RunConfig, config_from_text,
                           load_config, scheme_order)
from acflow.convection import NonlinearityForm
from acflow.grid import BC
from acflow.schedules import AdaptiveDiv, Constant, Oscillating, SmoothRamp


def test_empty_text_yields_documented_defaults():
    cfg = config_from_text("")
    assert cfg.grid.nx == cfg.grid.ny == 64
    assert cfg.grid.bc is BC.PERIODIC
    assert cfg.scheme == "new"
    assert cfg.form is NonlinearityForm.SKEW
    assert cfg.schedule == Constant(k=0.01)
    assert cfg.solver.picard_tol == 1e-11
    assert cfg.forcing == "none"
    assert cfg.init == "rest"


def test_full_key_set_round_trips():
    text = """
    grid.nx = 24        # trailing comment
    grid.ny = 12
    grid.lx = 2.0
    grid.ly = 1.0
    grid.bc = noslip

    scheme = bdf2_new
    form = rotational
    nu = 0.25
    t_final = 2.5
    schedule = oscillating
    oscillating.k_base = 0.02
    oscillating.amp = 0.005
    oscillating.freq = 7.5
    oscillating.warmup_steps = 4
    solver.picard_tol = 1e-9
    solver.krylov_max = 500
    forcing = manufactured_divfree_alt
    init = exact
    init.seed = 3
    init.amplitude = 0.5
    snapshot_every = 10
    convergence.k_list = 1/20, 1/40, 0.0125
    validate.steps = 50
    validate.beta = 5.0
    """
    cfg = config_from_text(text)
    assert (cfg.grid.nx, cfg.grid.ny, cfg.grid.lx) == (24, 12, 2.0)
    assert cfg.grid.bc is BC.NO_SLIP
    assert cfg.scheme == "bdf2_new" and scheme_order(cfg.scheme) == 2
    assert cfg.form is NonlinearityForm.ROTATIONAL
    assert cfg.schedule == Oscillating(k_base=0.02, amp=0.005, freq=7.5,
                                       warmup_steps=4)
    assert cfg.solver.picard_tol == 1e-9
    assert cfg.solver.krylov_max == 500
    assert cfg.convergence_k == (0.05, 0.025, 0.0125)
    assert cfg.validate_beta == 5.0


def test_unknown_key_reports_line_and_suggestion():
    with pytest.raises(ConfigError, match=r"<config>:2: unknown key 'grid.nz'"):
        config_from_text("grid.nx = 8\ngrid.nz = 8\n")
    with pytest.raises(ConfigError, match="did you mean 'grid.ny'"):
        config_from_text("grid.nx = 8\ngrid.nz = 8\n")


def test_duplicate_key_rejected_with_both_lines():
    with pytest.raises(ConfigError, match=r":3: duplicate key 'nu' \(first set on line 1\)"):
        config_from_text("nu = 0.1\n\nnu = 0.2\n")


def test_malformed_lines_rejected():
    with pytest.raises(ConfigError, match=r":1: expected 'key = value'"):
        config_from_text("just words\n")
    with pytest.raises(ConfigError, match="empty key or value"):
        config_from_text("nu =\n")


def test_typed_value_errors_carry_key_and_line():
    with pytest.raises(ConfigError, match=r":1: key 'grid.nx': expected an integer"):
        config_from_text("grid.nx = eight\n")
    with pytest.raises(ConfigError, match="expected one of standard, new, bdf2_new"):
        config_from_text("scheme = fancy\n")
    with pytest.raises(ConfigError, match="expected a number"):
        config_from_text("convergence.k_list = 0.1, fast\n")


def test_cross_field_validation():
    with pytest.raises(ConfigError, match="t_final must be positive"):
        config_from_text("t_final = 0\n")
    with pytest.raises(ConfigError, match="init = exact needs a manufactured"):
        config_from_text("init = exact\n")
    with pytest.raises(ConfigError, match="requires grid.bc = noslip"):
        config_from_text("forcing = manufactured_printed\n")
    with pytest.raises(ConfigError, match="entries must be positive"):
        config_from_text("convergence.k_list = 0.1, -0.05\n")


def test_schedule_kind_construction_and_validation():
    cfg = config_from_text("schedule = adaptive_div\nadaptive.tol_lo = 0.002\n")
    assert isinstance(cfg.schedule, AdaptiveDiv)
    assert cfg.schedule.tol_lo == 0.002
    cfg = config_from_text("schedule = smooth_ramp\nramp.k0 = 0.001\nramp.k1 = 0.004\n")
    assert cfg.schedule == SmoothRamp(k0=0.001, k1=0.004, ramp_time=1.0)
    # kind invariants surface as config errors, not raw ValueErrors
    with pytest.raises(ConfigError):
        config_from_text("schedule = oscillating\noscillating.amp = 0.5\n")
    with pytest.raises(ConfigError):
        config_from_text("schedule = adaptive_div\nadaptive.k_min = 0\n")


def test_load_config_missing_file():
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config("/nonexistent/path.cfg")


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_run_writes_series_and_returns_zero(tmp_path):
    cfgp = _write(tmp_path, "run.cfg",
                  "grid.nx = 8\ngrid.ny = 8\nt_final = 0.02\nconstant.k = 0.01\n")
    out = tmp_path / "out"
    assert main(["run", "--config", cfgp, "--out", str(out)]) == 0
    text = (out / "series.csv").read_text()
    assert text.startswith("# ac-series v1\n")
    assert "norm_div" in text.splitlines()[1]


def test_cli_config_error_exits_two(tmp_path, capsys):
    cfgp = _write(tmp_path, "bad.cfg", "grid.nx = 8\nbogus = 1\n")
    assert main(["run", "--config", cfgp, "--out", str(tmp_path)]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "nope.cfg"),
                 "--out", str(tmp_path)]) == 2


def test_cli_solver_failure_exits_three(tmp_path, capsys):
    cfgp = _write(tmp_path, "explode.cfg", "\n".join([
        "grid.nx = 16", "grid.ny = 16", "nu = 0.0", "t_final = 0.01",
        "constant.k = 0.01", "init = random_smooth", "init.amplitude = 100",
    ]) + "\n")
    assert main(["run", "--config", cfgp, "--out", str(tmp_path / "o3")]) == 3
    assert "solver failure" in capsys.readouterr().err


def test_cli_controller_stuck_exits_four(tmp_path, capsys):
    # the first manufactured pair is not divergence-free, so the
    # controller can never reach its acceptance band and must bottom out
    cfgp = _write(tmp_path, "stuck.cfg", "\n".join([
        "grid.nx = 16", "grid.ny = 16", "grid.bc = noslip",
        "forcing = manufactured_printed", "init = exact", "nu = 1.0",
        "t_final = 0.05", "schedule = adaptive_div", "adaptive.k0 = 0.001",
        "adaptive.k_min = 1e-5",
    ]) + "\n")
    assert main(["adapt", "--config", cfgp, "--out", str(tmp_path / "o4")]) == 4
    assert "stuck" in capsys.readouterr().err


def test_cli_validate_schedule_reports_verdict(tmp_path, capsys):
    cfgp = _write(tmp_path, "v.cfg",
                  "schedule = constant\nconstant.k = 0.02\nvalidate.steps = 12\n")
    out = tmp_path / "vout"
    assert main(["validate-schedule", "--config", cfgp, "--out", str(out)]) == 0
    assert "satisfied" in capsys.readouterr().out
    report = (out / "validate_report.txt").read_text()
    assert "max_ratio = 0.0" in report
    samples = (out / "schedule_samples.csv").read_text()
    assert samples.startswith("# ac-validate v1\n")


def test_cli_acoustic_and_convergence_commands(tmp_path, capsys):
    cfgp = _write(tmp_path, "a.cfg", "\n".join([
        "grid.nx = 8", "grid.ny = 8", "acoustic.k = 0.02",
        "acoustic.steps = 20",
    ]) + "\n")
    out = tmp_path / "aout"
    assert main(["acoustic", "--config", cfgp, "--out", str(out)]) == 0
    assert (out / "acoustic.csv").read_text().startswith("# ac-acoustic v1\n")

    cfgp = _write(tmp_path, "c.cfg", "\n".join([
        "grid.nx = 12", "grid.ny = 12", "grid.bc = noslip",
        "forcing = manufactured_divfree_alt", "init = exact", "nu = 0.5",
        "t_final = 0.1", "convergence.k_list = 0.05, 0.025",
    ]) + "\n")
    out2 = tmp_path / "cout"
    assert main(["convergence", "--config", cfgp, "--out", str(out2)]) == 0
    assert (out2 / "convergence.csv").read_text().startswith("# ac-convergence v1\n")
    assert "orders:" in capsys.readouterr().out


def test_cli_adapt_requires_adaptive_schedule(tmp_path, capsys):
    cfgp = _write(tmp_path, "na.cfg", "\n".join([
        "grid.nx = 8", "grid.ny = 8", "grid.bc = noslip",
        "forcing = manufactured_divfree_alt", "init = exact",
        "t_final = 0.02",
    ]) + "\n")
    assert main(["adapt", "--config", cfgp, "--out", str(tmp_path / "x")]) == 2
    assert "adaptive_div" in capsys.readouterr().err


def test_picard_damping_key_round_trips():
    cfg = config_from_text("solver.picard_damping = 0.5")
    assert cfg.solver.picard_damping == 0.5
    assert config_from_text("").solver.picard_damping == 1.0
    with pytest.raises(ConfigError, match="picard_damping"):
        config_from_text("solver.picard_damping = 0")
