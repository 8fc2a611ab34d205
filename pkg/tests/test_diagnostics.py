import math

import numpy as np
import pytest

from acflow.diagnostics import (EnergyLedger, ErrorReport, SeriesWriter,
                                ZeroStabilityReport, error_report, ledger_new,
                                ledger_standard, read_series,
                                zero_stability_audit)
from acflow.grid import (BC, GridSpec, l2norm, smooth_random_pressure,
                         smooth_random_velocity, zero_scalar, zero_vector)
from acflow.manufactured import divfree_solution, printed_solution
from acflow.stepper import SolverParams, StepInputs, step_new, step_standard

PARAMS = SolverParams(picard_tol=1e-12, picard_max=200,
                      krylov_tol=1e-12, krylov_max=50000)
TOL_FACTOR = 100.0 * (PARAMS.picard_tol + PARAMS.krylov_tol)


def make_inputs(grid, seed, k, eps_n, eps_np1, nu=0.05, with_g=False):
    u = smooth_random_velocity(grid, seed, amplitude=0.6)
    p = smooth_random_pressure(grid, seed + 500, amplitude=0.6)
    f = smooth_random_velocity(grid, seed + 900, amplitude=1.0)
    g = smooth_random_pressure(grid, seed + 1300, amplitude=0.3) if with_g else None
    return StepInputs(u_n=u, p_n=p, k_np1=k, eps_n=eps_n, eps_np1=eps_np1,
                      nu=nu, f_np1=f, g_np1=g)


# ---------------------------------------------------------------------------
# ledgers


def test_rest_step_ledger_all_zero():
    g = GridSpec(8, 8, 1.0, 1.0, BC.NO_SLIP)
    inputs = StepInputs(u_n=zero_vector(g), p_n=zero_scalar(g), k_np1=0.01,
                        eps_n=0.01, eps_np1=0.01, nu=0.5)
    led = ledger_new(inputs, step_new(inputs, PARAMS))
    assert led.max_term == 0.0
    assert led.residual == 0.0


@pytest.mark.parametrize("bc", [BC.PERIODIC, BC.NO_SLIP])
@pytest.mark.parametrize("with_g", [False, True])
def test_new_ledger_closes_for_varying_eps(bc, with_g):
    g = GridSpec(8, 8, 1.0, 1.0, bc)
    for seed, (eps_n, eps_np1) in enumerate([(0.01, 0.02), (0.02, 0.005),
                                             (0.013, 0.013)]):
        inputs = make_inputs(g, 10 + seed, k=0.012, eps_n=eps_n,
                             eps_np1=eps_np1, with_g=with_g)
        led = ledger_new(inputs, step_new(inputs, PARAMS), n=seed)
        assert abs(led.residual) <= TOL_FACTOR * led.max_term
        assert led.jump_u >= 0.0 and led.jump_p >= 0.0 and led.viscous >= 0.0
        assert led.var_eps_source == 0.0
        if with_g:
            assert led.source_work != 0.0


def test_new_ledger_alt_coefficient_does_not_close():
    # with eps varying and a nonzero pressure jump, swapping the jump
    # coefficient to eps_{n+1}/2 must break the identity
    g = GridSpec(8, 8, 1.0, 1.0, BC.NO_SLIP)
    inputs = make_inputs(g, 3, k=0.012, eps_n=0.01, eps_np1=0.03)
    led = ledger_new(inputs, step_new(inputs, PARAMS))
    residual_alt = led.residual - led.jump_p + led.jump_p_alt
    assert abs(led.residual) <= TOL_FACTOR * led.max_term
    assert abs(residual_alt) > 1e4 * max(abs(led.residual), 1e-300)


def test_new_scheme_dissipates_without_forcing():
    g = GridSpec(8, 8, 1.0, 1.0, BC.NO_SLIP)
    u = smooth_random_velocity(g, 4, amplitude=0.6)
    p = smooth_random_pressure(g, 5, amplitude=0.6)
    eps_seq = [0.01, 0.02, 0.004, 0.015, 0.01]
    eps_prev = eps_seq[0]
    for eps in eps_seq[1:]:
        inputs = StepInputs(u_n=u, p_n=p, k_np1=0.01, eps_n=eps_prev,
                            eps_np1=eps, nu=0.05)
        out = step_new(inputs, PARAMS)
        led = ledger_new(inputs, out)
        slack = TOL_FACTOR * max(led.max_term, 1e-300)
        assert led.energy_end <= led.energy_start + slack
        u, p, eps_prev = out.u_np1, out.p_np1, eps


def test_standard_ledger_constant_eps_matches_new():
    g = GridSpec(8, 8, 1.0, 1.0, BC.PERIODIC)
    inputs = make_inputs(g, 6, k=0.01, eps_n=0.01, eps_np1=0.01)
    out = step_standard(inputs, PARAMS)
    led_s = ledger_standard(inputs, out)
    led_n = ledger_new(inputs, out)
    assert led_s.var_eps_source == 0.0
    assert led_s.jump_p == led_n.jump_p
    assert abs(led_s.residual) <= TOL_FACTOR * led_s.max_term
    assert led_s.residual == led_n.residual


def test_standard_ledger_variable_eps_sign():
    g = GridSpec(8, 8, 1.0, 1.0, BC.NO_SLIP)
    grow = make_inputs(g, 7, k=0.01, eps_n=0.01, eps_np1=0.02)
    led = ledger_standard(grow, step_standard(grow, PARAMS))
    assert led.var_eps_source > 0.0
    assert abs(led.residual) <= TOL_FACTOR * led.max_term
    shrink = make_inputs(g, 8, k=0.01, eps_n=0.02, eps_np1=0.01)
    led2 = ledger_standard(shrink, step_standard(shrink, PARAMS))
    assert led2.var_eps_source < 0.0
    assert abs(led2.residual) <= TOL_FACTOR * led2.max_term


def test_ledger_energy_scale_invariance_of_bound():
    # residual bound is relative to the largest term, so scaling the
    # data by 10 (with a step small enough for Picard to contract) must
    # keep the normalized residual within tolerance
    g = GridSpec(8, 8, 1.0, 1.0, BC.PERIODIC)
    inputs = make_inputs(g, 9, k=0.002, eps_n=0.002, eps_np1=0.0034)
    big = StepInputs(u_n=10.0 * inputs.u_n, p_n=10.0 * inputs.p_n,
                     k_np1=inputs.k_np1, eps_n=inputs.eps_n,
                     eps_np1=inputs.eps_np1, nu=inputs.nu,
                     f_np1=10.0 * inputs.f_np1)
    led = ledger_new(big, step_new(big, PARAMS))
    assert abs(led.residual) <= TOL_FACTOR * led.max_term


# ---------------------------------------------------------------------------
# zero-stability audit


def test_audit_decaying_series_passes():
    k = [0.01] * 50
    y = [1.0 * math.exp(-0.3 * i) for i in range(51)]
    rep = zero_stability_audit(y, k, beta=0.5)
    assert rep.passed
    assert rep.product_margin > 0.0
    assert rep.exp_margin >= rep.product_margin - 1e-15


def test_audit_boundary_case_passes_within_slack():
    beta = 2.0
    k = [0.01, 0.02, 0.005, 0.03] * 10
    y = [1.0]
    for kj in k:
        y.append(y[-1] * (1.0 + kj * beta))
    rep = zero_stability_audit(y, k, beta)
    assert rep.passed
    assert 0.0 <= rep.product_margin <= 1e-7


def test_audit_detects_violation():
    beta = 1.0
    k = [0.01] * 20
    y = [1.0]
    for kj in k:
        y.append(y[-1] * (1.0 + kj * beta))
    y[7] *= 1.0 + 1e-6
    rep = zero_stability_audit(y, k, beta)
    assert not rep.passed
    assert rep.worst_index == 7
    assert rep.product_margin < 0.0
    assert "FAIL" in str(rep)


def test_audit_zero_initial_energy():
    rep = zero_stability_audit([0.0, 0.0, 0.0], [0.01, 0.01], beta=1.0)
    assert rep.passed
    bad = zero_stability_audit([0.0, 1e-12, 0.0], [0.01, 0.01], beta=1.0)
    assert not bad.passed


def test_audit_input_validation():
    with pytest.raises(ValueError):
        zero_stability_audit([1.0, 1.0], [0.01, 0.01], beta=1.0)
    with pytest.raises(ValueError):
        zero_stability_audit([1.0, 1.0, 1.0], [0.01, 0.01], beta=-1.0)


# ---------------------------------------------------------------------------
# error report


def test_error_report_exact_state_is_zero():
    g = GridSpec(16, 16, 1.0, 1.0, BC.NO_SLIP)
    ms = divfree_solution()
    t = 0.8
    rep = error_report(ms.velocity(g, t), ms.pressure(g, t), ms, t)
    assert rep.err_u == 0.0
    assert rep.err_p == 0.0
    assert rep.div_norm < 0.1


def test_error_report_zero_state_gives_exact_norms():
    g = GridSpec(16, 16, 1.0, 1.0, BC.NO_SLIP)
    ms = printed_solution()
    t = 1.2
    rep = error_report(zero_vector(g), zero_scalar(g), ms, t)
    assert rep.err_u == pytest.approx(l2norm(ms.velocity(g, t)), rel=1e-14)
    assert rep.err_p == pytest.approx(l2norm(ms.pressure(g, t)), rel=1e-14)
    assert rep.div_norm == 0.0


def test_error_report_perturbation_triangle_inequality():
    g = GridSpec(12, 12, 1.0, 1.0, BC.NO_SLIP)
    ms = divfree_solution()
    t = 0.5
    base_u = ms.velocity(g, t)
    base_p = ms.pressure(g, t)
    rng = np.random.default_rng(11)
    for _ in range(10):
        du = smooth_random_velocity(g, int(rng.integers(1, 10000)),
                                    amplitude=0.1)
        rep0 = error_report(base_u, base_p, ms, t)
        rep1 = error_report(base_u + du, base_p, ms, t)
        assert abs(rep1.err_u - rep0.err_u) <= l2norm(du) * (1 + 1e-12)


# ---------------------------------------------------------------------------
# series io


def test_series_writer_round_trip(tmp_path):
    path = tmp_path / "series.csv"
    cols = ["n", "t", "value"]
    with SeriesWriter(path, cols, "# ac-series v1") as w:
        w.write_row({"n": 0, "t": 0.1, "value": 1.0 / 3.0})
        w.write_row({"n": 1, "t": 0.2, "value": -2.5e-17})
        w.comment("trailing note")
    version, rows = read_series(path)
    assert version == "# ac-series v1"
    assert rows[0] == {"n": 0, "t": 0.1, "value": 1.0 / 3.0}
    assert rows[1]["value"] == -2.5e-17


def test_series_writer_rejects_bad_rows(tmp_path):
    w = SeriesWriter(tmp_path / "x.csv", ["a", "b"], "# v1")
    with pytest.raises(ValueError):
        w.write_row({"a": 1})
    with pytest.raises(ValueError):
        w.write_row({"a": 1, "b": 2, "c": 3})
    w.close()


def test_read_series_requires_version(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_series(p)
