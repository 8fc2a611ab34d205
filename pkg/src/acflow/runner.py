"""Experiment drivers: stepping loops, adaptive control, and CSV output.

Every driver takes a RunConfig plus an optional output directory; with a
directory it writes versioned CSV series (and snapshots), without one it
only returns the in-memory result, which keeps tests free of file IO.
Runs are bit-reproducible for a fixed config: reductions have a fixed
order, random initial data is seeded, and floats are written with repr.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .config import ConfigError, RunConfig, scheme_order
from .diagnostics import (EnergyLedger, SeriesWriter, error_report,
                          ledger_new, ledger_standard)
from .grid import (BC, ScalarField, VectorField, divergence, l2norm,
                   sample_vector, smooth_random_pressure,
                   smooth_random_velocity, write_field, zero_scalar,
                   zero_vector)
from .manufactured import ManufacturedSolution, solution_by_name
from .acoustic import (acoustic_step, model_energy, model_rate_report,
                       standing_wave_state, wave_energy, wave_energy_fd,
                       wave_rate_report)
from .schedules import (AdaptiveDiv, Constant, Decision, accept_step,
                        apply_decision, audit, continuum_condition_check,
                        eps_for, initial_state, propose,
                        validate_slow_variation)
from .stepper import (PicardDivergedError, StepInputs, StepResult,
                      step_bdf2_new, step_new, step_standard)

SERIES_VERSION = "# ac-series v1"
DECISIONS_VERSION = "# ac-decisions v1"
CONVERGENCE_VERSION = "# ac-convergence v1"
ACOUSTIC_VERSION = "# ac-acoustic v1"
VALIDATE_VERSION = "# ac-validate v1"

_STEPPERS = {"standard": step_standard, "new": step_new,
             "bdf2_new": step_bdf2_new}


def rotational_forcing(grid) -> VectorField:
    """Rigid-swirl body force about the box center.

    The classical formula lives on [-1, 1]^2; sampling recenters the unit
    square onto it, so the swirl axis sits at (1/2, 1/2).
    """
    def fx(x, y, t):
        xs, ys = 2.0 * x - 1.0, 2.0 * y - 1.0
        return -4.0 * ys * (1.0 - xs * xs - ys * ys)

    def fy(x, y, t):
        xs, ys = 2.0 * x - 1.0, 2.0 * y - 1.0
        return 4.0 * xs * (1.0 - xs * xs - ys * ys)

    return sample_vector(grid, fx, fy)


@dataclass
class ForcingBundle:
    f_at: Optional[Callable[[float], VectorField]]
    g_at: Optional[Callable[[float, float], ScalarField]]
    ms: Optional[ManufacturedSolution]


def build_forcing(cfg: RunConfig) -> ForcingBundle:
    if cfg.forcing == "none":
        return ForcingBundle(None, None, None)
    if cfg.forcing == "rotational2d":
        f_const = rotational_forcing(cfg.grid)
        return ForcingBundle(lambda t: f_const, None, None)
    ms = solution_by_name(cfg.forcing[len("manufactured_"):])
    grid, nu, form = cfg.grid, cfg.nu, cfg.form
    # a divergence-free target gets no continuity source: the run then
    # commits the full O(eps) compression error against the exact
    # incompressible pair, which is exactly what the order claim counts.
    # the non-divergence-free pair needs its source just to be a solution.
    if ms.divergence_free:
        g_at = None
    else:
        g_at = lambda t, eps: ms.source(grid, t, eps)
    return ForcingBundle(lambda t: ms.forcing(grid, t, nu, form), g_at, ms)


def initial_fields(cfg: RunConfig,
                   ms: Optional[ManufacturedSolution]):
    if cfg.init == "rest":
        return zero_vector(cfg.grid), zero_scalar(cfg.grid)
    if cfg.init == "exact":
        return ms.velocity(cfg.grid, 0.0), ms.pressure(cfg.grid, 0.0)
    u = smooth_random_velocity(cfg.grid, cfg.init_seed,
                               amplitude=cfg.init_amplitude)
    p = smooth_random_pressure(cfg.grid, cfg.init_seed + 1,
                               amplitude=cfg.init_amplitude)
    return u, p


@dataclass
class RunResult:
    u: VectorField
    p: ScalarField
    t: float
    steps: int
    rows: list
    decisions: list
    n_doubled: int = 0
    n_halved: int = 0
    err_u: float = math.nan
    err_p: float = math.nan


_BASE_COLUMNS = ("n", "t", "k", "eps", "norm_u", "norm_p", "norm_div",
                 "picard_iters", "krylov_iters", "energy_start", "energy_end",
                 "jump_u", "jump_p", "viscous", "work", "source_work",
                 "var_eps_source", "residual")


def _make_ledger(scheme: str, inputs: StepInputs, result: StepResult,
                 n: int) -> EnergyLedger:
    # the budget identity is exact for the one-leg schemes; for the
    # two-step scheme the same columns are reported but the residual is
    # a plain O(k^3) defect, not a solver check
    if scheme == "standard":
        return ledger_standard(inputs, result, n)
    return ledger_new(inputs, result, n)


def run_simulation(cfg: RunConfig, out_dir=None,
                   series_name: str = "series.csv") -> RunResult:
    """March the configured problem to t_final under its schedule.

    A step whose Picard iteration diverges is retried with the damping
    factor halved (the reduction persists for the rest of the run); the
    PicardDivergedError propagates once damping reaches the 0.05 floor.
    """
    order = scheme_order(cfg.scheme)
    bundle = build_forcing(cfg)
    u, p = initial_fields(cfg, bundle.ms)
    sched = initial_state(cfg.schedule, order)
    adaptive = isinstance(cfg.schedule, AdaptiveDiv)
    step_fn = _STEPPERS[cfg.scheme]

    columns = _BASE_COLUMNS + (("err_u", "err_p") if bundle.ms else ())
    writer = None
    dec_writer = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        writer = SeriesWriter(os.path.join(out_dir, series_name), columns,
                              SERIES_VERSION)
        if adaptive:
            dec_writer = SeriesWriter(
                os.path.join(out_dir, "decisions.csv"),
                ("attempt", "n", "t", "k_trial", "div_norm", "decision"),
                DECISIONS_VERSION)

    rows: list = []
    decisions: list = []
    result = RunResult(u=u, p=p, t=0.0, steps=0, rows=rows,
                       decisions=decisions)
    u_prev: Optional[VectorField] = None
    k_prev: Optional[float] = None
    attempt = 0
    t_slack = 1e-12 * max(1.0, cfg.t_final)
    solver = cfg.solver
    try:
        while sched.t_n < cfg.t_final - t_slack:
            k, eps = propose(cfg.schedule, sched, order)
            if sched.t_n + k > cfg.t_final:
                k = cfg.t_final - sched.t_n
                eps = eps_for(k, order)
            t_next = sched.t_n + k
            inputs = StepInputs(
                u_n=u, p_n=p, k_np1=k, eps_n=sched.eps_n, eps_np1=eps,
                nu=cfg.nu,
                f_np1=bundle.f_at(t_next) if bundle.f_at else None,
                g_np1=bundle.g_at(t_next, eps) if bundle.g_at else None,
                form=cfg.form, u_nm1=u_prev, k_n=k_prev)
            use_new = cfg.scheme == "bdf2_new" and u_prev is None
            while True:
                try:
                    out = (step_new if use_new else step_fn)(inputs, solver)
                    break
                except PicardDivergedError:
                    # convection-dominated steps push the frozen-convection
                    # map outside the unit disk; retry under stronger
                    # under-relaxation, and give up below the floor where
                    # genuine blow-ups land
                    if solver.picard_damping <= 0.05:
                        raise
                    solver = replace(solver,
                                     picard_damping=solver.picard_damping / 2)
            div_norm = l2norm(divergence(out.u_np1))

            if adaptive:
                attempt += 1
                decision = audit(cfg.schedule, div_norm, sched)
                decisions.append((attempt, sched.n, t_next, k, div_norm,
                                  decision.name))
                if dec_writer is not None:
                    dec_writer.write_row({"attempt": attempt, "n": sched.n,
                                          "t": t_next, "k_trial": k,
                                          "div_norm": div_norm,
                                          "decision": decision.name})
                apply_decision(cfg.schedule, sched, decision, k, eps)
                if decision is Decision.REJECT_AND_HALVE:
                    result.n_halved += 1
                    continue
                if decision is Decision.ACCEPT_AND_DOUBLE:
                    result.n_doubled += 1
            else:
                accept_step(sched, k, eps)

            ledger = _make_ledger(cfg.scheme, inputs, out, sched.n)
            u_prev, k_prev = u, k
            u, p = out.u_np1, out.p_np1
            row = {"n": sched.n, "t": sched.t_n, "k": k, "eps": eps,
                   "norm_u": l2norm(u), "norm_p": l2norm(p),
                   "norm_div": div_norm, "picard_iters": out.picard_iters,
                   "krylov_iters": out.krylov_iters,
                   "energy_start": ledger.energy_start,
                   "energy_end": ledger.energy_end, "jump_u": ledger.jump_u,
                   "jump_p": ledger.jump_p, "viscous": ledger.viscous,
                   "work": ledger.work, "source_work": ledger.source_work,
                   "var_eps_source": ledger.var_eps_source,
                   "residual": ledger.residual}
            if bundle.ms is not None:
                rep = error_report(u, p, bundle.ms, sched.t_n)
                row["err_u"] = rep.err_u
                row["err_p"] = rep.err_p
            rows.append(row)
            if writer is not None:
                writer.write_row(row)
            if (out_dir is not None and cfg.snapshot_every > 0
                    and sched.n % cfg.snapshot_every == 0):
                tag = f"{sched.n:06d}"
                write_field(os.path.join(out_dir, f"snap_u_{tag}.dat"), u)
                write_field(os.path.join(out_dir, f"snap_p_{tag}.dat"), p)
    finally:
        if writer is not None:
            writer.close()
        if dec_writer is not None:
            dec_writer.close()

    result.u, result.p = u, p
    result.t = sched.t_n
    result.steps = sched.n
    if bundle.ms is not None and rows:
        result.err_u = rows[-1]["err_u"]
        result.err_p = rows[-1]["err_p"]
    return result


def _lsq_order(ks, errs) -> float:
    """Least-squares slope of log err against log k."""
    pts = [(math.log(k), math.log(e)) for k, e in zip(ks, errs) if e > 0]
    if len(pts) < 2:
        return math.nan
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    xm, ym = xs.mean(), ys.mean()
    return float(np.dot(xs - xm, ys - ym) / np.dot(xs - xm, xs - xm))


@dataclass
class ConvergenceResult:
    ks: tuple
    err_u: list
    err_p: list
    rich_u: list
    rich_p: list
    order_u: float
    order_p: float
    rich_order_u: float
    rich_order_p: float


def run_convergence(cfg: RunConfig, out_dir=None) -> ConvergenceResult:
    """Rerun the manufactured problem over a step-size ladder.

    Errors against the exact pair carry the fixed spatial floor, so the
    temporal order is also estimated from differences of successive-k
    solutions, where the floor cancels.
    """
    if not cfg.forcing.startswith("manufactured"):
        raise ConfigError("convergence driver requires a manufactured forcing")
    order = scheme_order(cfg.scheme)
    ks = tuple(sorted(cfg.convergence_k, reverse=True))
    finals = []
    err_u, err_p = [], []
    for k in ks:
        sub = replace(cfg, schedule=Constant(k=k), init="exact")
        res = run_simulation(sub, out_dir=None)
        finals.append((res.u, res.p))
        err_u.append(res.err_u)
        err_p.append(res.err_p)
    rich_u = [l2norm(finals[i][0] - finals[i + 1][0])
              for i in range(len(ks) - 1)]
    rich_p = [l2norm(finals[i][1] - finals[i + 1][1])
              for i in range(len(ks) - 1)]
    out = ConvergenceResult(
        ks=ks, err_u=err_u, err_p=err_p, rich_u=rich_u, rich_p=rich_p,
        order_u=_lsq_order(ks, err_u), order_p=_lsq_order(ks, err_p),
        rich_order_u=_lsq_order(ks[:-1], rich_u),
        rich_order_p=_lsq_order(ks[:-1], rich_p))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with SeriesWriter(os.path.join(out_dir, "convergence.csv"),
                          ("k", "eps", "err_u", "err_p", "rich_u", "rich_p"),
                          CONVERGENCE_VERSION) as w:
            for i, k in enumerate(ks):
                w.write_row({"k": k, "eps": eps_for(k, order),
                             "err_u": err_u[i], "err_p": err_p[i],
                             "rich_u": rich_u[i] if i < len(rich_u) else math.nan,
                             "rich_p": rich_p[i] if i < len(rich_p) else math.nan})
            w.comment(f"order_u={out.order_u!r} order_p={out.order_p!r}")
            w.comment(f"rich_order_u={out.rich_order_u!r} "
                      f"rich_order_p={out.rich_order_p!r}")
    return out


def run_adaptive(cfg: RunConfig, out_dir=None) -> RunResult:
    """Divergence-controller experiment; requires the adaptive schedule."""
    if not isinstance(cfg.schedule, AdaptiveDiv):
        raise ConfigError("adapt driver requires schedule = adaptive_div")
    if not cfg.forcing.startswith("manufactured"):
        raise ConfigError("adapt driver requires a manufactured forcing")
    return run_simulation(cfg, out_dir=out_dir)


@dataclass
class AcousticResult:
    rows: list
    drift_W: float
    drift_W_fd: float


def run_acoustic(cfg: RunConfig, out_dir=None) -> AcousticResult:
    """Standing-wave run of the linear acoustic sub-model."""
    if cfg.grid.bc is not BC.PERIODIC:
        raise ConfigError("acoustic driver requires grid.bc = periodic")
    lab = cfg.acoustic
    eps_fn = lab.eps_fn()
    state = standing_wave_state(cfg.grid, lab.mode, lab.eps0,
                                amplitude=cfg.init_amplitude)
    states = [state]
    for _ in range(lab.steps):
        state = acoustic_step(state, eps_fn, lab.k, cfg.solver)
        states.append(state)

    rows = []
    W0 = wave_energy(states[0], eps_fn(states[0].t))
    fd_series = []
    for i, s in enumerate(states):
        eps = eps_fn(s.t)
        row = {"n": i, "t": s.t, "k": lab.k, "eps": eps,
               "W": wave_energy(s, eps), "E": model_energy(s, eps),
               "W_fd": math.nan, "wave_rate_lhs": math.nan,
               "wave_rate_rhs": math.nan, "wave_rate_residual": math.nan,
               "model_rate_lhs": math.nan, "model_rate_rhs": math.nan,
               "model_rate_residual": math.nan}
        if 0 < i < len(states) - 1:
            row["W_fd"] = wave_energy_fd(states[i - 1], s, states[i + 1], eps)
            fd_series.append(row["W_fd"])
            wr = wave_rate_report(states[i - 1], s, states[i + 1], eps_fn)
            mr = model_rate_report(states[i - 1], s, states[i + 1], eps_fn)
            row["wave_rate_lhs"] = wr.rate_lhs
            row["wave_rate_rhs"] = wr.rate_rhs
            row["wave_rate_residual"] = wr.residual
            row["model_rate_lhs"] = mr.rate_lhs
            row["model_rate_rhs"] = mr.rate_rhs
            row["model_rate_residual"] = mr.residual
        rows.append(row)

    drift_W = max(abs(r["W"] - W0) for r in rows)
    drift_fd = (max(abs(w - fd_series[0]) for w in fd_series)
                if fd_series else math.nan)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        cols = ("n", "t", "k", "eps", "W", "E", "W_fd", "wave_rate_lhs",
                "wave_rate_rhs", "wave_rate_residual", "model_rate_lhs",
                "model_rate_rhs", "model_rate_residual")
        with SeriesWriter(os.path.join(out_dir, "acoustic.csv"), cols,
                          ACOUSTIC_VERSION) as w:
            for row in rows:
                w.write_row(row)
            w.comment(f"drift_W={drift_W!r} drift_W_fd={drift_fd!r}")
    return AcousticResult(rows=rows, drift_W=drift_W, drift_W_fd=drift_fd)


@dataclass
class ValidationOutcome:
    samples: list
    slow_variation: object
    continuum: object


def run_validate(cfg: RunConfig, out_dir=None) -> ValidationOutcome:
    """Audit the configured schedule against the slow-variation bound.

    The adaptive controller has no intrinsic trajectory, so it is driven
    with a zero divergence signal; that realizes its fastest (pure
    doubling) path, which is exactly the case the bound rules out.
    """
    order = scheme_order(cfg.scheme)
    st = initial_state(cfg.schedule, order)
    samples = []
    times = [0.0]
    for _ in range(cfg.validate_steps):
        k, eps = propose(cfg.schedule, st, order)
        samples.append((k, eps))
        if isinstance(cfg.schedule, AdaptiveDiv):
            decision = audit(cfg.schedule, 0.0, st)
            apply_decision(cfg.schedule, st, decision, k, eps)
        else:
            accept_step(st, k, eps)
        times.append(st.t_n)
    report = validate_slow_variation(samples, cfg.validate_beta)
    continuum = None
    if cfg.validate_steps >= 5:
        mean_k = sum(k for k, _ in samples) / len(samples)
        continuum = continuum_condition_check([e for _, e in samples], mean_k)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with SeriesWriter(os.path.join(out_dir, "schedule_samples.csv"),
                          ("n", "t", "k", "eps"), VALIDATE_VERSION) as w:
            for j, (k, eps) in enumerate(samples):
                w.write_row({"n": j, "t": times[j], "k": k, "eps": eps})
        with open(os.path.join(out_dir, "validate_report.txt"), "w") as fh:
            fh.write(f"beta = {cfg.validate_beta!r}\n")
            fh.write(f"satisfied = {report.satisfied}\n")
            fh.write(f"max_ratio = {report.max_ratio!r}\n")
            fh.write(f"worst_index = {report.worst_index}\n")
            fh.write(f"jump_indices = {list(report.jump_indices)}\n")
            if continuum is not None:
                fh.write(f"sup_eps = {continuum.sup_eps!r}\n")
                fh.write(f"sup_rate = {continuum.sup_rate!r}\n")
                fh.write(f"sup_curvature = {continuum.sup_curvature!r}\n")
    return ValidationOutcome(samples=samples, slow_variation=report,
                             continuum=continuum)
