"""Per-step energy ledgers, stability audits, and run instrumentation.

The ledgers evaluate every term of the discrete per-step energy
identities with the grid module's inner products and report the closure
residual.  For the variable-eps scheme the identity is

    [E_{n+1} - E_n] + 1/2 ||u_{n+1}-u_n||^2 + (eps_n/2) ||p_{n+1}-p_n||^2
        + k nu ||grad u_{n+1}||^2
    = k <f, u_{n+1}> + k <g, p_{n+1}>

with E_n = 1/2 ||u_n||^2 + (eps_n/2) ||p_n||^2.  The pressure-jump
dissipation carries the older eps value; the ledger also records the
eps_{n+1}-weighted variant (``jump_p_alt``) so tests can confirm that
coefficient does not close the budget when eps varies.  The standard
scheme's identity reads the same with (eps_{n+1}/2) on the pressure
jump and the extra right-hand term 1/2 (eps_{n+1}-eps_n) ||p_n||^2,
which injects energy when eps grows and removes it when eps shrinks.

Both identities are exact for the exact solution of the implicit step,
so the residual of a converged step is bounded by the iterative solver
tolerances times the largest ledger term; the audits use the factor
100 (picard_tol + krylov_tol) for slack.

``zero_stability_audit`` checks a forcing-free run's energy sequence
y_n = 1/2 int |u_n|^2 + (eps_n/2) int p_n^2 against the discrete bound
y_n <= prod_j (1 + k_j beta) y_0 and the weaker exp(beta t_n) y_0, both
with relative slack 1e-8.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .grid import (ScalarField, VectorField, divergence, h1_seminorm_sq,
                   inner, l2norm)
from .manufactured import ManufacturedSolution
from .stepper import StepInputs, StepResult


@dataclass(frozen=True)
class EnergyLedger:
    n: int
    kinetic_start: float
    kinetic_end: float
    pressure_start: float
    pressure_end: float
    jump_u: float
    jump_p: float
    jump_p_alt: float
    viscous: float
    work: float
    source_work: float
    var_eps_source: float
    residual: float

    @property
    def max_term(self) -> float:
        return max(abs(self.kinetic_start), abs(self.kinetic_end),
                   abs(self.pressure_start), abs(self.pressure_end),
                   self.jump_u, abs(self.jump_p), self.viscous,
                   abs(self.work), abs(self.source_work),
                   abs(self.var_eps_source))

    @property
    def energy_start(self) -> float:
        return self.kinetic_start + self.pressure_start

    @property
    def energy_end(self) -> float:
        return self.kinetic_end + self.pressure_end


def _ledger_terms(inputs: StepInputs, result: StepResult):
    k = inputs.k_np1
    du = result.u_np1 - inputs.u_n
    dp = result.p_np1 - inputs.p_n
    kinetic_start = 0.5 * inner(inputs.u_n, inputs.u_n)
    kinetic_end = 0.5 * inner(result.u_np1, result.u_np1)
    pressure_start = 0.5 * inputs.eps_n * inner(inputs.p_n, inputs.p_n)
    pressure_end = 0.5 * inputs.eps_np1 * inner(result.p_np1, result.p_np1)
    jump_u = 0.5 * inner(du, du)
    dp_sq = inner(dp, dp)
    viscous = k * inputs.nu * h1_seminorm_sq(result.u_np1)
    work = 0.0 if inputs.f_np1 is None else k * inner(inputs.f_np1, result.u_np1)
    source_work = 0.0 if inputs.g_np1 is None \
        else k * inner(inputs.g_np1, result.p_np1)
    return (kinetic_start, kinetic_end, pressure_start, pressure_end,
            jump_u, dp_sq, viscous, work, source_work)


def ledger_new(inputs: StepInputs, result: StepResult, n: int = 0) -> EnergyLedger:
    """Energy budget of a completed variable-eps step."""
    (ks, ke, ps, pe, ju, dp_sq, visc, work, swork) = _ledger_terms(inputs, result)
    jump_p = 0.5 * inputs.eps_n * dp_sq
    jump_p_alt = 0.5 * inputs.eps_np1 * dp_sq
    residual = (ke - ks) + (pe - ps) + ju + jump_p + visc - work - swork
    return EnergyLedger(n=n, kinetic_start=ks, kinetic_end=ke,
                        pressure_start=ps, pressure_end=pe, jump_u=ju,
                        jump_p=jump_p, jump_p_alt=jump_p_alt, viscous=visc,
                        work=work, source_work=swork, var_eps_source=0.0,
                        residual=residual)


def ledger_standard(inputs: StepInputs, result: StepResult,
                    n: int = 0) -> EnergyLedger:
    """Energy budget of a completed standard-scheme step."""
    (ks, ke, ps, pe, ju, dp_sq, visc, work, swork) = _ledger_terms(inputs, result)
    jump_p = 0.5 * inputs.eps_np1 * dp_sq
    jump_p_alt = 0.5 * inputs.eps_n * dp_sq
    var_src = 0.5 * (inputs.eps_np1 - inputs.eps_n) \
        * inner(inputs.p_n, inputs.p_n)
    residual = (ke - ks) + (pe - ps) + ju + jump_p + visc \
        - work - swork - var_src
    return EnergyLedger(n=n, kinetic_start=ks, kinetic_end=ke,
                        pressure_start=ps, pressure_end=pe, jump_u=ju,
                        jump_p=jump_p, jump_p_alt=jump_p_alt, viscous=visc,
                        work=work, source_work=swork, var_eps_source=var_src,
                        residual=residual)


@dataclass(frozen=True)
class ZeroStabilityReport:
    passed: bool
    product_margin: float
    exp_margin: float
    worst_index: int
    beta: float

    def __str__(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (f"zero-stability audit: {verdict} (beta={self.beta:.6g}, "
                f"product margin={self.product_margin:.3e}, "
                f"exp margin={self.exp_margin:.3e}, "
                f"worst step={self.worst_index})")


_SLACK = 1e-8


def zero_stability_audit(y_series: Sequence[float], k_series: Sequence[float],
                         beta: float) -> ZeroStabilityReport:
    """Check y_n against the growth bounds of a slowly varying schedule.

    ``y_series`` holds y_0 .. y_N; ``k_series`` the N accepted step
    sizes.  Margins are the smallest normalized gap (bound - y)/bound
    over the run; negative means the bound was violated.  Returns a
    report rather than raising, so callers can log failures.
    """
    if len(y_series) != len(k_series) + 1:
        raise ValueError("need one more energy sample than step sizes")
    if not (beta >= 0.0 and math.isfinite(beta)):
        raise ValueError("beta must be finite and nonnegative")
    y0 = y_series[0]
    prod_bound = y0
    t_n = 0.0
    prod_margin = math.inf
    exp_margin = math.inf
    worst = 0
    for n, k in enumerate(k_series, start=1):
        prod_bound *= (1.0 + k * beta)
        t_n += k
        exp_bound = y0 * math.exp(beta * t_n)
        y_n = y_series[n]
        allowed_prod = prod_bound * (1.0 + _SLACK)
        allowed_exp = exp_bound * (1.0 + _SLACK)
        pm = (allowed_prod - y_n) / max(allowed_prod, 1e-300)
        em = (allowed_exp - y_n) / max(allowed_exp, 1e-300)
        if pm < prod_margin:
            prod_margin = pm
            worst = n
        exp_margin = min(exp_margin, em)
    passed = prod_margin >= 0.0 and exp_margin >= 0.0
    return ZeroStabilityReport(passed=passed, product_margin=prod_margin,
                               exp_margin=exp_margin, worst_index=worst,
                               beta=beta)


@dataclass(frozen=True)
class ErrorReport:
    err_u: float
    err_p: float
    div_norm: float


def error_report(u: VectorField, p: ScalarField, ms: ManufacturedSolution,
                 t: float) -> ErrorReport:
    """L2 errors against the exact pair sampled at native grid sites."""
    u_exact = ms.velocity(u.grid, t)
    p_exact = ms.pressure(p.grid, t)
    return ErrorReport(err_u=l2norm(u - u_exact),
                       err_p=l2norm(p - p_exact),
                       div_norm=l2norm(divergence(u)))


class SeriesWriter:
    """CSV writer with a version comment line and a fixed column set.

    Floats are written with repr so rereads round-trip bitwise; rows
    must supply exactly the declared columns.
    """

    def __init__(self, path, columns: Sequence[str], version: str):
        self.columns = tuple(columns)
        self._fh = open(path, "w", newline="")
        self._fh.write(version + "\n")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(self.columns)

    def write_row(self, values: dict) -> None:
        if set(values) != set(self.columns):
            missing = set(self.columns) - set(values)
            extra = set(values) - set(self.columns)
            raise ValueError(f"row mismatch: missing {sorted(missing)}, "
                             f"unexpected {sorted(extra)}")
        row = []
        for c in self.columns:
            v = values[c]
            row.append(repr(v) if isinstance(v, float) else v)
        self._writer.writerow(row)

    def comment(self, text: str) -> None:
        self._fh.write(f"# {text}\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_series(path) -> Tuple[str, list]:
    """Read a versioned CSV back as (version, list of row dicts).

    Comment lines after the header are skipped; numeric fields are
    returned as floats, integer-looking fields as ints.
    """
    with open(path, "r", newline="") as fh:
        version = fh.readline().strip()
        if not version.startswith("#"):
            raise ValueError(f"{path}: missing version comment line")
        rows = []
        header: Optional[list] = None
        for line in fh:
            if line.startswith("#"):
                continue
            parsed = next(csv.reader([line]))
            if header is None:
                header = parsed
                continue
            row = {}
            for key, raw in zip(header, parsed):
                try:
                    row[key] = int(raw)
                except ValueError:
                    try:
                        row[key] = float(raw)
                    except ValueError:
                        row[key] = raw
            rows.append(row)
    return version, rows
