"""Time-step and relaxation-parameter schedules.

A schedule produces the (k_{n+1}, eps_{n+1}) pair for each step.  The
relaxation parameter is tied to the step size by the scheme order:
eps = k for the first-order schemes and eps = k^2 for the two-step
scheme.  Four kinds are provided:

* ``Constant``: fixed k.
* ``Oscillating``: k = k_base for the first ``warmup_steps`` steps
  (inclusive), afterwards k = k_base + amp*sin(freq*t_n).
* ``AdaptiveDiv``: divergence-driven halving and doubling.  The step is
  run at the carried trial size, then ``audit`` inspects ||div u|| and
  decides: below tol_lo the step is accepted and the next size doubles
  (capped at k_max); above tol_hi the step is rejected and retried at
  half the size (floored at k_min); in between it is simply accepted.
  If the trial size already sits at k_min and the divergence is still
  above tol_hi the controller raises StepStuckError rather than loop.
* ``SmoothRamp``: C^2 transition from k0 to k1 over ramp_time using the
  quintic smoothstep 6 t^5 - 15 t^4 + 10 t^3.

Two validators support stability studies.  ``validate_slow_variation``
measures the largest |eps_{j+1} - eps_j| / (k_j eps_j) over a sampled
run and compares it against a target beta; it also flags samples where
eps jumps by half or more, the halving/doubling behavior whose ratio
blows up like 1/k as k -> 0.  ``continuum_condition_check`` estimates
sup eps, sup|eps_t|/eps and sup|eps_tt|/eps from uniformly sampled
eps(t) by centered differences; the condition is asymptotic so the
suprema are reported, not judged.

Rejected steps never advance t_n, and the adaptive controller never
emits a step size outside [k_min, k_max].  ``propose`` is pure: it
reads the state and never mutates it.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Sequence, Tuple, Union

import numpy as np


class StepStuckError(RuntimeError):
    """Adaptive controller pinned at k_min with divergence still out of band."""


class Decision(Enum):
    ACCEPT = "accept"
    ACCEPT_AND_DOUBLE = "accept_and_double"
    REJECT_AND_HALVE = "reject_and_halve"


def eps_for(k: float, order: int) -> float:
    """Relaxation parameter tied to the step size by scheme order."""
    if order == 1:
        return k
    if order == 2:
        return k * k
    raise ValueError(f"scheme order must be 1 or 2, got {order}")


@dataclass
class ScheduleState:
    """Controller state: step count, accumulated time, last accepted values.

    ``k_trial`` is the carried-forward trial size of the adaptive
    controller; the other kinds ignore it.  ``history`` keeps the last
    three accepted (t, eps) samples.
    """

    n: int = 0
    t_n: float = 0.0
    k_n: float = 1.0
    eps_n: float = 1.0
    k_trial: float = 1.0
    history: Deque[Tuple[float, float]] = field(
        default_factory=lambda: deque(maxlen=3))

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("step index must be nonnegative")
        if not (self.t_n >= 0.0 and math.isfinite(self.t_n)):
            raise ValueError("time must be finite and nonnegative")
        for name in ("k_n", "eps_n", "k_trial"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and positive")


@dataclass(frozen=True)
class Constant:
    k: float

    def __post_init__(self) -> None:
        if not (self.k > 0.0 and math.isfinite(self.k)):
            raise ValueError("k must be finite and positive")


@dataclass(frozen=True)
class Oscillating:
    k_base: float = 0.01
    amp: float = 0.002
    freq: float = 10.0
    warmup_steps: int = 10

    def __post_init__(self) -> None:
        if not (self.k_base > 0.0 and math.isfinite(self.k_base)):
            raise ValueError("k_base must be finite and positive")
        if not (0.0 <= self.amp < self.k_base):
            raise ValueError("amp must lie in [0, k_base) to keep k positive")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be nonnegative")


@dataclass(frozen=True)
class AdaptiveDiv:
    tol_lo: float = 0.001
    tol_hi: float = 0.01
    k0: float = 0.001
    k_min: float = 1e-6
    k_max: float = 0.1

    def __post_init__(self) -> None:
        if not (0.0 < self.tol_lo < self.tol_hi):
            raise ValueError("tolerances must satisfy 0 < tol_lo < tol_hi")
        if not (0.0 < self.k_min <= self.k0 <= self.k_max):
            raise ValueError("step bounds must satisfy 0 < k_min <= k0 <= k_max")


@dataclass(frozen=True)
class SmoothRamp:
    k0: float
    k1: float
    ramp_time: float

    def __post_init__(self) -> None:
        for name in ("k0", "k1", "ramp_time"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and positive")


ScheduleKind = Union[Constant, Oscillating, AdaptiveDiv, SmoothRamp]


def _smoothstep(theta: float) -> float:
    # quintic smoothstep: zero first and second derivatives at both ends
    return theta * theta * theta * (10.0 + theta * (6.0 * theta - 15.0))


def initial_state(kind: ScheduleKind, order: int = 1) -> ScheduleState:
    """State before the first step; k_n/eps_n hold the t=0 proposal."""
    if isinstance(kind, Constant):
        k = kind.k
    elif isinstance(kind, Oscillating):
        k = kind.k_base
    elif isinstance(kind, AdaptiveDiv):
        k = kind.k0
    elif isinstance(kind, SmoothRamp):
        k = kind.k0
    else:
        raise TypeError(f"unknown schedule kind {type(kind).__name__}")
    eps = eps_for(k, order)
    state = ScheduleState(n=0, t_n=0.0, k_n=k, eps_n=eps, k_trial=k)
    state.history.append((0.0, eps))
    return state


def propose(kind: ScheduleKind, state: ScheduleState,
            order: int = 1) -> Tuple[float, float]:
    """Step size and relaxation parameter for the step leaving t_n."""
    if isinstance(kind, Constant):
        k = kind.k
    elif isinstance(kind, Oscillating):
        if state.n <= kind.warmup_steps:
            k = kind.k_base
        else:
            k = kind.k_base + kind.amp * math.sin(kind.freq * state.t_n)
    elif isinstance(kind, AdaptiveDiv):
        k = state.k_trial
    elif isinstance(kind, SmoothRamp):
        theta = min(max(state.t_n / kind.ramp_time, 0.0), 1.0)
        k = kind.k0 + (kind.k1 - kind.k0) * _smoothstep(theta)
    else:
        raise TypeError(f"unknown schedule kind {type(kind).__name__}")
    return k, eps_for(k, order)


def audit(kind: AdaptiveDiv, div_norm: float,
          state: ScheduleState) -> Decision:
    """Post-step decision of the divergence controller."""
    if not isinstance(kind, AdaptiveDiv):
        raise TypeError("audit applies to the AdaptiveDiv schedule only")
    if not (div_norm >= 0.0 and math.isfinite(div_norm)):
        raise ValueError("divergence norm must be finite and nonnegative")
    if div_norm > kind.tol_hi:
        if state.k_trial <= kind.k_min * (1.0 + 1e-12):
            raise StepStuckError(
                f"divergence {div_norm:.3e} above {kind.tol_hi:.3e} "
                f"with step already at k_min={kind.k_min:.3e}")
        return Decision.REJECT_AND_HALVE
    if div_norm < kind.tol_lo:
        return Decision.ACCEPT_AND_DOUBLE
    return Decision.ACCEPT


def accept_step(state: ScheduleState, k: float, eps: float) -> None:
    """Record an accepted step: advance time and the history ring."""
    state.n += 1
    state.t_n += k
    state.k_n = k
    state.eps_n = eps
    state.history.append((state.t_n, eps))


def apply_decision(kind: AdaptiveDiv, state: ScheduleState,
                   decision: Decision, k_used: float, eps_used: float) -> None:
    """Fold an audit decision into the controller state.

    Rejections only shrink the trial size; accepted steps advance the
    state and, on a doubling decision, grow the trial (capped).
    """
    if decision is Decision.REJECT_AND_HALVE:
        state.k_trial = max(k_used / 2.0, kind.k_min)
        return
    accept_step(state, k_used, eps_used)
    if decision is Decision.ACCEPT_AND_DOUBLE:
        state.k_trial = min(2.0 * k_used, kind.k_max)
    else:
        state.k_trial = k_used


@dataclass(frozen=True)
class SlowVariationReport:
    beta: float
    max_ratio: float
    worst_index: int
    satisfied: bool
    jump_indices: Tuple[int, ...]


def validate_slow_variation(samples: Sequence[Tuple[float, float]],
                            beta: float) -> SlowVariationReport:
    """Check |eps_{j+1} - eps_j| / (k_j eps_j) <= beta over (k, eps) samples.

    Samples pair each step size with the relaxation value it produced.
    Jumps of half or more in eps are flagged separately: for those the
    ratio scales like 1/k_j and no fixed beta can hold as k -> 0.
    """
    if len(samples) < 2:
        raise ValueError("need at least two (k, eps) samples")
    if not (beta > 0.0 and math.isfinite(beta)):
        raise ValueError("beta must be finite and positive")
    max_ratio = 0.0
    worst = 0
    jumps = []
    for j in range(len(samples) - 1):
        k_j, eps_j = samples[j]
        eps_next = samples[j + 1][1]
        if not (k_j > 0.0 and eps_j > 0.0):
            raise ValueError("step sizes and eps samples must be positive")
        ratio = abs(eps_next - eps_j) / (k_j * eps_j)
        if ratio > max_ratio:
            max_ratio = ratio
            worst = j
        if abs(eps_next - eps_j) >= 0.5 * eps_j:
            jumps.append(j)
    return SlowVariationReport(beta=beta, max_ratio=max_ratio,
                               worst_index=worst,
                               satisfied=max_ratio <= beta,
                               jump_indices=tuple(jumps))


@dataclass(frozen=True)
class ContinuumConditionReport:
    sup_eps: float
    sup_rate: float
    sup_curvature: float


def continuum_condition_check(eps_samples: Sequence[float],
                              dt: float) -> ContinuumConditionReport:
    """Suprema of eps, |eps_t|/eps and |eps_tt|/eps from uniform samples.

    Centered second-order differences on the interior points; the two
    endpoint samples contribute to sup eps only.
    """
    eps = np.asarray(eps_samples, dtype=float)
    if eps.ndim != 1 or eps.size < 5:
        raise ValueError("need at least five uniformly spaced eps samples")
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ValueError("dt must be finite and positive")
    if not np.all(np.isfinite(eps)) or not np.all(eps > 0.0):
        raise ValueError("eps samples must be finite and positive")
    d1 = (eps[2:] - eps[:-2]) / (2.0 * dt)
    d2 = (eps[2:] - 2.0 * eps[1:-1] + eps[:-2]) / (dt * dt)
    mid = eps[1:-1]
    return ContinuumConditionReport(
        sup_eps=float(np.max(eps)),
        sup_rate=float(np.max(np.abs(d1) / mid)),
        sup_curvature=float(np.max(np.abs(d2) / mid)))
