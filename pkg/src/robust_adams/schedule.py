"""Variance-preserving noise schedules and sampling time grids.

Two parameterizations of the signal-retention curve ``alpha_bar(t)``:

* ``discrete_linear_beta`` -- DDPM convention: per-step betas linearly
  spaced over ``num_train_steps`` steps, ``alpha_bar`` at integer steps is
  the cumulative product of ``(1 - beta_s)``, extended to real-valued t by
  linear interpolation of ``log alpha_bar`` (keeps monotonicity and
  positivity). Domain is ``[0, num_train_steps]``.
* ``continuous_vp`` -- continuous-time limit on ``[0, 1]`` with
  ``beta(t) = beta_start + t * (beta_end - beta_start)`` and
  ``alpha_bar(t) = exp(-(beta_start * t + (beta_end - beta_start) * t**2 / 2))``.

Sampling runs on a strictly decreasing time grid ``t_0 > t_1 > ... > t_N``
with ``t_N`` equal to a configured terminal time ``t_end > 0``.  (Idealized
treatments let the terminal time be exactly 0; in practice samplers stop at
a small positive time such as 1e-3 or 1e-4, which is what the grid honors.)
Grids are spaced uniformly in t or uniformly in logSNR, where
``log_snr(t) = 0.5 * log(alpha_bar / (1 - alpha_bar))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseSchedule",
    "TimeGrid",
    "log_snr_from_alpha_bar",
    "make_time_grid",
]

_BISECT_TOL = 1e-12  # absolute tolerance in t for logSNR grid inversion
_BISECT_MAX_ITER = 200


class NoiseSchedule:
    """The alpha_bar(t) curve; all solver coefficients are read from it.

    Use the classmethod constructors rather than ``__init__`` directly.
    """

    def __init__(self, kind, beta_start, beta_end, num_train_steps=None):
        if kind not in ("discrete_linear_beta", "continuous_vp"):
            raise ValueError(f"unknown schedule kind {kind!r}")
        if not 0.0 < beta_start < beta_end:
            raise ValueError(
                f"need 0 < beta_start < beta_end, got ({beta_start}, {beta_end})"
            )
        self.kind = kind
        self.beta_start = float(beta_start)
        self.beta_end = float(beta_end)
        self.num_train_steps = num_train_steps
        if kind == "discrete_linear_beta":
            if num_train_steps is None or num_train_steps < 1:
                raise ValueError("discrete schedule needs num_train_steps >= 1")
            if beta_end >= 1.0:
                raise ValueError("discrete betas must stay below 1")
            betas = np.linspace(beta_start, beta_end, num_train_steps)
            # log alpha_bar at integer steps 0..T; step 0 carries no noise
            self._log_ab_table = np.concatenate(
                [[0.0], np.cumsum(np.log1p(-betas))]
            )
            self._steps = np.arange(num_train_steps + 1, dtype=np.float64)

    @classmethod
    def discrete_linear_beta(cls, beta_start=1e-4, beta_end=0.02, num_train_steps=1000):
        """DDPM-style discrete schedule (defaults match the common pretrained setup)."""
        return cls("discrete_linear_beta", beta_start, beta_end, num_train_steps)

    @classmethod
    def continuous_vp(cls, beta_start=0.1, beta_end=20.0):
        """Continuous VP schedule on t in [0, 1] with a linear beta rate."""
        return cls("continuous_vp", beta_start, beta_end)

    @property
    def t_max(self) -> float:
        """Upper end of the schedule's time domain (lower end is 0)."""
        if self.kind == "discrete_linear_beta":
            return float(self.num_train_steps)
        return 1.0

    def _check_domain(self, t):
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0.0) or np.any(t > self.t_max):
            raise ValueError(
                f"time {t} outside schedule domain [0, {self.t_max}]"
            )
        return t

    def alpha_bar(self, t):
        """Signal-retention coefficient alpha_bar(t), strictly decreasing in t.

        Accepts a scalar or an array; returns a value in (0, 1] elementwise.
        """
        t = self._check_domain(t)
        if self.kind == "discrete_linear_beta":
            log_ab = np.interp(t, self._steps, self._log_ab_table)
        else:
            log_ab = -(self.beta_start * t
                       + 0.5 * (self.beta_end - self.beta_start) * t * t)
        out = np.exp(log_ab)
        return float(out) if out.ndim == 0 else out

    def log_snr(self, t):
        """Half log signal-to-noise ratio, ``0.5 * log(ab / (1 - ab))``.

        Singular where alpha_bar(t) hits 0 or 1 (i.e. at t = 0).
        """
        ab = np.asarray(self.alpha_bar(t))
        if np.any(ab >= 1.0) or np.any(ab <= 0.0):
            raise ValueError(f"logSNR singular: alpha_bar(t={t}) = {ab}")
        out = log_snr_from_alpha_bar(ab)
        return float(out) if out.ndim == 0 else out


def log_snr_from_alpha_bar(alpha_bar):
    """``0.5 * log(alpha_bar / (1 - alpha_bar))``; antisymmetric about 1/2."""
    alpha_bar = np.asarray(alpha_bar, dtype=np.float64)
    return 0.5 * (np.log(alpha_bar) - np.log1p(-alpha_bar))


@dataclass(frozen=True)
class TimeGrid:
    """Strictly decreasing sampling times t_0..t_N (N+1 values for N steps)."""

    times: np.ndarray
    scheme: str = "uniform"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("grid needs at least two times")
        if not np.all(np.diff(times) < 0.0):
            raise ValueError("grid times must be strictly decreasing")

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    def __len__(self) -> int:
        return self.times.size


def make_time_grid(schedule, n_steps, scheme="uniform", t_start=None, t_end=1e-4):
    """Build an ``n_steps``-step grid from t_start down to t_end.

    ``uniform`` spaces times evenly in t; ``log_snr`` spaces them evenly in
    log_snr(t), recovering each interior time by bisection on the monotone
    alpha_bar curve. Both schemes hit t_start and t_end exactly.
    """
    if t_start is None:
        t_start = schedule.t_max
    if not (t_start > t_end > 0.0):
        raise ValueError(f"need t_start > t_end > 0, got ({t_start}, {t_end})")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    schedule._check_domain(t_start)

    if scheme == "uniform":
        times = np.linspace(t_start, t_end, n_steps + 1)
    elif scheme == "log_snr":
        lam_hi = schedule.log_snr(t_end)   # logSNR decreases in t
        lam_lo = schedule.log_snr(t_start)
        targets = np.linspace(lam_lo, lam_hi, n_steps + 1)
        times = np.empty(n_steps + 1)
        times[0], times[-1] = t_start, t_end
        for j in range(1, n_steps):
            times[j] = _invert_log_snr(schedule, targets[j], t_end, t_start)
    else:
        raise ValueError(f"unknown grid scheme {scheme!r}")
    return TimeGrid(times=times, scheme=scheme)


def _invert_log_snr(schedule, target, t_lo, t_hi):
    """Find t in [t_lo, t_hi] with log_snr(t) = target by bisection."""
    lo, hi = t_lo, t_hi  # log_snr(lo) > target > log_snr(hi)
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if schedule.log_snr(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < _BISECT_TOL:
            return 0.5 * (lo + hi)
    raise ArithmeticError(
        f"logSNR inversion did not converge for target {target!r}"
    )
