"""Noise estimators: analytic oracles and a deterministic error-injection wrapper.

An estimator is a callable ``e(x, t) -> eps`` with a ``dim`` attribute, where
``x`` is one state of shape ``(d,)`` or a batch of shape ``(..., d)`` and the
return matches ``x``'s shape.  The oracles return the exact conditional
expectation ``E[eps | x_t]`` for their data law under the forward marginal
``x_t = sqrt(ab) * x0 + sqrt(1 - ab) * eps``, which is what a perfectly
trained noise-prediction network converges to.

``PerturbedEstimator`` adds a deterministic error field on top of an inner
estimator: amplitude ``c * ((t_start - t) / t_start) ** p`` (growing as t
falls toward the terminal time) along a unit direction derived only from
``(seed, t)``.  Because the field does not depend on x, different samplers
run against the same seed see the identical error field, so comparisons
between them are paired.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GaussianOracle",
    "MixtureOracle",
    "PerturbationProfile",
    "PerturbedEstimator",
    "CallCounter",
    "forward_diffuse",
]

_WEIGHT_TOL = 1e-12


def _check_dim(x, dim):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != dim:
        raise ValueError(f"state has dimension {x.shape[-1]}, estimator expects {dim}")
    return x


def forward_diffuse(schedule, x0, t, noise):
    """Forward marginal draw: ``sqrt(ab(t)) * x0 + sqrt(1 - ab(t)) * noise``."""
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if x0.shape != noise.shape:
        raise ValueError(f"shape mismatch: x0 {x0.shape} vs noise {noise.shape}")
    ab = schedule.alpha_bar(t)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise


class GaussianOracle:
    """Exact posterior-mean noise estimator for x0 ~ N(mean, std**2 I).

    E[eps | x_t] = sqrt(1 - ab) * (x_t - sqrt(ab) * mean) / (ab * std**2 + 1 - ab),
    an affine function of x_t.
    """

    def __init__(self, schedule, mean, std=1.0):
        self.schedule = schedule
        self.mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        if self.mean.ndim != 1:
            raise ValueError("mean must be a vector")
        std = float(std)
        if std <= 0.0:
            raise ValueError("std must be positive")
        self.std = std

    @property
    def dim(self) -> int:
        return self.mean.size

    def __call__(self, x, t):
        x = _check_dim(x, self.dim)
        ab = self.schedule.alpha_bar(t)
        denom = ab * self.std**2 + (1.0 - ab)
        return np.sqrt(1.0 - ab) * (x - np.sqrt(ab) * self.mean) / denom

    def sample_data(self, rng, n):
        """Draw n points from the oracle's own data law."""
        return self.mean + self.std * rng.standard_normal((n, self.dim))


class MixtureOracle:
    """Exact noise estimator for an isotropic Gaussian-mixture data law.

    The estimate is the responsibility-weighted combination of per-component
    Gaussian-oracle outputs; responsibilities come from the components'
    marginal densities of x at time t, computed in log space with the
    max-shift trick so extreme times do not underflow.
    """

    def __init__(self, schedule, weights, means, stds):
        self.schedule = schedule
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        self.stds = np.asarray(stds, dtype=np.float64)
        m = self.weights.size
        if self.means.shape[0] != m or self.stds.size != m:
            raise ValueError("weights, means, stds must agree on component count")
        if np.any(self.weights < 0.0) or abs(self.weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        if np.any(self.stds <= 0.0):
            raise ValueError("component stds must be positive")

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def responsibilities(self, x, t):
        """Posterior component probabilities of x under the time-t marginal."""
        x = _check_dim(x, self.dim)
        ab = self.schedule.alpha_bar(t)
        var = ab * self.stds**2 + (1.0 - ab)                    # (m,)
        diff = x[..., None, :] - np.sqrt(ab) * self.means       # (..., m, d)
        sq = np.sum(diff * diff, axis=-1)                       # (..., m)
        log_p = (np.log(self.weights)
                 - 0.5 * self.dim * np.log(2.0 * np.pi * var)
                 - 0.5 * sq / var)
        log_p -= log_p.max(axis=-1, keepdims=True)
        p = np.exp(log_p)
        return p / p.sum(axis=-1, keepdims=True)

    def __call__(self, x, t):
        x = _check_dim(x, self.dim)
        ab = self.schedule.alpha_bar(t)
        var = ab * self.stds**2 + (1.0 - ab)
        diff = x[..., None, :] - np.sqrt(ab) * self.means       # (..., m, d)
        sq = np.sum(diff * diff, axis=-1)
        log_p = (np.log(self.weights)
                 - 0.5 * self.dim * np.log(2.0 * np.pi * var)
                 - 0.5 * sq / var)
        log_p -= log_p.max(axis=-1, keepdims=True)
        p = np.exp(log_p)
        resp = p / p.sum(axis=-1, keepdims=True)
        per_component = np.sqrt(1.0 - ab) * diff / var[:, None]
        return np.sum(resp[..., None] * per_component, axis=-2)

    def sample_data(self, rng, n):
        comp = rng.choice(self.weights.size, size=n, p=self.weights)
        eps = rng.standard_normal((n, self.dim))
        return self.means[comp] + self.stds[comp, None] * eps


@dataclass(frozen=True)
class PerturbationProfile:
    """Deterministic injected-error profile.

    ``amplitude * ((t_start - t) / t_start) ** exponent`` is the error norm
    at time t: zero at t_start and growing toward the terminal time.  The
    direction is a pseudo-random unit vector keyed by (seed, t) only.
    """

    amplitude: float = 0.0
    exponent: float = 2.0
    seed: int = 0
    t_start: float = 1.0

    def __post_init__(self):
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be non-negative")
        if self.exponent <= 0.0:
            raise ValueError("exponent must be positive")

    def magnitude(self, t) -> float:
        base = max((self.t_start - float(t)) / self.t_start, 0.0)
        return self.amplitude * base**self.exponent


class PerturbedEstimator:
    """Wraps an inner estimator with the additive error field of a profile.

    With amplitude 0 the wrapper is exactly the identity.  Evaluations are
    bit-deterministic: the direction depends on (seed, t) through a hashed
    counter-based generator, with t quantized at 1e-9 resolution.
    """

    def __init__(self, inner, profile: PerturbationProfile):
        self.inner = inner
        self.profile = profile
        self._directions = {}

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def schedule(self):
        return self.inner.schedule

    def direction(self, t):
        key = int(round(float(t) * 1e9))
        u = self._directions.get(key)
        if u is None:
            ss = np.random.SeedSequence(
                [self.profile.seed & 0xFFFFFFFFFFFFFFFF, key]
            )
            v = np.random.Generator(np.random.PCG64(ss)).standard_normal(self.dim)
            norm = np.linalg.norm(v)
            if norm == 0.0:  # essentially impossible, but keep unit norm total
                v[0] = 1.0
                norm = 1.0
            u = v / norm
            self._directions[key] = u
        return u

    def __call__(self, x, t):
        out = self.inner(x, t)
        if self.profile.amplitude == 0.0:
            return out
        return out + self.profile.magnitude(t) * self.direction(t)

    def sample_data(self, rng, n):
        return self.inner.sample_data(rng, n)


class CallCounter:
    """Counts evaluations of a wrapped estimator (one count per call)."""

    def __init__(self, inner):
        self.inner = inner
        self.count = 0

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def schedule(self):
        return self.inner.schedule

    def __call__(self, x, t):
        self.count += 1
        return self.inner(x, t)

    def sample_data(self, rng, n):
        return self.inner.sample_data(rng, n)
