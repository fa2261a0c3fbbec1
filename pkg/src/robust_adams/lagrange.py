"""Noise-history buffer, Lagrange-interpolation predictor, and base selection.

During sampling every evaluated noise is appended to a buffer of
``(t_n, eps_n)`` pairs.  The predictor interpolates k of those pairs (the
"bases") with the classic Lagrange form and evaluates the interpolant at the
next sampling time.  Which k entries serve as bases is steered by the running
prediction error ``delta_eps``: indices start on a uniform grid over the
buffer,

    tau_hat_m = (i / k) * m,   m = 1..k,

and are then pushed through a power function,

    tau_m = floor((tau_hat_m / i) ** (delta_eps / scale) * i),

so a large measured error (exponent > 1) concentrates the bases on early
buffer entries, which were estimated when the injected error was still
small, while a small error leaves the selection near the most recent
entries.  The newest entry (index i) is always selected since
``(i / i) ** p = 1``.

The floor can produce colliding indices.  The resolution used here (one
consistent choice among several defensible ones): scan in increasing order
bumping each collided index up by one, then clamp the last index back to i
and push earlier indices down where needed, preserving k distinct indices
and the newest-entry guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LagrangeBuffer",
    "SelectionParams",
    "SelectedBases",
    "error_measure",
    "init_indices",
    "translate_indices",
    "select_bases",
    "select_last",
    "interpolate",
]

# Guards against 3/9 * 9 = 2.999... style float drop-outs before the floor;
# far below the 1-unit index resolution, far above accumulated rounding.
_FLOOR_NUDGE = 1e-9


class LagrangeBuffer:
    """Append-only history of (time, estimated noise) pairs, newest last.

    Times must strictly decrease in append order (the sampling direction).
    """

    def __init__(self):
        self.times: list[float] = []
        self.values: list[np.ndarray] = []

    def append(self, t, eps):
        t = float(t)
        if self.times and t >= self.times[-1]:
            raise ValueError(
                f"buffer times must strictly decrease: {t} after {self.times[-1]}"
            )
        self.times.append(t)
        self.values.append(np.asarray(eps, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.times)


@dataclass
class SelectionParams:
    """Selection knobs: interpolation order k, scale, and the running error."""

    k: int
    scale: float
    delta_eps: float

    def __post_init__(self):
        if self.k < 3:
            raise ValueError("interpolation order k must be >= 3")
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")
        if self.delta_eps < 0.0:
            raise ValueError("delta_eps must be non-negative")

    @classmethod
    def initial(cls, k, scale):
        """Start-of-run params: delta_eps = scale, so the first exponent is 1."""
        return cls(k=k, scale=scale, delta_eps=scale)


@dataclass(frozen=True)
class SelectedBases:
    """The k buffer entries chosen as interpolation nodes."""

    indices: tuple
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValueError(f"selected indices must be distinct: {self.indices}")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError(f"selected indices must increase: {self.indices}")


def error_measure(observed, predicted) -> float:
    """L2 norm of (observed - predicted) over all entries."""
    observed = np.asarray(observed, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if observed.shape != predicted.shape:
        raise ValueError(
            f"shape mismatch: {observed.shape} vs {predicted.shape}"
        )
    return float(np.linalg.norm(observed - predicted))

def init_indices(i, k):
    """Uniform index initialization over a buffer of length i+1.

    Returns the k reals (i / k) * m, m = 1..k; the last equals i exactly.
    """
    if k < 3:
        raise ValueError("k must be >= 3")
    if i < k - 1:
        raise ValueError(f"buffer too short: step index {i} < k - 1 = {k - 1}")
    return [(i / k) * m for m in range(1, k + 1)]


def translate_indices(tau_hat, i, delta_eps, scale):
    """Power-function index translation, floored to integers.

    tau_m = floor((tau_hat_m / i) ** (delta_eps / scale) * i).  The last
    element always maps back to i.  Exponents above 1 pull indices toward 0.
    A 1e-9 nudge before the floor keeps exact integer ratios (e.g. 3/9 * 9)
    from dropping an index to the float just below.
    """
    if i <= 0:
        raise ValueError("need a non-trivial buffer (i > 0)")
    if scale <= 0.0:
        raise ValueError("scale must be positive")
    p = delta_eps / scale
    out = []
    for th in tau_hat:
        if not 0.0 < th <= i:
            raise ValueError(f"initial index {th} outside (0, {i}]")
        out.append(int(np.floor((th / i) ** p * i + _FLOOR_NUDGE)))
    return out


def _dedup_increasing(indices, i):
    """Make indices strictly increasing with the last pinned to i."""
    out = list(indices)
    k = len(out)
    for m in range(1, k):
        if out[m] <= out[m - 1]:
            out[m] = out[m - 1] + 1
    out[-1] = i
    for m in range(k - 2, -1, -1):
        if out[m] >= out[m + 1]:
            out[m] = out[m + 1] - 1
    return out


def select_bases(buffer, params) -> SelectedBases:
    """Error-robust selection: uniform init, power translation, de-dup."""
    i = len(buffer) - 1
    if len(buffer) < params.k:
        raise ValueError(
            f"buffer holds {len(buffer)} entries, selection needs {params.k}"
        )
    raw = translate_indices(
        init_indices(i, params.k), i, params.delta_eps, params.scale
    )
    idx = _dedup_increasing(raw, i)
    return _gather(buffer, idx)


def select_last(buffer, k) -> SelectedBases:
    """Fixed selection: the newest k entries (tau_m = i - m, relabeled)."""
    if len(buffer) < k:
        raise ValueError(f"buffer holds {len(buffer)} entries, selection needs {k}")
    i = len(buffer) - 1
    return _gather(buffer, list(range(i - k + 1, i + 1)))


def _gather(buffer, indices):
    return SelectedBases(
        indices=tuple(indices),
        times=np.array([buffer.times[n] for n in indices]),
        values=np.stack([buffer.values[n] for n in indices]),
    )


def interpolate(bases, t_query):
    """Evaluate the Lagrange interpolant through the bases at t_query.

    L(t) = sum_m l_m(t) * eps_m with l_m(t) = prod_{l != m} (t - t_l) / (t_m - t_l).
    Reproduces the stored value exactly when t_query hits a node.
    """
    ts = bases.times
    k = ts.size
    t_query = float(t_query)
    weights = np.empty(k)
    for m in range(k):
        num = 1.0
        den = 1.0
        for l in range(k):
            if l == m:
                continue
            num *= t_query - ts[l]
            den *= ts[m] - ts[l]
        if den == 0.0:
            raise ValueError(f"degenerate interpolation: duplicate node times {ts}")
        weights[m] = num / den
    return weights @ bases.values
