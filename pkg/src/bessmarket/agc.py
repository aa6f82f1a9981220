"""AGC trace preparation, mileage, multiplier scaling and unit dispatch.

Traces are ``(T, Z)`` arrays of system setpoints in MW. The setpoint
before the first sub-interval of interval ``t`` is the last setpoint of
interval ``t - 1`` (zero before the horizon), so mileage is continuous
across interval boundaries.
"""

from __future__ import annotations

import numpy as np

EPSILON = 1e-3


class AgcError(ValueError):
    pass


def _previous_endpoints(trace: np.ndarray) -> np.ndarray:
    prev = np.zeros(trace.shape[0])
    prev[1:] = trace[:-1, -1]
    return prev


def step_sizes(trace) -> np.ndarray:
    """``|AGC[t, z] - AGC[t, z-1]|`` with the carried-over boundary, shape (T, Z)."""
    tr = np.asarray(trace, dtype=float)
    full = np.concatenate([_previous_endpoints(tr)[:, None], tr], axis=1)
    return np.abs(np.diff(full, axis=1))


def mileage_series(trace) -> np.ndarray:
    return step_sizes(trace).sum(axis=1)


def mileage_requirement(trace, t: int) -> float:
    """Total absolute setpoint movement inside interval ``t`` (0-based)."""
    return float(mileage_series(trace)[t])


def _scale_for_mileage(x: np.ndarray, prev: float, target: float) -> float:
    """Smallest s >= 0 with |s*x[0] - prev| + s*sum|diff(x)| == target."""
    inner = float(np.abs(np.diff(x)).sum())
    first = float(x[0])
    best = None
    for sign in (1.0, -1.0):
        denom = sign * first + inner
        if denom <= 0:
            continue
        s = (target + sign * prev) / denom
        if s < 0:
            continue
        if sign * (s * first - prev) >= -1e-12 * max(1.0, abs(prev), abs(target)):
            best = s if best is None else min(best, s)
    if best is None:
        raise AgcError(f"mileage {target} unreachable from boundary setpoint {prev}")
    return best


def prepare_trace(raw, rgm) -> np.ndarray:
    """Zero-mean each interval, then scale it so its mileage equals ``rgm[t]``.

    Scaling keeps the zero mean. Because the boundary setpoint comes from
    the already prepared previous interval, the scale factor solves a
    one-dimensional piecewise-linear equation rather than a plain ratio.
    """
    raw = np.asarray(raw, dtype=float)
    rgm = np.asarray(rgm, dtype=float)
    if raw.ndim != 2 or rgm.shape != (raw.shape[0],):
        raise AgcError("trace must be (T, Z) with one mileage target per interval")
    out = np.zeros_like(raw)
    prev = 0.0
    for t in range(raw.shape[0]):
        x = raw[t] - raw[t].mean()
        if rgm[t] < 0:
            raise AgcError(f"interval {t + 1}: negative mileage requirement")
        if rgm[t] == 0:
            if abs(prev) > 0:
                raise AgcError(f"interval {t + 1}: zero mileage impossible after a nonzero setpoint")
            out[t] = 0.0
            continue
        if np.ptp(x) == 0.0 and prev == 0.0:
            raise AgcError(f"interval {t + 1}: zero mileage, trace cannot be scaled")
        s = _scale_for_mileage(x, prev, float(rgm[t]))
        out[t] = s * x
        prev = out[t, -1]
    return out


def multiplier_bound(trace, t: int, rgm_t: float, epsilon: float = EPSILON) -> float:
    """Mileage multiplier kept strictly below requirement / largest step."""
    steps = step_sizes(trace)[t]
    biggest = float(steps.max())
    if biggest <= 0:
        raise AgcError(f"interval {t + 1}: zero maximum AGC step")
    return (1.0 - epsilon) * rgm_t / biggest


def multipliers(trace, rgm, epsilon: float = EPSILON, default: float = 1.0) -> np.ndarray:
    """``multiplier_bound`` for every interval; intervals without mileage
    requirement get ``default``."""
    rgm = np.asarray(rgm, dtype=float)
    steps = step_sizes(trace).max(axis=1)
    out = np.full(rgm.shape, float(default))
    ok = (steps > 0) & (rgm > 0)
    out[ok] = (1.0 - epsilon) * rgm[ok] / steps[ok]
    return out


def dispatch_unit_signal(pf, trace) -> np.ndarray:
    """Unit-level setpoints ``PF[.., t] * AGC[t, z]``.

    ``pf`` of shape (T,) gives (T, Z); shape (B, T) gives (B, T, Z).
    """
    pf = np.asarray(pf, dtype=float)
    tr = np.asarray(trace, dtype=float)
    if pf.ndim == 1:
        return pf[:, None] * tr
    if np.any(pf.sum(axis=0) > 1 + 1e-9):
        raise AgcError("participation factors sum above 1")
    return pf[:, :, None] * tr[None, :, :]
