"""CUSUM statistic maintenance and first-passage stopping.

The same machinery serves every scope: a detector fed by all sensors is the
centralized CUSUM, one fed by a single sensor is a local CUSUM, and one fed by
a group is a group CUSUM. Only the per-step statistic increments differ.

States hold floats or numpy arrays; arrays let one call advance several
detectors side by side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class ConfigurationError(ValueError):
    """Inconsistent detector, attacker or fusion configuration."""


@dataclass(frozen=True)
class CusumState:
    """Running CUSUM statistic.

    ``u`` is the cumulative log-likelihood ratio, ``m`` its running minimum and
    ``y = u - m`` the reflected statistic. ``steps`` counts elapsed time steps.
    """

    u: float | np.ndarray = 0.0
    m: float | np.ndarray = 0.0
    y: float | np.ndarray = 0.0
    steps: int = 0

    @classmethod
    def initial(cls, n_detectors=None, paper_min=False):
        """Fresh state with ``u = 0``.

        ``paper_min=True`` keeps ``u_0`` out of the running minimum, i.e.
        ``m_k = min_{1<=j<=k} u_j``, which forces ``y_1 = 0``. The default
        includes it and gives Page's recursion ``y_k = max(0, y_{k-1} + Z_k)``.
        """
        m0 = math.inf if paper_min else 0.0
        if n_detectors is None:
            return cls(0.0, m0, 0.0, 0)
        return cls(np.zeros(n_detectors), np.full(n_detectors, m0), np.zeros(n_detectors), 0)


@dataclass(frozen=True)
class StoppingRecord:
    stopped: bool
    stop_time: float
    overshoot: float = 0.0
    censored: bool = False


def _update(state, du, bridge_min=None):
    u = state.u + du
    cand = u if bridge_min is None else np.minimum(u, state.u + bridge_min)
    m = np.minimum(state.m, cand)
    return CusumState(u, m, u - m, state.steps + 1)


def continuous_cusum_step(state, increments, mu, scope_size, dt, bridge_min=None):
    """One Euler step of ``u = sum mu*xi - scope*mu^2*t/2``.

    ``increments`` are the reported ``xi`` increments of the sensors in scope.
    ``bridge_min``, when given, is the minimum of the statistic's Brownian
    bridge over the step relative to its start (see :func:`bridge_minimum`);
    it lets ``m`` see dips between grid points.
    """
    increments = np.asarray(increments, dtype=float)
    if increments.shape[-1] != scope_size:
        raise ConfigurationError(
            f"expected {scope_size} increments, got {increments.shape[-1]}")
    du = mu * increments.sum(axis=-1) - 0.5 * scope_size * mu * mu * dt
    return _update(state, du, bridge_min)


def discrete_cusum_step(state, observations, model):
    """Add ``sum_n log f1(x_n)/f0(x_n)`` and reflect."""
    z = np.sum(model.llr(observations), axis=-1)
    return _update(state, z)


def check_stop(state, threshold, dt=None):
    """Stopping record for ``y >= threshold`` at the state's current step."""
    if not threshold >= 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    stopped = bool(state.y >= threshold)
    t = state.steps * dt if dt is not None else state.steps
    if not stopped:
        return StoppingRecord(False, math.inf)
    return StoppingRecord(True, t, float(state.y - threshold))


def bridge_minimum(x, var, uniform):
    """Sample the minimum of a Brownian bridge from 0 to ``x`` with variance ``var``.

    Inverse-CDF of ``P(min <= b) = exp(-2 b (b - x) / var)``, ``b <= min(0, x)``.
    """
    x = np.asarray(x, dtype=float)
    return 0.5 * (x - np.sqrt(x * x - 2.0 * var * np.log(uniform)))


def bridge_crossing_probability(y0, y1, threshold, var):
    """Chance a bridge from ``y0`` to ``y1`` touches ``threshold`` in between.

    Exact for an unreflected bridge; near the threshold the reflection at
    zero is irrelevant, which is the only regime where this is not ~0.
    """
    a = np.maximum(threshold - y0, 0.0)
    b = np.maximum(threshold - y1, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = 2.0 * a * b / var
    expo = np.broadcast_to(expo, np.broadcast(a, b, var).shape)
    out = np.zeros(expo.shape)
    # exp underflows to 0 beyond ~745, so skipping those entries is exact
    near = expo < 746.0
    out[near] = np.exp(-expo[near])
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ChunkResult:
    state: CusumState
    hit: np.ndarray        # bool per detector
    hit_row: np.ndarray    # row index of the first hit, -1 if none
    overshoot: np.ndarray  # y - threshold at the hit, clipped at 0


def advance(state, du, threshold, bridge_min=None, cross_uniform=None, bridge_var=None):
    """Advance detectors through a chunk of statistic increments.

    Parameters
    ----------
    state : CusumState
        Array state, one entry per detector.
    du : ndarray, shape (steps, detectors)
        Per-step increments of ``u``.
    threshold : float
    bridge_min, cross_uniform : ndarray, optional
        Bridge minima and uniforms for the between-grid crossing test; pass
        both (and ``bridge_var``, the per-step variance of ``u``) to enable
        the continuous-time correction.

    Returns
    -------
    ChunkResult
        The state after the last row, and the first hit of each detector.
    """
    # summing from u_0 row by row keeps results independent of chunk boundaries
    path = np.cumsum(np.concatenate([np.atleast_1d(state.u)[None], du]), axis=0)
    u, u_prev = path[1:], path[:-1]
    cand = u if bridge_min is None else np.minimum(u, u_prev + bridge_min)
    m = np.minimum.accumulate(
        np.concatenate([np.atleast_1d(state.m)[None], cand]), axis=0)[1:]
    y = u - m
    hit = y >= threshold
    if cross_uniform is not None:
        y_prev = np.concatenate([np.atleast_1d(state.y)[None], y[:-1]])
        hit |= cross_uniform < bridge_crossing_probability(y_prev, y, threshold, bridge_var)
    any_hit = hit.any(axis=0)
    row = np.where(any_hit, hit.argmax(axis=0), -1)
    cols = np.arange(du.shape[1])
    over = np.where(any_hit, np.maximum(y[np.maximum(row, 0), cols] - threshold, 0.0), 0.0)
    new = CusumState(u[-1], m[-1], y[-1], state.steps + du.shape[0])
    return ChunkResult(new, any_hit, row, over)


def run_to_stop(source: Iterable, threshold, max_steps, dt=1.0, paper_min=False,
                bridge_var=None):
    """Drive a single detector until ``y >= threshold`` or ``max_steps``.

    ``source`` yields chunks of ``u`` increments (1-D arrays), or tuples
    ``(du, bridge_min, cross_uniform)`` when ``bridge_var`` is set. Returns a
    censored record, never a silent truncation, when the cap is reached.
    """
    state = CusumState.initial(1, paper_min)
    if threshold <= 0:
        return StoppingRecord(True, 0.0, float(-threshold))
    for chunk in source:
        if bridge_var is None:
            du, bmin, cu = chunk, None, None
        else:
            du, bmin, cu = chunk
            bmin = np.asarray(bmin, dtype=float).reshape(-1, 1)
            cu = np.asarray(cu, dtype=float).reshape(-1, 1)
        du = np.asarray(du, dtype=float).reshape(-1, 1)
        room = max_steps - state.steps
        if du.shape[0] > room:
            du = du[:room]
            bmin = None if bmin is None else bmin[:room]
            cu = None if cu is None else cu[:room]
        start = state.steps
        res = advance(state, du, threshold, bmin, cu, bridge_var)
        if res.hit[0]:
            return StoppingRecord(True, (start + res.hit_row[0] + 1) * dt, float(res.overshoot[0]))
        state = res.state
        if state.steps >= max_steps:
            break
    return StoppingRecord(False, math.inf, censored=True)
