"""Trial engine: honest streams, attacks, detectors and fusion for one trial.

A trial draws standard normals row by row (one row per time step, one column
per sensor) from its keyed signal stream, so every reported value is a pure
function of ``(seed, trial, sensor, step)``. Continuous runs additionally draw
two uniforms per detector per step from the bridge stream: one for the
bridge minimum of ``u`` over the step, one for the between-grid crossing
test.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _rng
from .adversary import AttackerSpec, Honest, LinearDrift, WorstCase
from .cusum import ConfigurationError, CusumState, advance, bridge_minimum
from .fusion import FusionRule
from .signal_models import ContinuousModel, DiscreteModel, gaussian_llr_coefficients

MAX_CHUNK = 16384
MIN_CHUNK = 64
GROW_AFTER = 8  # chunks at the hinted size before doubling starts


@dataclass(frozen=True)
class Scenario:
    """Everything one trial needs.

    ``bridge`` switches on the continuous-time corrections (exact bridge
    minimum and between-grid crossing); with it off the CUSUM is monitored on
    the Euler grid only. ``paper_min`` excludes ``u_0`` from the discrete
    running minimum.
    """

    model: ContinuousModel | DiscreteModel
    n_sensors: int
    rule: FusionRule
    attacker: AttackerSpec = AttackerSpec()
    max_steps: int = 10 ** 6
    bridge: bool = True
    paper_min: bool = False
    chunk_hint: int = 1024

    def __post_init__(self):
        if isinstance(self.attacker.strategy, WorstCase):
            raise ConfigurationError("resolve WorstCase before simulating")
        if self.n_sensors < 1:
            raise ConfigurationError("need at least one sensor")
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be >= 1")
        self.rule.validate_for(self.n_sensors)

    @property
    def continuous(self):
        return isinstance(self.model, ContinuousModel)

    @property
    def time_step(self):
        return self.model.dt if self.continuous else 1


@dataclass
class TrialOutcome:
    stop_time: float            # fused alarm time; inf when censored
    censored: bool
    detector_times: np.ndarray  # local alarms up to the fused one; inf otherwise
    overshoot: float


def _membership(groups, n_sensors):
    w = np.zeros((n_sensors, len(groups)))
    for d, g in enumerate(groups):
        w[g, d] = 1.0
    return w


def simulate_trial(sc: Scenario, seed, trial) -> TrialOutcome:
    """Run one trial until the fused alarm or ``max_steps``."""
    n = sc.n_sensors
    groups = sc.rule.detectors(n)
    n_det = len(groups)
    sizes = np.array([len(g) for g in groups], dtype=float)
    identity = all(len(g) == 1 and g[0] == d for d, g in enumerate(groups))
    member = _membership(groups, n)
    w = None if identity else member
    rank = sc.rule.rank
    threshold = sc.rule.threshold
    dt = sc.time_step

    attacked = () if isinstance(sc.attacker.strategy, Honest) else sc.attacker.sensors(n)
    forced = sc.attacker.forced_alarm_time()
    strategy = sc.attacker.effective_strategy()
    drift_cols = list(attacked) if isinstance(strategy, LinearDrift) else []

    times = np.full(n_det, math.inf)
    done = np.zeros(n_det, dtype=bool)
    over = np.zeros(n_det)
    if forced is not None:
        for d, g in enumerate(groups):
            if any(c in g for c in attacked):
                times[d] = forced
                done[d] = True
    if threshold <= 0:
        times[~done] = 0.0
        done[:] = True

    def decided():
        finite = np.isfinite(times)
        if finite.sum() >= rank:
            return True
        # remaining detectors cannot supply enough alarms
        return finite.sum() + (~done).sum() < rank

    sig = _rng.stream(seed, trial, _rng.SIGNAL)
    br = _rng.stream(seed, trial, _rng.BRIDGE) if sc.continuous and sc.bridge else None
    state = CusumState.initial(n_det, sc.paper_min)
    steps = n_chunks = 0
    chunk = int(min(max(sc.chunk_hint, MIN_CHUNK), MAX_CHUNK))

    if sc.continuous:
        mu = sc.model.mu
        sq = math.sqrt(dt)
        var = sizes * mu * mu * dt
    else:
        mu = None
        linear = gaussian_llr_coefficients(sc.model)

    while not decided() and steps < sc.max_steps:
        rows = min(chunk, sc.max_steps - steps)
        g = sig.standard_normal((rows, n))
        gs = g if identity else g @ w
        if sc.continuous:
            drift = sc.model.drift_at((steps + np.arange(rows)) * dt)[:, None]
            du = mu * (sq * gs + (drift * dt - 0.5 * mu * dt) * sizes)
            for c in drift_cols:
                du += mu * (strategy.slope - drift) * dt * member[c]
        else:
            k = steps + 1 + np.arange(rows)
            pre = (k <= sc.model.change_time)[:, None]
            if linear is not None:
                a, b = linear
                mean = np.where(pre, sc.model.f0.mean, sc.model.f1.mean)
                du = a * (sc.model.f0.sd * gs + mean * sizes) + b * sizes
                for c in drift_cols:
                    du += a * (strategy.slope - mean) * member[c]
            else:
                obs = np.where(pre, sc.model.f0.from_standard(g), sc.model.f1.from_standard(g))
                for c in drift_cols:
                    obs[:, c] = strategy.slope + sc.model.f0.sd * g[:, c]
                z = sc.model.llr(obs)
                du = z if identity else z @ w
        if br is not None:
            uni = br.random((rows, n_det, 2))
            bmin = bridge_minimum(du, var, 1.0 - uni[..., 0])
            res = advance(state, du, threshold, bmin, uni[..., 1], var)
        else:
            res = advance(state, du, threshold)
        new = res.hit & ~done
        if new.any():
            times[new] = (steps + res.hit_row[new] + 1) * dt
            over[new] = res.overshoot[new]
            done |= new
        state = res.state
        steps += rows
        n_chunks += 1
        if n_chunks >= GROW_AFTER:
            chunk = min(chunk * 2, MAX_CHUNK)

    finite = np.isfinite(times)
    if finite.sum() >= rank:
        order = np.argsort(times, kind="stable")
        d = order[rank - 1]
        # alarms after the fused one depend on chunk boundaries; drop them
        times[times > times[d]] = math.inf
        return TrialOutcome(float(times[d]), False, times, float(over[d]))
    return TrialOutcome(math.inf, True, times, 0.0)


@dataclass
class Batch:
    """Outcomes of trials ``start .. start + len - 1``, in trial order."""

    stop_times: np.ndarray
    censored: np.ndarray
    detector_times: np.ndarray
    overshoots: np.ndarray


def _run_block(args):
    sc, seed, lo, hi = args
    outs = [simulate_trial(sc, seed, i) for i in range(lo, hi)]
    return (np.array([o.stop_time for o in outs]),
            np.array([o.censored for o in outs], dtype=bool),
            np.array([o.detector_times for o in outs]).reshape(len(outs), -1),
            np.array([o.overshoot for o in outs]))


def simulate(sc: Scenario, seed, trials, start=0, workers=1, block=256) -> Batch:
    """Run ``trials`` independent trials; output order never depends on ``workers``."""
    bounds = [(sc, seed, lo, min(lo + block, start + trials))
              for lo in range(start, start + trials, block)]
    if workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_block, bounds))
    else:
        parts = [_run_block(b) for b in bounds]
    if not parts:
        n_det = len(sc.rule.detectors(sc.n_sensors))
        return Batch(np.empty(0), np.empty(0, dtype=bool), np.empty((0, n_det)), np.empty(0))
    return Batch(*(np.concatenate(p) for p in zip(*parts)))
