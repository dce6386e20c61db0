"""Seeded Monte Carlo experiments: ARL/delay points, threshold sweeps, ratio reports.

Every point follows the worst-case protocol when the attacker is
``worst_case``: false-alarm runs use an attacker whose sensor alarms at once,
delay runs one whose sensor never alarms, and delay is measured from a change
at time 0 with every statistic at zero.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import os
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import analytics
from .adversary import (AttackerSpec, Honest, ImmediateAlarm, LinearDrift, Silent,
                        WorstCase)
from .cusum import ConfigurationError
from .fusion import Centralized, FusionRule, GroupWise, KthAlarm
from .signal_models import NEVER, ContinuousModel, DiscreteModel, GaussianDensity, kl_divergence
from .simulate import Scenario, simulate

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CSV_HEADER = ("scheme,model,N,threshold,arl_mean,arl_se,delay_mean,delay_se,"
              "bound_delay,censored_arl,censored_delay,trials,seed")
CENSOR_LIMIT = 0.01

_STRATEGIES = {
    "honest": lambda slope: Honest(),
    "worst_case": lambda slope: WorstCase(),
    "immediate_alarm": lambda slope: ImmediateAlarm(),
    "silent": lambda slope: Silent(),
    "linear_drift": lambda slope: LinearDrift(slope),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment settings; see ``configs/*.toml`` for annotated examples.

    Sensor indices in ``compromised`` are 0-based. ``max_steps = 0`` picks
    50 times the analytic single-detector ARL.
    """

    model: str = "continuous"
    N: int = 9
    scheme: str = "kth"
    k: int = 0
    num_groups: int = 3
    quorum: int = 2
    attacker: str = "worst_case"
    attack_slope: float = 0.0
    compromised: tuple[int, ...] = ()
    n_max: int = 1
    signal_level: bool = False
    thresholds: tuple[float, ...] = (3.0, 4.0, 5.0, 6.0)
    trials: int = 10000
    seed: int = 0
    mu: float = 1.0
    dt: float = 0.01
    bridge: bool = True
    f0_mean: float = 0.0
    f0_sd: float = 1.0
    f1_mean: float = 1.0
    f1_sd: float = 1.0
    paper_min: bool = False
    delay_change_time: float = 0.0
    max_steps: int = 0
    workers: int = 1
    renewal_trials: int = 100000
    output: str = "out"

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "thresholds", tuple(float(t) for t in self.thresholds))
        set_(self, "compromised", tuple(int(i) for i in self.compromised))
        if self.model not in ("continuous", "discrete"):
            raise ConfigurationError(f"model must be 'continuous' or 'discrete', got {self.model!r}")
        if self.scheme not in ("centralized", "kth", "group"):
            raise ConfigurationError(f"scheme must be centralized, kth or group, got {self.scheme!r}")
        if self.attacker not in _STRATEGIES:
            raise ConfigurationError(f"unknown attacker {self.attacker!r}")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if not self.thresholds:
            raise ConfigurationError("thresholds must be nonempty")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ConfigurationError("thresholds must be strictly increasing")
        if self.attacker != "honest" and self.N < 3:
            raise ConfigurationError("attack experiments need N >= 3")
        if self.delay_change_time < 0:
            raise ConfigurationError("delay_change_time must be >= 0")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        # builds every derived object once so bad settings fail here
        self.attacker_spec().validate_for(self.N) if self.scheme == "kth" else None
        self.rule(self.thresholds[0]).validate_for(
            self.N, self.n_max if self.scheme == "kth" else None)
        self.signal_model(NEVER)

    # derived objects -----------------------------------------------------

    @property
    def rank(self):
        return self.k if self.k else self.n_max + 1

    @property
    def scheme_name(self):
        if self.scheme == "centralized":
            return "centralized"
        if self.scheme == "kth":
            return "second_alarm" if self.rank == 2 else f"kth_alarm_{self.rank}"
        if (self.num_groups, self.quorum) == (3, 2):
            return "group_wise"
        return f"group_wise_{self.quorum}of{self.num_groups}"

    def rule(self, threshold):
        if self.scheme == "centralized":
            kind = Centralized()
        elif self.scheme == "kth":
            kind = KthAlarm(self.rank)
        else:
            kind = GroupWise(self.num_groups, self.quorum)
        return FusionRule(kind, float(threshold))

    def attacker_spec(self):
        slope = self.attack_slope if self.attack_slope else float(self.N)
        return AttackerSpec(_STRATEGIES[self.attacker](slope),
                            self.compromised or None, self.n_max, self.signal_level)

    def signal_model(self, change_time):
        if self.model == "continuous":
            return ContinuousModel(self.mu, self.dt, change_time)
        return DiscreteModel(GaussianDensity(self.f0_mean, self.f0_sd),
                             GaussianDensity(self.f1_mean, self.f1_sd), change_time)

    def detector_scope(self):
        """Smallest number of sensors feeding one detector."""
        return min(len(g) for g in self.rule(1.0).detectors(self.N))

    def predicted_arl_steps(self, threshold):
        """Analytic false-alarm ARL of the smallest detector, in steps."""
        s = self.detector_scope()
        if self.model == "continuous":
            return analytics.arl_centralized_closed_form(threshold, s, self.mu) / self.dt
        D = kl_divergence(self.signal_model(NEVER))
        # r^2 >= 1/4 covers the Gaussian pairs this toolkit ships
        return 4.0 * math.exp(threshold) / (s * D)

    def predicted_delay_steps(self, threshold):
        s = self.detector_scope()
        if self.model == "continuous":
            return analytics.delay_centralized_closed_form(threshold, s, self.mu) / self.dt
        D = kl_divergence(self.signal_model(NEVER))
        return (threshold + 2.0) / (s * D)

    def scenario(self, metric, threshold):
        """Simulation scenario for ``metric`` ("arl" or "delay") at ``threshold``."""
        change = NEVER if metric == "arl" else self.delay_change_time
        if self.model == "discrete" and change != NEVER:
            change = int(change)
        cap = self.max_steps or int(max(
            1000, 50 * self.predicted_arl_steps(threshold)
            + (change / self.time_step if change != NEVER else 0)))
        n_det = len(self.rule(threshold).detectors(self.N))
        # chunks of about a quarter of the expected run keep overshoot small
        hint_steps = (self.predicted_arl_steps(threshold) / n_det
                      if metric == "arl" else self.predicted_delay_steps(threshold))
        return Scenario(self.signal_model(change), self.N, self.rule(threshold),
                        self.attacker_spec().resolved(metric), cap, self.bridge,
                        self.paper_min, int(0.25 * hint_steps) + 16)

    @property
    def time_step(self):
        return self.dt if self.model == "continuous" else 1

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class MetricEstimate:
    """Monte Carlo mean of ARL or delay over the uncensored trials."""

    metric: str
    mean: float
    std_error: float
    trials: int
    censored_count: int
    threshold: float
    seed: int = 0
    false_alarms: int = 0

    @property
    def flagged(self):
        """True when more than 1% of trials were censored (mean is biased low)."""
        return self.censored_count > CENSOR_LIMIT * self.trials

    @property
    def biased(self):
        return self.censored_count > 0


def _estimate(metric, times, censored, threshold, seed, change_time=0.0):
    times = np.asarray(times, dtype=float)
    ok = ~np.asarray(censored, dtype=bool) & np.isfinite(times)
    false_alarms = 0
    if metric == "delay" and change_time > 0:
        early = ok & (times <= change_time)
        false_alarms = int(early.sum())
        ok &= ~early
        times = times - change_time
    x = times[ok]
    n_cens = int(len(times) - ok.sum() - false_alarms)
    if x.size == 0:
        return MetricEstimate(metric, math.inf, math.nan, len(times), n_cens, threshold, seed,
                              false_alarms)
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan
    return MetricEstimate(metric, float(x.mean()), se, len(times), n_cens, threshold, seed,
                          false_alarms)


def estimate_metric(config, metric, threshold, seed=None, trials=None):
    """Simulate ``trials`` runs of ``metric`` at ``threshold``; return the estimate and raw batch."""
    seed = config.seed if seed is None else seed
    trials = config.trials if trials is None else trials
    sc = config.scenario(metric, threshold)
    batch = simulate(sc, seed, trials, workers=config.workers)
    change = config.delay_change_time if metric == "delay" else 0.0
    return _estimate(metric, batch.stop_times, batch.censored, float(threshold), seed,
                     change), batch


def run_point(config, threshold):
    """ARL (no change) and delay (change at ``delay_change_time``) at one threshold."""
    arl, _ = estimate_metric(config, "arl", threshold)
    delay, _ = estimate_metric(config, "delay", threshold)
    return arl, delay


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    model: str
    N: int
    threshold: float
    arl_mean: float
    arl_se: float
    delay_mean: float
    delay_se: float
    bound_delay: float
    censored_arl: int
    censored_delay: int
    trials: int
    seed: int
    error: str = field(default="", compare=False)


@lru_cache(maxsize=32)
def _renewal(model, scope, trials, seed):
    return analytics.estimate_renewal_constants(model, scope, trials, seed=seed)


def renewal_constants_for(config, scope):
    """Renewal constants for a walk over ``scope`` sensors, cached per config."""
    return _renewal(config.signal_model(0), int(scope), int(config.renewal_trials),
                    int(config.seed))


def bound_delay(config, threshold, arl_mean):
    """Analytic delay reference matching the configured scheme, or NaN."""
    N, mu = config.N, config.mu
    strategy = config.attacker_spec().strategy
    try:
        if config.model == "continuous":
            if config.scheme == "centralized":
                if isinstance(strategy, Honest):
                    return analytics.delay_centralized_closed_form(threshold, N, mu)
                if isinstance(strategy, LinearDrift) and strategy.slope == N:
                    return analytics.prop1_bounds(threshold, N, mu).delay_lower
                return math.nan
            if config.scheme == "kth" and config.rank == 2:
                return analytics.theorem1_delay_bound(arl_mean, N, mu)
            if config.scheme == "group" and (config.num_groups, config.quorum) == (3, 2):
                return analytics.theorem2_delay_bound(arl_mean, N, mu)
            return math.nan
        model = config.signal_model(0)
        if config.scheme == "centralized":
            if not isinstance(strategy, Honest):
                return math.nan
            c = renewal_constants_for(config, N)
            return analytics.discrete_delay_approx(threshold, kl_divergence(model), c, N)
        if config.scheme == "kth" and config.rank == 2:
            return analytics.theorem3_delay_bound(arl_mean, model, N,
                                                  renewal_constants_for(config, 1))
        if config.scheme == "group" and (config.num_groups, config.quorum) == (3, 2):
            return analytics.theorem4_delay_bound(arl_mean, model, N,
                                                  renewal_constants_for(config, config.detector_scope()))
    except ValueError:
        return math.nan
    return math.nan


def run_sweep(config):
    """One :class:`SweepRow` per threshold, in threshold order."""
    rows = []
    for h in config.thresholds:
        arl, delay = run_point(config, h)
        problems = []
        if arl.flagged:
            problems.append(f"arl censored in {arl.censored_count}/{arl.trials} trials")
        if delay.flagged:
            problems.append(f"delay censored in {delay.censored_count}/{delay.trials} trials")
        rows.append(SweepRow(
            config.scheme_name, config.model, config.N, h,
            arl.mean, arl.std_error, delay.mean, delay.std_error,
            bound_delay(config, h, arl.mean),
            arl.censored_count, delay.censored_count, config.trials, config.seed,
            "; ".join(problems)))
    return rows


# ---------------------------------------------------------------------------
# ratio against an honest centralized baseline


@dataclass(frozen=True)
class RatioRow:
    scheme: str
    model: str
    N: int
    threshold: float
    arl_mean: float
    delay_mean: float
    baseline_sensors: int
    baseline_threshold: float
    baseline_delay_mean: float
    baseline_delay_se: float
    ratio: float
    ratio_bound: float


def ratio_bound(config):
    """Asymptotic ceiling of the delay ratio against ``N-1`` honest sensors."""
    N = config.N
    if config.scheme == "kth" and config.rank == 2:
        return 2.0 * (N - 1)
    if config.scheme == "group" and (config.num_groups, config.quorum) == (3, 2):
        return 6.0 * (N - 1) / N
    return math.nan


def baseline_threshold(config, arl, n_sensors):
    """Centralized honest threshold whose ARL matches ``arl`` (bisection on the closed form)."""
    if config.model == "continuous":
        return analytics.calibrate_centralized_threshold(arl, n_sensors, config.mu)
    model = config.signal_model(0)
    c = renewal_constants_for(config, n_sensors)
    D = kl_divergence(model)
    return max(0.0, math.log(arl * c.r ** 2 * n_sensors * D))


def delay_ratio_report(config, sweep=None, baseline_sensors=None, arl_source="measured"):
    """Delay ratio of the configured scheme to an honest centralized baseline at matched ARL.

    ``arl_source="analytic"`` matches on the centralized closed form instead of
    the measured ARL (only meaningful for an honest centralized scheme; it
    makes the self-comparison exact).
    """
    sweep = run_sweep(config) if sweep is None else sweep
    m = config.N - 1 if baseline_sensors is None else baseline_sensors
    base = config.replace(scheme="centralized", N=m, attacker="honest", compromised=())
    out = []
    for row in sweep:
        if arl_source == "analytic":
            if config.model != "continuous" or config.scheme != "centralized":
                raise ConfigurationError("analytic ARL matching needs a continuous centralized scheme")
            arl = analytics.arl_centralized_closed_form(row.threshold, config.N, config.mu)
        else:
            arl = row.arl_mean
        nu = baseline_threshold(config, arl, m)
        est, _ = estimate_metric(base, "delay", nu)
        out.append(RatioRow(config.scheme_name, config.model, config.N, row.threshold,
                            row.arl_mean, row.delay_mean, m, nu, est.mean, est.std_error,
                            row.delay_mean / est.mean if est.mean > 0 else math.nan,
                            ratio_bound(config)))
    return out


# ---------------------------------------------------------------------------
# config files and outputs


def load_config(path, **overrides):
    """Read a flat TOML config; unknown keys are errors. ``None`` overrides are ignored."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return config_from_dict(raw, **overrides)


def config_from_dict(raw, **overrides):
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    for key, val in raw.items():
        if isinstance(val, dict):
            raise ConfigurationError(f"config must be flat; {key!r} is a table")
    data = dict(raw)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def config_echo(config):
    """Fully resolved config as TOML text (loadable by :func:`load_config`)."""
    import tomli_w
    d = dataclasses.asdict(config)
    d["thresholds"] = list(d["thresholds"])
    d["compromised"] = list(d["compromised"])
    return tomli_w.dumps(d)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def curves_csv(rows):
    """CSV text for sweep rows with the fixed header."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = CSV_HEADER.split(",")
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def parse_curves(text):
    """Inverse of :func:`curves_csv`."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if ",".join(header) != CSV_HEADER:
        raise ValueError(f"unexpected header {header}")
    types = {f.name: f.type for f in dataclasses.fields(SweepRow)}
    rows = []
    for rec in reader:
        vals = {}
        for name, raw in zip(header, rec):
            t = types[name]
            vals[name] = int(raw) if t == "int" else float(raw) if t == "float" else raw
        rows.append(SweepRow(**vals))
    return rows


def ratio_csv(rows):
    cols = [f.name for f in dataclasses.fields(RatioRow)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def _plot_curves(tables, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "bftqcd", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for rows in tables:
            if not rows:
                continue
            arl = np.array([r.arl_mean for r in rows])
            delay = np.array([r.delay_mean for r in rows])
            bound = np.array([r.bound_delay for r in rows])
            label = f"{rows[0].scheme} ({rows[0].model}, N={rows[0].N})"
            line, = ax.plot(arl, delay, "o-", label=label)
            if np.isfinite(bound).any():
                ax.plot(arl, bound, "--", color=line.get_color(), label=f"{rows[0].scheme} bound")
        ax.set_xscale("log")
        ax.set_xlabel("ARL to false alarm")
        ax.set_ylabel("detection delay")
        ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _plot_ratios(tables, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "bftqcd", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for rows in tables:
            if not rows:
                continue
            arl = [r.arl_mean for r in rows]
            line, = ax.plot(arl, [r.ratio for r in rows], "o-", label=rows[0].scheme)
            if math.isfinite(rows[0].ratio_bound):
                ax.axhline(rows[0].ratio_bound, ls="--", color=line.get_color())
        ax.set_xscale("log")
        ax.set_xlabel("ARL to false alarm")
        ax.set_ylabel("delay ratio to N-1 honest sensors")
        ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def emit_outputs(tables, outdir, config=None, ratios=None):
    """Write ``curves.csv``, ``config.echo`` and SVG plots into ``outdir``.

    ``tables`` is a list of sweep tables (lists of :class:`SweepRow`).
    Returns the written paths. Raises ``OSError`` when ``outdir`` is unusable.
    """
    tables = [t for t in tables if t]
    if not tables:
        raise ValueError("nothing to write: all tables are empty")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    written = []
    p = out / "curves.csv"
    p.write_text(curves_csv([r for t in tables for r in t]))
    written.append(p)
    if config is not None:
        p = out / "config.echo"
        p.write_text(config_echo(config))
        written.append(p)
    p = out / "delay_vs_arl.svg"
    _plot_curves(tables, p)
    written.append(p)
    if ratios:
        p = out / "ratio.csv"
        p.write_text(ratio_csv([r for t in ratios for r in t]))
        written.append(p)
        p = out / "ratio.svg"
        _plot_ratios(ratios, p)
        written.append(p)
    return written
