"""Byzantine attacker strategies.

Signal-level strategies (:class:`Honest`, :class:`LinearDrift`) rewrite the
compromised sensor's reported stream. :class:`ImmediateAlarm` and
:class:`Silent` are the evaluation idealizations: the fusion layer pins the
compromised detector's alarm time to 0 or never, unless ``signal_level`` is
requested, in which case they become very steep positive or negative drifts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cusum import ConfigurationError

#: drift used when the idealized strategies are emulated in the signal
SIGNAL_LEVEL_SLOPE = 1e4


@dataclass(frozen=True)
class Honest:
    pass


@dataclass(frozen=True)
class LinearDrift:
    """Report ``slope * t + W_t`` (continuous) or ``slope + sd0 * G`` per step (discrete).

    ``sd0`` is the pre-change scale, so the fabricated noise matches honest noise.
    """

    slope: float


@dataclass(frozen=True)
class ImmediateAlarm:
    pass


@dataclass(frozen=True)
class Silent:
    pass


@dataclass(frozen=True)
class WorstCase:
    """Placeholder resolved per metric by :func:`worst_case_mode`."""


Strategy = Honest | LinearDrift | ImmediateAlarm | Silent | WorstCase


def worst_case_mode(metric):
    """Idealized strategy that is worst for ``metric`` ("arl", "delay" or "honest")."""
    metric = metric.lower()
    if metric == "arl":
        return ImmediateAlarm()
    if metric == "delay":
        return Silent()
    if metric == "honest":
        return Honest()
    raise ValueError(f"unknown metric {metric!r}")


@dataclass(frozen=True)
class AttackerSpec:
    """Which sensors are compromised and how they behave.

    ``compromised`` holds 0-based sensor indices; ``None`` means the last
    sensor. ``n_max`` is the asserted bound used to size the k-th alarm rule.
    """

    strategy: Strategy = field(default_factory=Honest)
    compromised: tuple[int, ...] | None = None
    n_max: int = 1
    signal_level: bool = False

    def __post_init__(self):
        if self.compromised is not None:
            object.__setattr__(self, "compromised", tuple(int(i) for i in self.compromised))
            if len(set(self.compromised)) != len(self.compromised):
                raise ConfigurationError("duplicate compromised sensor index")
            if len(self.compromised) > self.n_max:
                raise ConfigurationError(
                    f"{len(self.compromised)} compromised sensors exceed n_max={self.n_max}")
        if self.n_max < 0:
            raise ConfigurationError("n_max must be >= 0")

    def sensors(self, n_sensors):
        """Resolved compromised indices for a network of ``n_sensors``."""
        idx = self.compromised if self.compromised is not None else (n_sensors - 1,)
        for i in idx:
            if not 0 <= i < n_sensors:
                raise ConfigurationError(f"compromised index {i} outside 0..{n_sensors - 1}")
        return idx

    def validate_for(self, n_sensors):
        if self.n_max >= n_sensors / 2:
            raise ConfigurationError(
                f"n_max={self.n_max} must be < N/2={n_sensors / 2}")
        self.sensors(n_sensors)

    def resolved(self, metric):
        """Copy with :class:`WorstCase` replaced by the idealization for ``metric``."""
        if isinstance(self.strategy, WorstCase):
            return AttackerSpec(worst_case_mode(metric), self.compromised, self.n_max,
                                self.signal_level)
        return self

    def effective_strategy(self):
        """Strategy as seen by the signal layer."""
        s = self.strategy
        if self.signal_level and isinstance(s, ImmediateAlarm):
            return LinearDrift(SIGNAL_LEVEL_SLOPE)
        if self.signal_level and isinstance(s, Silent):
            return LinearDrift(-SIGNAL_LEVEL_SLOPE)
        return s

    def forced_alarm_time(self):
        """Alarm time pinned by the fusion layer, or None for signal-level strategies."""
        s = self.effective_strategy()
        if isinstance(s, ImmediateAlarm):
            return 0.0
        if isinstance(s, Silent):
            return math.inf
        if isinstance(s, WorstCase):
            raise ConfigurationError("resolve WorstCase with AttackerSpec.resolved(metric) first")
        return None


def apply_attack(spec, honest_increment, sensor, noise, n_sensors, dt=None, sd0=1.0):
    """Reported value for compromised ``sensor``.

    Parameters
    ----------
    honest_increment : float or ndarray
        What the sensor actually observed.
    noise : float or ndarray
        Standard normal draw(s) from the sensor's own keyed stream; the
        attacker's fabricated noise reuses it (scaled by ``sd0`` in the
        discrete model).
    dt : float, optional
        Step of the continuous model; ``None`` for discrete observations.

    Returns
    -------
    The fabricated increment, or ``None`` for the idealized strategies,
    which are handled by the fusion layer.
    """
    if sensor not in spec.sensors(n_sensors):
        raise ConfigurationError(f"sensor {sensor} is not compromised")
    s = spec.effective_strategy()
    if isinstance(s, Honest):
        return honest_increment
    if isinstance(s, LinearDrift):
        if dt is None:
            return s.slope + sd0 * np.asarray(noise, dtype=float)
        return s.slope * dt + math.sqrt(dt) * np.asarray(noise, dtype=float)
    if isinstance(s, (ImmediateAlarm, Silent)):
        return None
    raise ConfigurationError(f"cannot apply {s!r}; resolve WorstCase first")

