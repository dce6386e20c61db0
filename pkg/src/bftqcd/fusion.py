"""Fusion rules: combine detector alarm times into the final alarm.

The fusion center only ever sees alarm times (one bit per detector), never
statistic values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cusum import ConfigurationError, StoppingRecord


@dataclass(frozen=True)
class Centralized:
    """One CUSUM over every sensor."""


@dataclass(frozen=True)
class KthAlarm:
    """Alarm at the ``k``-th local alarm; ``k=2`` is the second-alarm rule."""

    k: int = 2


@dataclass(frozen=True)
class GroupWise:
    """Pooled CUSUM per group; alarm once ``quorum`` groups have alarmed."""

    num_groups: int = 3
    quorum: int = 2


@dataclass(frozen=True)
class FusionRule:
    kind: Centralized | KthAlarm | GroupWise
    threshold: float

    def validate_for(self, n_sensors, n_max=None):
        kind = self.kind
        if isinstance(kind, KthAlarm):
            if not 1 <= kind.k <= n_sensors:
                raise ConfigurationError(f"k={kind.k} outside 1..{n_sensors}")
            if n_max is not None and kind.k != n_max + 1:
                raise ConfigurationError(f"k={kind.k} must equal n_max+1={n_max + 1}")
            if n_max is not None and not n_max < n_sensors / 2:
                raise ConfigurationError(f"n_max={n_max} must be < N/2")
        elif isinstance(kind, GroupWise):
            if not 1 <= kind.num_groups <= n_sensors:
                raise ConfigurationError(f"{kind.num_groups} groups for {n_sensors} sensors")
            if not 1 <= kind.quorum <= kind.num_groups:
                raise ConfigurationError(f"quorum {kind.quorum} outside 1..{kind.num_groups}")

    def detectors(self, n_sensors):
        """Sensor membership of each underlying detector."""
        kind = self.kind
        if isinstance(kind, Centralized):
            return [np.arange(n_sensors)]
        if isinstance(kind, KthAlarm):
            return [np.array([n]) for n in range(n_sensors)]
        return assign_groups(n_sensors, kind.num_groups)

    @property
    def rank(self):
        """Order statistic of the detector times that fires the final alarm."""
        kind = self.kind
        if isinstance(kind, Centralized):
            return 1
        if isinstance(kind, KthAlarm):
            return kind.k
        return kind.quorum


def kth_order_statistic(times, k):
    """``k``-th smallest alarm time (1-based); ``inf`` if fewer than ``k`` are finite.

    Ties are broken by detector index, which only matters for :func:`kth_index`.
    """
    times = np.asarray(times, dtype=float)
    if not 1 <= k <= times.size:
        raise ConfigurationError(f"rank k={k} outside 1..{times.size}")
    return float(np.sort(times, kind="stable")[k - 1])


def kth_index(times, k):
    """Detector whose alarm is the ``k``-th, ties going to the lower index."""
    times = np.asarray(times, dtype=float)
    if not 1 <= k <= times.size:
        raise ConfigurationError(f"rank k={k} outside 1..{times.size}")
    return int(np.argsort(times, kind="stable")[k - 1])


def assign_groups(n_sensors, num_groups=3):
    """Contiguous near-even partition of ``0..n_sensors-1``; earlier groups take the extras."""
    if n_sensors < num_groups:
        raise ConfigurationError(f"cannot split {n_sensors} sensors into {num_groups} groups")
    return [np.asarray(g) for g in np.array_split(np.arange(n_sensors), num_groups)]


def fuse(rule, records):
    """Final stopping record from the detectors' records.

    ``records`` is a sequence of :class:`StoppingRecord` (or bare alarm
    times), one per detector, in detector order.
    """
    times = [r.stop_time if isinstance(r, StoppingRecord) else float(r) for r in records]
    kind = rule.kind
    if isinstance(kind, Centralized):
        if len(times) != 1:
            raise ConfigurationError(f"centralized rule takes one record, got {len(times)}")
        if isinstance(records[0], StoppingRecord):
            return records[0]
        t = times[0]
        return StoppingRecord(math.isfinite(t), t)
    if isinstance(kind, GroupWise) and len(times) != kind.num_groups:
        raise ConfigurationError(f"expected {kind.num_groups} group records, got {len(times)}")
    t = kth_order_statistic(times, rule.rank)
    if not math.isfinite(t):
        censored = any(isinstance(r, StoppingRecord) and r.censored for r in records)
        return StoppingRecord(False, math.inf, censored=censored)
    return StoppingRecord(True, t)
