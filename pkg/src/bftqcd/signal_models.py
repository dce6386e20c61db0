"""Honest observation streams for the Brownian and the iid discrete models."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

NEVER = math.inf
"""Change time meaning "the change never happens"."""


class NoAnalyticKL(ValueError):
    """Raised when no closed-form KL divergence is known for a density pair."""


@dataclass(frozen=True)
class GaussianDensity:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.mean) and self.sd > 0 and np.isfinite(self.sd)):
            raise ValueError(f"invalid Gaussian parameters mean={self.mean}, sd={self.sd}")

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return -0.5 * z * z - math.log(self.sd) - 0.5 * math.log(2 * math.pi)

    def from_standard(self, g):
        """Map standard normal draws onto this density."""
        return self.mean + self.sd * g


@dataclass(frozen=True)
class ContinuousModel:
    """Brownian observations ``mu * (t - change_time)^+ + W_t`` sampled every ``dt``.

    Parameters
    ----------
    mu : float
        Post-change drift per unit time.
    dt : float
        Euler step.
    change_time : float
        Change instant; ``NEVER`` for a change-free run.
    """

    mu: float = 1.0
    dt: float = 0.01
    change_time: float = 0.0

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not math.isfinite(self.mu) or self.mu == 0:
            raise ValueError(f"mu must be finite and nonzero, got {self.mu}")
        if not self.change_time >= 0:
            raise ValueError(f"change_time must be >= 0 or NEVER, got {self.change_time}")

    def drift_at(self, t):
        """Drift in force on the step that starts at time ``t``."""
        return np.where(np.asarray(t) >= self.change_time, self.mu, 0.0)

    def with_change(self, change_time):
        return ContinuousModel(self.mu, self.dt, change_time)


@dataclass(frozen=True)
class DiscreteModel:
    """iid observations from ``f0`` up to ``change_time`` and from ``f1`` after it.

    ``f0``/``f1`` need ``logpdf(x)`` and ``from_standard(g)``; the latter keeps
    the per-sensor draw a function of one standard normal so both models share
    the same random layout.
    """

    f0: GaussianDensity = GaussianDensity(0.0, 1.0)
    f1: GaussianDensity = GaussianDensity(1.0, 1.0)
    change_time: float = 0

    def __post_init__(self):
        if self.f0 == self.f1:
            raise ValueError("f0 and f1 must differ")
        if not self.change_time >= 0:
            raise ValueError(f"change_time must be >= 0 or NEVER, got {self.change_time}")
        if self.change_time != NEVER and self.change_time != int(self.change_time):
            raise ValueError("discrete change_time must be an integer")
        kl = kl_divergence(self)
        if not (kl > 0 and math.isfinite(kl)):
            raise ValueError(f"D(f1||f0) must be finite and positive, got {kl}")

    def density_at(self, k):
        """Density generating observation ``k`` (``k >= 1``)."""
        return self.f0 if k <= self.change_time else self.f1

    def llr(self, x):
        """Per-observation log-likelihood ratio ``log f1(x)/f0(x)``."""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("observation outside the common support")
        return self.f1.logpdf(x) - self.f0.logpdf(x)

    def with_change(self, change_time):
        return DiscreteModel(self.f0, self.f1, change_time)


def next_continuous_increment(model, t, g):
    """Increment of ``xi`` over ``[t, t + dt)`` driven by standard normal ``g``.

    ``g`` may be an array (one entry per sensor); pass the draw from the
    keyed stream so the result is a function of ``(seed, sensor, step)``.
    """
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    return model.drift_at(t) * model.dt + math.sqrt(model.dt) * np.asarray(g, dtype=float)


def next_discrete_observation(model, k, g):
    """Observation at integer time ``k >= 1`` driven by standard normal ``g``."""
    if k < 1:
        raise ValueError("discrete time starts at k=1")
    return model.density_at(k).from_standard(np.asarray(g, dtype=float))


def gaussian_kl(f1, f0):
    """``D(f1 || f0)`` for two Gaussians."""
    return (math.log(f0.sd / f1.sd)
            + (f1.sd ** 2 + (f1.mean - f0.mean) ** 2) / (2 * f0.sd ** 2) - 0.5)


def numeric_kl(f1, f0, lo=-math.inf, hi=math.inf):
    """``D(f1 || f0)`` by quadrature, for density pairs without a closed form."""
    def integrand(x):
        lf1 = float(f1.logpdf(x))
        return math.exp(lf1) * (lf1 - float(f0.logpdf(x)))
    val, _ = integrate.quad(integrand, lo, hi, limit=200)
    return val


def kl_divergence(model_or_f1, f0=None):
    """Kullback-Leibler divergence ``D(f1 || f0)``.

    Accepts either a :class:`DiscreteModel` or an ``(f1, f0)`` pair. Only the
    Gaussian pair has a closed form; other pairs raise :class:`NoAnalyticKL`
    and should go through :func:`numeric_kl`.
    """
    if f0 is None:
        f1, f0 = model_or_f1.f1, model_or_f1.f0
    else:
        f1 = model_or_f1
    if isinstance(f1, GaussianDensity) and isinstance(f0, GaussianDensity):
        return gaussian_kl(f1, f0)
    raise NoAnalyticKL(
        f"no analytic KL for {type(f1).__name__}/{type(f0).__name__}; use numeric_kl")


def gaussian_llr_coefficients(model):
    """``(a, b)`` with ``llr(x) = a * x + b`` for an equal-variance Gaussian pair, else None."""
    f0, f1 = model.f0, model.f1
    if not (isinstance(f0, GaussianDensity) and isinstance(f1, GaussianDensity)):
        return None
    if f0.sd != f1.sd:
        return None
    var = f0.sd ** 2
    a = (f1.mean - f0.mean) / var
    return a, -a * 0.5 * (f0.mean + f1.mean)
