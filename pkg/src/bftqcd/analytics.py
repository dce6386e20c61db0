"""Closed forms, survival series, delay bounds and renewal constants.

Continuous-time quantities are in time units with post-change drift ``mu``;
discrete-time ones are in steps with ``D = D(f1 || f0)``. Asymptotic bounds
drop their ``o(1)`` terms, so simulated values are compared against them
one-sidedly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from . import _rng
from .signal_models import DiscreteModel, gaussian_llr_coefficients, kl_divergence


class SeriesTruncationError(ValueError):
    """The truncated survival series cannot meet its tolerance at this ``t``."""


class RootExistenceError(ValueError):
    """``tanh(eta) = 2 eta / h`` has only the trivial root (``h <= 2``)."""


# ---------------------------------------------------------------------------
# centralized CUSUM, continuous time


def arl_centralized_closed_form(nu, N=1, mu=1.0):
    """Mean time to false alarm of the centralized CUSUM, ``2(e^nu - nu - 1)/(N mu^2)``."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 0):
        raise ValueError("nu must be >= 0")
    out = 2.0 * (np.expm1(nu) - nu) / (N * mu * mu)
    return float(out) if out.ndim == 0 else out


def delay_centralized_closed_form(nu, N=1, mu=1.0):
    """Detection delay of the centralized CUSUM, ``2(e^-nu + nu - 1)/(N mu^2)``."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 0):
        raise ValueError("nu must be >= 0")
    out = 2.0 * (np.expm1(-nu) + nu) / (N * mu * mu)
    return float(out) if out.ndim == 0 else out


def calibrate_centralized_threshold(arl, N=1, mu=1.0, tol=1e-12):
    """Threshold whose closed-form ARL equals ``arl``, by bisection."""
    if arl <= 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while arl_centralized_closed_form(hi, N, mu) < arl:
        hi *= 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if arl_centralized_closed_form(mid, N, mu) < arl:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Prop1Bounds:
    arl_upper: float
    delay_lower: float


def prop1_bounds(nu, N, mu=1.0):
    """ARL and delay of the centralized CUSUM under the ``N t + W_t`` attack.

    ``arl_upper`` is the exact mean run length under the attack (an upper
    bound on the worst-case ARL); ``delay_lower`` bounds the delay from below.
    """
    if nu < 0:
        raise ValueError("nu must be >= 0")
    if N < 2:
        raise ValueError("the attack needs N >= 2")
    g = math.expm1(-nu) + nu
    return Prop1Bounds(g / (N * mu * mu / 2.0), g / ((1.5 * N - 1.0) * mu * mu))


def reflected_drift_mean_time(nu, drift, variance):
    """Mean first passage of ``y = u - min u`` to ``nu`` for ``u`` a BM(drift, variance).

    Covers every Brownian case above: honest centralized (drift ``N mu^2/2``),
    pre-change (drift ``-N mu^2/2``) and attacked statistics.
    """
    if drift == 0:
        return nu * nu / variance
    c = 2.0 * drift / variance
    return (math.expm1(-c * nu) + c * nu) / (c * drift)


# ---------------------------------------------------------------------------
# survival series of the single-sensor CUSUM


def _u(x):
    s = np.sin(x)
    return s ** 3 / (x - s * np.cos(x))


def _v(x):
    s = np.sinh(x)
    return s ** 3 / (s * np.cosh(x) - x)


def _bisect(f, lo, hi, iters=200):
    """Vectorized bisection; ``f(lo)`` and ``f(hi)`` must differ in sign."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
        if np.all((hi - lo) <= 4 * np.spacing(hi)):
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SurvivalSeriesParams:
    """Roots and coefficients of the single-sensor survival series.

    ``phi`` solves ``tan phi = -2 phi / h`` on ``((2k-1)pi/2, k pi)``, ``theta``
    solves ``tan theta = 2 theta / h`` on ``(k pi, (2k+1)pi/2)`` and ``eta``
    solves ``tanh eta = 2 eta / h``.
    """

    h: float
    mu: float
    phi: np.ndarray
    theta: np.ndarray
    eta: float
    tail_tol: float = 1e-8
    p0_coef: np.ndarray = field(init=False, repr=False)
    p0_rate: np.ndarray = field(init=False, repr=False)
    pinf_coef: np.ndarray = field(init=False, repr=False)
    pinf_rate: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mu2 = self.mu * self.mu
        set_ = object.__setattr__
        set_(self, "p0_coef", 2.0 * math.exp(self.h / 2) * _u(self.phi))
        set_(self, "p0_rate", mu2 / (8.0 * np.cos(self.phi) ** 2))
        lead = 2.0 * math.exp(-self.h / 2)
        set_(self, "pinf_coef", np.concatenate(
            [[lead * _v(self.eta)], lead * _u(self.theta)]))
        set_(self, "pinf_rate", np.concatenate(
            [[mu2 / (8.0 * math.cosh(self.eta) ** 2)], mu2 / (8.0 * np.cos(self.theta) ** 2)]))

    @property
    def K(self):
        return len(self.phi)


def solve_transcendental_roots(h, K, mu=1.0, tail_tol=1e-8):
    """First ``K`` roots of each family, by bisection on their brackets."""
    if not h > 2:
        raise RootExistenceError(f"h={h}: tanh(eta) = 2 eta/h needs h > 2 for a positive root")
    if K < 1:
        raise ValueError("K must be >= 1")
    phi, theta = _oscillatory_roots(h, np.arange(1, K + 1))
    eta = float(_bisect(lambda x: np.tanh(x) - 2 * x / h, 1e-12, h / 2))
    return SurvivalSeriesParams(float(h), float(mu), phi, theta, eta, tail_tol)


def _oscillatory_roots(h, k):
    # sin/cos forms avoid the poles of tan at the bracket ends
    phi = _bisect(lambda x: h * np.sin(x) + 2 * x * np.cos(x),
                  (2 * k - 1) * math.pi / 2, k * math.pi)
    theta = _bisect(lambda x: h * np.sin(x) - 2 * x * np.cos(x),
                    k * math.pi, (2 * k + 1) * math.pi / 2)
    return phi, theta


def root_residuals(params):
    """``(phi, theta, eta)`` residuals of the defining tan/tanh equations."""
    h = params.h
    return (np.tan(params.phi) + 2 * params.phi / h,
            np.tan(params.theta) - 2 * params.theta / h,
            math.tanh(params.eta) - 2 * params.eta / h)


def _series(t, coef, rate, tail_tol, return_error):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("the survival series needs t > 0")
    terms = coef * np.exp(-np.multiply.outer(t, rate))
    total = terms.sum(axis=-1)
    last = np.abs(terms[..., -1])
    if np.any(last > tail_tol * np.maximum(np.abs(total), 1e-300)):
        raise SeriesTruncationError(
            f"K={len(coef)} terms do not reach tail_tol={tail_tol} at t={t.min():g}; increase K")
    val = np.clip(total, 0.0, 1.0)
    if val.ndim == 0:
        val, last = float(val), float(last)
    return (val, last) if return_error else val


def survival_p0(t, params, return_error=False):
    """``P(T_h >= t)`` for one honest sensor, change at time 0.

    With ``return_error`` also returns the magnitude of the last retained
    term, an estimate of the truncation error.
    """
    return _series(t, params.p0_coef, params.p0_rate, params.tail_tol, return_error)


def survival_pinf(t, params, return_error=False):
    """``P(T_h >= t)`` for one honest sensor that never sees a change."""
    return _series(t, params.pinf_coef, params.pinf_rate, params.tail_tol, return_error)


def _integrated(params, which, rel_tol):
    mu2 = params.mu ** 2
    h = params.h
    if which == "p0":
        total = float(np.sum(params.p0_coef / params.p0_rate))
    else:
        total = float(np.sum(params.pinf_coef / params.pinf_rate))
    # term-wise integrals decay like k^-3; extend the root list until the
    # next block is negligible
    k0, block = params.K + 1, max(params.K, 1024)
    while True:
        k = np.arange(k0, k0 + block)
        phi, theta = _oscillatory_roots(h, k)
        if which == "p0":
            x, lead = phi, 2.0 * math.exp(h / 2)
        else:
            x, lead = theta, 2.0 * math.exp(-h / 2)
        extra = float(np.sum(lead * _u(x) * 8.0 * np.cos(x) ** 2 / mu2))
        total += extra
        if abs(extra) <= rel_tol * abs(total) or k0 > 2 ** 24:
            return total
        k0 += block
        block *= 2


def integrated_p0(params, rel_tol=1e-12):
    """Term-wise integral of the ``P_0`` series over ``(0, inf)``.

    Roots beyond ``params.K`` are added until the remaining tail is below
    ``rel_tol`` of the total.
    """
    return _integrated(params, "p0", rel_tol)


def integrated_pinf(params, rel_tol=1e-12):
    """Term-wise integral of the ``P_inf`` series over ``(0, inf)``."""
    return _integrated(params, "pinf", rel_tol)


def survival_params(h, mu=1.0, t_min=None, tail_tol=1e-8, K=16):
    """Roots with ``K`` doubled until the series meets ``tail_tol`` down to ``t_min``.

    The default ``t_min = h^2/(60 mu^2)`` is short enough that a CUSUM
    started at zero has essentially no chance of alarming before it.
    """
    if t_min is None:
        t_min = h * h / (60.0 * mu * mu)
    while True:
        p = solve_transcendental_roots(h, K, mu, tail_tol)
        try:
            survival_p0(t_min, p)
            survival_pinf(t_min, p)
            return p
        except SeriesTruncationError:
            if K > 2 ** 20:
                raise
            K *= 2


def order_statistic_survival(s, k, M):
    """``P(T_(k),M >= t)`` from the common survival ``s`` of ``M`` iid times."""
    s = np.asarray(s, dtype=float)
    f = 1.0 - s
    return sum(special.comb(M, j) * f ** j * s ** (M - j) for j in range(k))


def expected_order_statistic(params, k, M, law="p0"):
    """``E[T_(k),M]`` for iid single-sensor CUSUM times, by quadrature of the series.

    Before ``t_min = h^2/(60 mu^2)`` the survival is taken as 1; the neglected
    mass is below ``exp(-25)``.
    """
    surv = survival_p0 if law == "p0" else survival_pinf
    if law not in ("p0", "pinf"):
        raise ValueError(f"law must be 'p0' or 'pinf', got {law!r}")
    t0 = params.h ** 2 / (60.0 * params.mu ** 2)
    mean_single = (integrated_p0(params) if law == "p0" else integrated_pinf(params))

    def g(t):
        return order_statistic_survival(surv(t, params), k, M)

    pieces = [t0, mean_single / M, mean_single, 10 * mean_single]
    pieces = sorted(set(p for p in pieces if p >= t0))
    total = t0
    for a, b in zip(pieces[:-1], pieces[1:]):
        total += integrate.quad(g, a, b, limit=200, epsabs=1e-12, epsrel=1e-10)[0]
    total += integrate.quad(g, pieces[-1], np.inf, limit=200, epsabs=1e-12, epsrel=1e-10)[0]
    return total


# ---------------------------------------------------------------------------
# continuous-time delay bounds


def theorem1_arl_lower(h, N, mu=1.0):
    """Leading term of the second-alarm ARL lower bound, ``2 e^h / ((N-1) mu^2)``."""
    return 2.0 * math.exp(h) / ((N - 1) * mu * mu)


def theorem1_delay_upper(h, mu=1.0):
    """Second-alarm worst-case delay bound ``4(e^-h + h - 1)/mu^2``."""
    return 4.0 * (math.expm1(-h) + h) / (mu * mu)


def theorem1_delay_bound(arl, N, mu=1.0):
    """Second-alarm delay envelope ``4/mu^2 (log ARL + log((N-1) mu^2/2) - 1)``."""
    if not arl > 1:
        raise ValueError("arl must be > 1")
    return 4.0 / (mu * mu) * (math.log(arl) + math.log((N - 1) * mu * mu / 2.0) - 1.0)


def theorem2_arl_lower(h, N, mu=1.0):
    """Leading term of the group-wise ARL lower bound, ``3 e^h / (N mu^2)``."""
    return 3.0 * math.exp(h) / (N * mu * mu)


def theorem2_delay_upper(h, N, mu=1.0):
    """Group-wise worst-case delay bound ``12 (e^-h + h - 1)/(N mu^2)``."""
    return 12.0 * (math.expm1(-h) + h) / (N * mu * mu)


def theorem2_delay_bound(arl, N, mu=1.0):
    """Group-wise delay envelope ``12/(mu^2 N) (log ARL + log(N mu^2/3) - 1)``."""
    if not arl > 1:
        raise ValueError("arl must be > 1")
    return 12.0 / (mu * mu * N) * (math.log(arl) + math.log(N * mu * mu / 3.0) - 1.0)


# ---------------------------------------------------------------------------
# discrete time: renewal constants and bounds


@dataclass(frozen=True)
class RenewalConstants:
    """Limiting overshoot ``kappa``, minimum mean ``beta`` and ``r = E exp(-overshoot)``.

    Estimated for a walk summing ``scope_size`` iid log-likelihood ratios
    under the post-change law. ``converged`` is False when the two largest
    thresholds of the ladder disagree beyond three standard errors.
    """

    kappa: float
    kappa_se: float
    beta: float
    beta_se: float
    r: float
    r_se: float
    scope_size: int = 1
    trials: int = 0
    converged: bool = True
    notes: tuple[str, ...] = ()


def _llr_sampler(model, scope_size):
    """Draw per-step walk increments under f1 from standard normals."""
    lin = gaussian_llr_coefficients(model)
    if lin is not None:
        a, b = lin
        f1 = model.f1
        # a sum of iid normals is normal: one draw per step covers the scope
        return 1, lambda g: a * (f1.mean * scope_size + f1.sd * math.sqrt(scope_size) * g[..., 0]) + b * scope_size
    return scope_size, lambda g: model.llr(model.f1.from_standard(g)).sum(axis=-1)


def _first_passage(walk, levels):
    """Index of the first column where ``walk >= level``, per row and level (-1: none)."""
    out = np.empty((walk.shape[0], len(levels)), dtype=np.int64)
    for j, lv in enumerate(levels):
        hit = walk >= lv
        out[:, j] = np.where(hit.any(axis=1), hit.argmax(axis=1), -1)
    return out


def estimate_renewal_constants(model: DiscreteModel, scope_size=1, trials=10 ** 5,
                               thresholds=(6.0, 8.0, 10.0), seed=0, batch=10 ** 4):
    """Monte Carlo estimates of ``kappa``, ``beta`` and ``r``.

    ``kappa`` is the mean overshoot of the reflected CUSUM over each threshold,
    ``r`` the mean of ``exp(-(u - nu))`` at the first passage of the
    unreflected walk; both are reported at the largest threshold and checked
    against the next one. ``beta`` is the mean all-time minimum of ``u``
    (with ``u_0 = 0``), over a window doubled until it stops moving.
    """
    thresholds = np.asarray(sorted(thresholds), dtype=float)
    if thresholds.size < 1 or np.any(thresholds <= 0):
        raise ValueError("thresholds must be positive")
    D = kl_divergence(model)
    width, draw = _llr_sampler(model, scope_size)
    step_mean = scope_size * D
    horizon = int(math.ceil(2.0 * thresholds[-1] / step_mean)) + 64

    kap, rr, mins = [], [], []
    notes = []
    window = max(64, int(math.ceil(4.0 / step_mean)))
    for b, lo in enumerate(range(0, trials, batch)):
        n = min(batch, trials - lo)
        rng = _rng.stream(seed, b, _rng.RENEWAL)
        z = draw(rng.standard_normal((n, horizon, width)))
        while True:
            u = np.cumsum(z, axis=1)
            y = u - np.minimum(np.minimum.accumulate(u, axis=1), 0.0)
            fy = _first_passage(y, thresholds)
            fu = _first_passage(u, thresholds)
            if np.all(fy >= 0) and np.all(fu >= 0):
                break
            z = np.concatenate([z, draw(rng.standard_normal((n, horizon, width)))], axis=1)
        rows = np.arange(n)[:, None]
        kap.append(y[rows, fy] - thresholds)
        rr.append(np.exp(-(u[rows, fu] - thresholds)))

        # beta on a dedicated stream so window growth does not disturb kappa/r
        brng = _rng.stream(seed, b, _rng.AUX)
        w = window
        zb = draw(brng.standard_normal((n, 2 * w, width)))
        while True:
            ub = np.cumsum(zb, axis=1)
            m1 = np.minimum(ub[:, :w].min(axis=1), 0.0)
            m2 = np.minimum(ub.min(axis=1), 0.0)
            diff = float(np.mean(m2 - m1))
            se = float(np.std(m2, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
            if abs(diff) < max(se, 1e-12) or w > 2 ** 20:
                break
            zb = np.concatenate([zb, draw(brng.standard_normal((n, 2 * w, width)))], axis=1)
            w *= 2
        mins.append(m2)

    kap = np.concatenate(kap)
    rr = np.concatenate(rr)
    mins = np.concatenate(mins)

    def mean_se(x):
        return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0

    converged = True
    if thresholds.size >= 2:
        for name, arr in (("kappa", kap), ("r", rr)):
            top, nxt = arr[:, -1], arr[:, -2]
            d = top - nxt
            se = d.std(ddof=1) / math.sqrt(len(d)) if len(d) > 1 else 0.0
            if abs(d.mean()) > 3 * se + 1e-12:
                converged = False
                notes.append(f"{name} moved by {d.mean():.4g} between the top two thresholds")
    if not converged:
        warnings.warn("renewal constants not converged over the threshold ladder: "
                      + "; ".join(notes), RuntimeWarning, stacklevel=2)
    k_m, k_se = mean_se(kap[:, -1])
    r_m, r_se = mean_se(rr[:, -1])
    b_m, b_se = mean_se(mins)
    return RenewalConstants(k_m, k_se, b_m, b_se, r_m, r_se, scope_size, trials,
                            converged, tuple(notes))


def discrete_arl_approx(h, D, r, scope_size=1):
    """``e^h / (r^2 scope D)``: asymptotic false-alarm ARL of a discrete CUSUM."""
    return math.exp(h) / (r * r * scope_size * D)


def discrete_delay_approx(h, D, constants, scope_size=1):
    """``(h + beta + kappa) / (scope D)``: asymptotic delay of a discrete CUSUM."""
    return (h + constants.beta + constants.kappa) / (scope_size * D)


def theorem3_delay_bound(arl, model, N, constants):
    """Discrete second-alarm delay envelope, ``o(1)`` dropped.

    ``constants`` must be the single-sequence (scope 1) renewal constants.
    """
    if not arl > 1:
        raise ValueError("arl must be > 1")
    D = kl_divergence(model)
    q = math.exp(1.0 - N)
    r = constants.r
    return 2.0 / D * (math.log(arl) + math.log((1.0 - q) * r * r * D / q)
                      + constants.beta + constants.kappa)


def theorem4_delay_bound(arl, model, N, constants):
    """Discrete group-wise delay envelope, ``o(1)`` dropped.

    ``constants`` must be the renewal constants for a walk of ``N/3`` sequences.
    """
    if not arl > 1:
        raise ValueError("arl must be > 1")
    D = kl_divergence(model)
    q = math.exp(-1.0)
    r = constants.r
    s = D * N / 3.0
    return 2.0 / s * (math.log(arl) + math.log((1.0 - q) * r * r * s / q)
                      + constants.beta + constants.kappa)


def geometric_approximation_check(stop_times, scale):
    """Sup over integers ``k >= 1`` of ``|P(T/C >= k) - e^-k|``."""
    x = np.sort(np.asarray(stop_times, dtype=float) / scale)
    if x.size == 0:
        raise ValueError("no samples")
    kmax = max(1, int(math.ceil(x[-1])) + 1)
    k = np.arange(1, kmax + 1)
    emp = 1.0 - np.searchsorted(x, k, side="left") / x.size
    return float(np.max(np.abs(emp - np.exp(-k))))
