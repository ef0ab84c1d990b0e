"""Scale/noise-level schedules and the SDE coefficient map.

A schedule is the pair (s(t), sigma(t)) on a horizon [0, T] together with
analytic derivatives.  The variance-preserving family uses a linear beta ramp
``beta(t) = beta_min + (beta_max - beta_min) * t / T`` and the exact integral
``abar(t) = exp(-int_0^t beta)``, so derivatives never come from finite
differences.  A discrete abar table with the same ramp is kept for the
step-indexed equivalence tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import Field


class EndpointError(ValueError):
    """A schedule quantity was requested at an endpoint where it is undefined."""


class Schedule:
    """Signal scale s(t) and noise level sigma(t) with analytic derivatives.

    sigma_prime may be reported as +inf at t = 0 when the analytic formula
    diverges there (true for the variance-preserving family, where
    sigma ~ sqrt(t) near zero).
    """

    def __init__(self, T, s, s_prime, sigma, sigma_prime, dsigma2_dt,
                 kind="custom", alpha_bar=None, alpha_bar_table=None):
        if T <= 0:
            raise ValueError("horizon T must be positive")
        self.T = float(T)
        self.kind = kind
        self._s = s
        self._s_prime = s_prime
        self._sigma = sigma
        self._sigma_prime = sigma_prime
        self._dsigma2_dt = dsigma2_dt
        self._alpha_bar = alpha_bar
        if alpha_bar_table is not None:
            alpha_bar_table = np.asarray(alpha_bar_table, dtype=np.float64)
            alpha_bar_table.setflags(write=False)
        self.alpha_bar_table = alpha_bar_table

    def _check(self, t: float) -> float:
        t = float(t)
        if not 0.0 <= t <= self.T:
            raise ValueError(f"t={t} outside the schedule horizon [0, {self.T}]")
        return t

    def s(self, t: float) -> float:
        return self._s(self._check(t))

    def s_prime(self, t: float) -> float:
        return self._s_prime(self._check(t))

    def sigma(self, t: float) -> float:
        return self._sigma(self._check(t))

    def sigma_prime(self, t: float) -> float:
        return self._sigma_prime(self._check(t))

    def dsigma2_dt(self, t: float) -> float:
        """d(sigma^2)/dt; finite on [0, T] even where sigma' diverges."""
        return self._dsigma2_dt(self._check(t))

    def alpha_bar(self, t: float) -> float:
        if self._alpha_bar is None:
            raise ValueError("this schedule has no alpha-bar form")
        return self._alpha_bar(self._check(t))

    def evaluate(self, t: float):
        """(s, s', sigma, sigma') at time t in [0, T]."""
        t = self._check(t)
        return (self._s(t), self._s_prime(t), self._sigma(t), self._sigma_prime(t))


@dataclass(frozen=True)
class SdeCoefficients:
    """Drift gain f (1/time), diffusion gain g (per sqrt-time), drift offset phi."""

    f: float
    g: float
    phi: Field


def _vp_parts(beta_min: float, beta_max: float, T: float):
    if beta_min <= 0 or beta_max < beta_min:
        raise ValueError("need 0 < beta_min <= beta_max")
    if T <= 0:
        raise ValueError("horizon T must be positive")
    slope = (beta_max - beta_min) / T

    def beta(t):
        return beta_min + slope * t

    def beta_integral(t):
        return beta_min * t + 0.5 * slope * t * t

    def alpha_bar(t):
        return math.exp(-beta_integral(t))

    t_int = int(round(T))
    table = None
    if t_int >= 1:
        betas = np.linspace(beta_min, beta_max, t_int)
        table = np.cumprod(1.0 - betas)
    return beta, alpha_bar, table


def make_vp_schedule(beta_min: float = 1e-4, beta_max: float = 0.02,
                     T: float = 100.0) -> Schedule:
    """Variance-preserving schedule: s = 1, sigma = sqrt(1 - abar(t))."""
    beta, alpha_bar, table = _vp_parts(beta_min, beta_max, T)

    def b_int(t):
        return beta_min * t + 0.5 * (beta_max - beta_min) / T * t * t

    def sigma(t):
        # 1 - exp(-B) via expm1 keeps precision near t = 0
        return math.sqrt(-math.expm1(-b_int(t)))

    def sigma_prime(t):
        sig = sigma(t)
        if sig == 0.0:
            return math.inf
        return beta(t) * alpha_bar(t) / (2.0 * sig)

    def dsigma2(t):
        return beta(t) * alpha_bar(t)

    return Schedule(
        T,
        s=lambda t: 1.0,
        s_prime=lambda t: 0.0,
        sigma=sigma,
        sigma_prime=sigma_prime,
        dsigma2_dt=dsigma2,
        kind="vp-continuous",
        alpha_bar=alpha_bar,
        alpha_bar_table=table,
    )


def make_ddpm_schedule(beta_min: float = 1e-4, beta_max: float = 0.02,
                       T: float = 100.0) -> Schedule:
    """Step-index correspondence form: s = sqrt(abar), sigma = sqrt(1/abar - 1).

    Satisfies s^2 * (1 + sigma^2) = 1 at every t (variance preservation).
    """
    beta, alpha_bar, table = _vp_parts(beta_min, beta_max, T)

    def b_int(t):
        return beta_min * t + 0.5 * (beta_max - beta_min) / T * t * t

    def s(t):
        return math.exp(-0.5 * b_int(t))

    def s_prime(t):
        return -0.5 * beta(t) * s(t)

    def sigma(t):
        # sigma^2 = 1/abar - 1 = expm1(B)
        return math.sqrt(math.expm1(b_int(t)))

    def dsigma2(t):
        return beta(t) * math.exp(b_int(t))

    def sigma_prime(t):
        sig = sigma(t)
        if sig == 0.0:
            return math.inf
        return dsigma2(t) / (2.0 * sig)

    return Schedule(
        T,
        s=s,
        s_prime=s_prime,
        sigma=sigma,
        sigma_prime=sigma_prime,
        dsigma2_dt=dsigma2,
        kind="vp-ddpm",
        alpha_bar=alpha_bar,
        alpha_bar_table=table,
    )


def sde_coefficients(sched: Schedule, eta: float, basis_sum: Field,
                     t: float) -> SdeCoefficients:
    """Forward-SDE coefficients at time t.

    f = s'/s, g = (s/(eta+1)) * sqrt(d sigma^2/dt), and the drift offset
    phi = (eta * s * sigma' / (eta+1)) * sum_m h_m.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if t <= 0:
        raise EndpointError("SDE coefficients are undefined at t <= 0 "
                            "(sigma' diverges at the left endpoint)")
    s, s_p, _, sig_p = sched.evaluate(t)
    f = s_p / s
    g = (s / (eta + 1.0)) * math.sqrt(sched.dsigma2_dt(t))
    phi = (eta * s * sig_p / (eta + 1.0)) * basis_sum
    return SdeCoefficients(f=f, g=g, phi=phi)
