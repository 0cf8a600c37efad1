"""Tumor growth under angiogenic control, with bolus drug kinetics.

The state of a tumor is ``X = (x, theta)``: its size and its angiogenic
capacity, both in mm^3. Without treatment the velocity field is

    dx/dt     = a x ln(theta / x)
    dtheta/dt = c x - d theta x^(2/3)

A cytotoxic drug (CT) removes ``h gamma_C(t) H(x - x_min)`` from ``dx/dt`` and
an anti-angiogenic drug (AA) removes ``e gamma_A(t) H(theta - theta_min)``
from ``dtheta/dt``. ``H`` is a tanh-smoothed step and ``gamma`` is a
one-compartment concentration fed by instantaneous boli.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

CELLS_PER_MM3 = 1.0e6
"""Display conversion between tumor volume and cell count."""

DEFAULT_HEAVISIDE_SLOPE = 1.0e-3

_EFFECTS = ("absolute", "proportional")


@dataclass(frozen=True)
class GrowthParams:
    """Growth, angiogenesis and colonization constants (volumes in mm^3)."""

    a: float
    c: float
    d: float
    m: float
    alpha: float
    x0: float
    theta0: float
    delta_theta: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.c > 0 and self.d > 0):
            raise ValueError("a, c and d must be positive")
        if self.m < 0:
            raise ValueError("m must be non-negative")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        b = carrying_capacity(self)
        if not 0 < self.x0 < b:
            raise ValueError(f"x0={self.x0} must lie in (0, b={b:.6g})")
        if not 0 < self.theta0 < b:
            raise ValueError(f"theta0={self.theta0} must lie in (0, b={b:.6g})")
        if self.delta_theta < 0:
            raise ValueError("delta_theta must be non-negative")

    @property
    def b(self) -> float:
        return carrying_capacity(self)


@dataclass(frozen=True)
class DrugSchedule:
    """One drug: PD efficacy, PK clearance, bolus dose and administration times.

    ``action_threshold=None`` lets the growth field pick its default
    (``x0`` for a cytotoxic drug, the domain floor for an anti-angiogenic one).
    """

    efficacy: float
    clearance: float
    dose: float
    admin_times: tuple = ()
    action_threshold: Optional[float] = None
    heaviside_slope: float = DEFAULT_HEAVISIDE_SLOPE

    def __post_init__(self):
        times = tuple(float(t) for t in self.admin_times)
        object.__setattr__(self, "admin_times", times)
        if self.efficacy < 0:
            raise ValueError("efficacy must be non-negative")
        if self.clearance <= 0:
            raise ValueError("clearance must be positive")
        if self.dose < 0:
            raise ValueError("dose must be non-negative")
        if self.heaviside_slope <= 0:
            raise ValueError("heaviside_slope must be positive")
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("admin_times must be strictly increasing")

    @property
    def efficacy_ratio(self) -> float:
        """``efficacy / clearance``, the quantity that ranks AA drugs."""
        return self.efficacy / self.clearance


@dataclass(frozen=True)
class Therapy:
    """Optional AA and CT schedules.

    ``effect="absolute"`` subtracts ``efficacy * gamma * H`` from the rates.
    ``effect="proportional"`` multiplies the kill term by the state variable it
    acts on (``theta`` for AA, ``x`` for CT), i.e. a log-kill form.
    """

    aa: Optional[DrugSchedule] = None
    ct: Optional[DrugSchedule] = None
    effect: str = "absolute"

    def __post_init__(self):
        if self.effect not in _EFFECTS:
            raise ValueError(f"effect must be one of {_EFFECTS}, got {self.effect!r}")

    @property
    def is_empty(self) -> bool:
        return _inactive(self.aa) and _inactive(self.ct)


NO_THERAPY = Therapy()


def _inactive(s: Optional[DrugSchedule]) -> bool:
    return s is None or s.efficacy == 0 or s.dose == 0 or not s.admin_times


def every(period: float, start: float, stop: float) -> tuple:
    """Administration times ``start, start+period, ...`` up to ``stop`` inclusive."""
    if period <= 0:
        raise ValueError("period must be positive")
    n = int(np.floor((stop - start) / period + 1e-9))
    return tuple(float(start + i * period) for i in range(n + 1))


# Drugs from Hahnfeldt et al., given from day 5 to 10.
def endostatin(dose=20.0, times=None) -> DrugSchedule:
    return DrugSchedule(0.66, 1.7, dose, every(1, 5, 10) if times is None else times)


def tnp470(dose=30.0, times=None) -> DrugSchedule:
    return DrugSchedule(1.3, 10.1, dose, every(2, 5, 10) if times is None else times)


def angiostatin(dose=20.0, times=None) -> DrugSchedule:
    return DrugSchedule(0.15, 0.38, dose, every(1, 5, 10) if times is None else times)


def concentration(s: Optional[DrugSchedule], t):
    """Plasma concentration of a bolus-dosed drug at time(s) ``t``.

    Each administration ``t_i <= t`` contributes ``dose * exp(-clearance (t - t_i))``.
    Onset is a sharp step, so the result is right-continuous at each ``t_i``.
    """
    t = np.asarray(t, dtype=float)
    if s is None or not s.admin_times:
        return np.zeros_like(t)[()]
    ti = np.asarray(s.admin_times)
    lag = t[..., None] - ti
    on = lag >= 0
    terms = np.where(on, s.dose * np.exp(-s.clearance * np.where(on, lag, 0.0)), 0.0)
    return terms.sum(axis=-1)[()]


def smooth_heaviside(s, K):
    """``1/2 + 1/2 tanh(s / K)``."""
    if K <= 0:
        raise ValueError("K must be positive")
    return 0.5 + 0.5 * np.tanh(np.asarray(s, dtype=float) / K)


def smooth_heaviside_derivative(s, K):
    """``1/(2K) sech^2(s / K)``."""
    if K <= 0:
        raise ValueError("K must be positive")
    # sech z = 2 e^{-|z|} / (1 + e^{-2|z|}) avoids cosh overflow
    e = np.exp(-2 * np.abs(np.asarray(s, dtype=float) / K))
    return (2 / K) * e / (1 + e) ** 2


def carrying_capacity(p: GrowthParams) -> float:
    """``b = (c/d)^(3/2)``, the common fixed point of size and capacity."""
    return (p.c / p.d) ** 1.5


# Hahnfeldt et al. growth constants, alpha = 2/3 and m = 1e-3.
TABLE1 = GrowthParams(a=0.192, c=5.85, d=8.73e-3, m=1e-3, alpha=2.0 / 3.0,
                      x0=1e-6, theta0=625.0)


def colonization_rate(x, p: GrowthParams):
    """Emission rate ``beta(x) = m x^alpha`` of a tumor of size ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("colonization_rate needs x > 0")
    return (p.m * x ** p.alpha)[()]


def _check_state(x, theta):
    if np.any(x <= 0) or np.any(theta <= 0):
        raise ValueError("growth field is undefined for x <= 0 or theta <= 0")


def _drug_terms(t, s: Optional[DrugSchedule], default_threshold):
    """(efficacy * gamma(t), threshold, slope) for one drug, or None."""
    if _inactive(s):
        return None
    thr = default_threshold if s.action_threshold is None else s.action_threshold
    return s.efficacy * concentration(s, t), thr, s.heaviside_slope


def growth_field(t, x, theta, p: GrowthParams, th: Therapy = NO_THERAPY, theta_low=None):
    """Velocity ``(g1, g2)`` of a tumor at ``(x, theta)`` and time ``t``.

    ``theta_low`` is the default AA action threshold (domain floor); it falls
    back to ``p.x0``.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    _check_state(x, theta)
    g1 = p.a * x * np.log(theta / x)
    g2 = p.c * x - p.d * theta * np.cbrt(x) ** 2
    ct = _drug_terms(t, th.ct, p.x0)
    if ct is not None:
        kill, thr, K = ct
        term = kill * smooth_heaviside(x - thr, K)
        g1 = g1 - (term * x if th.effect == "proportional" else term)
    aa = _drug_terms(t, th.aa, p.x0 if theta_low is None else theta_low)
    if aa is not None:
        kill, thr, K = aa
        term = kill * smooth_heaviside(theta - thr, K)
        g2 = g2 - (term * theta if th.effect == "proportional" else term)
    return g1[()], g2[()]


def divergence_field(t, x, theta, p: GrowthParams, th: Therapy = NO_THERAPY, theta_low=None):
    """Analytic ``d g1/dx + d g2/dtheta``."""
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    _check_state(x, theta)
    div = p.a * np.log(theta / x) - p.a - p.d * np.cbrt(x) ** 2
    ct = _drug_terms(t, th.ct, p.x0)
    if ct is not None:
        kill, thr, K = ct
        dH = smooth_heaviside_derivative(x - thr, K)
        if th.effect == "proportional":
            div = div - kill * (smooth_heaviside(x - thr, K) + x * dH)
        else:
            div = div - kill * dH
    aa = _drug_terms(t, th.aa, p.x0 if theta_low is None else theta_low)
    if aa is not None:
        kill, thr, K = aa
        dH = smooth_heaviside_derivative(theta - thr, K)
        if th.effect == "proportional":
            div = div - kill * (smooth_heaviside(theta - thr, K) + theta * dH)
        else:
            div = div - kill * dH
    return div[()]


@dataclass(frozen=True)
class TumorGrowthField:
    """Vectorized growth field acting on points of shape ``(..., 2)``."""

    params: GrowthParams
    therapy: Therapy = field(default=NO_THERAPY)
    theta_low: Optional[float] = None

    @property
    def autonomous(self) -> bool:
        return self.therapy.is_empty

    def __call__(self, t, X):
        X = np.asarray(X, dtype=float)
        g1, g2 = growth_field(t, X[..., 0], X[..., 1], self.params, self.therapy, self.theta_low)
        return np.stack(np.broadcast_arrays(g1, g2), axis=-1)

    def divergence(self, t, X):
        X = np.asarray(X, dtype=float)
        return divergence_field(t, X[..., 0], X[..., 1], self.params, self.therapy, self.theta_low)


def primary_trajectory_ode(params: GrowthParams, therapy: Therapy = NO_THERAPY,
                           theta_low=None):
    """Right-hand side ``f(t, y)`` for use with generic ODE solvers."""
    fld = TumorGrowthField(params, therapy, theta_low)

    def rhs(t, y):
        return fld(t, np.asarray(y))

    return rhs

