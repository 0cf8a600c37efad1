"""Characteristic curves of a growth field and the associated changes of variables.

A *field* here is any callable ``field(t, X)`` mapping points of shape
``(..., 2)`` to velocities of the same shape, with a ``field.divergence(t, X)``
method. :class:`angiometa.pkpd.TumorGrowthField` is the production field;
tests use small synthetic ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .pkpd import GrowthParams, carrying_capacity

INWARD_NORMAL_BIRTH_EDGE = np.array([1.0, 0.0])


class NumericalError(ArithmeticError):
    """A field evaluation or integration step produced non-finite values."""


class InflowError(ValueError):
    """The field does not point into the domain where it should."""


@dataclass(frozen=True)
class Domain:
    """The box ``[x_birth, b] x [theta_low, b]``."""

    x_birth: float
    theta_low: float
    b: float

    def __post_init__(self):
        if not 0 < self.x_birth < self.b:
            raise ValueError("need 0 < x_birth < b")
        if not 0 < self.theta_low < self.b:
            raise ValueError("need 0 < theta_low < b")

    @classmethod
    def from_params(cls, p: GrowthParams, theta_low=None) -> "Domain":
        return cls(p.x0, p.x0 if theta_low is None else theta_low, carrying_capacity(p))

    @property
    def eps_dom(self) -> float:
        return 1e-9 * self.b

    @property
    def eps_rt(self) -> float:
        return 1e-6 * self.b

    @property
    def lower(self):
        return np.array([self.x_birth, self.theta_low])

    @property
    def edge_scale(self):
        """Magnitude of each edge coordinate (x low, x high, theta low, theta high)."""
        return np.array([self.x_birth, self.b, self.theta_low, self.b])

    def gaps(self, X):
        """Signed distances to the four edges, last axis ordered as :attr:`edge_scale`."""
        X = np.asarray(X, dtype=float)
        return np.stack([X[..., 0] - self.x_birth, self.b - X[..., 0],
                         X[..., 1] - self.theta_low, self.b - X[..., 1]], axis=-1)

    def signed_distance(self, X):
        """Distance to the nearest edge; negative outside."""
        return self.gaps(X).min(axis=-1)

    def contains(self, X, rtol=1e-9):
        """Inside up to ``rtol`` times each edge's own magnitude.

        Relative tolerances matter because ``x_birth`` can be many orders of
        magnitude below ``b``.
        """
        return np.all(self.gaps(X) >= -rtol * self.edge_scale, axis=-1)

    def on_boundary(self, X, rtol=1e-9):
        g = self.gaps(X)
        near = np.abs(g) <= rtol * self.edge_scale
        return self.contains(X, rtol) & np.any(near, axis=-1)

    def clamp(self, X):
        """Project into the box. Returns ``(X_clamped, distance_moved)``."""
        X = np.asarray(X, dtype=float)
        Xc = np.empty_like(X)
        Xc[..., 0] = np.clip(X[..., 0], self.x_birth, self.b)
        Xc[..., 1] = np.clip(X[..., 1], self.theta_low, self.b)
        return Xc, np.linalg.norm(X - Xc, axis=-1)

    def project_to_boundary(self, X):
        """Nearest point of the boundary to ``X`` (``X`` near the box)."""
        Xc, _ = self.clamp(X)
        edge = int(np.argmin(self.gaps(Xc) / self.edge_scale))
        Xc = Xc.copy()
        Xc[edge // 2] = (self.x_birth, self.b, self.theta_low, self.b)[edge]
        return Xc


@dataclass(frozen=True)
class TimeGrid:
    T: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0 or self.T < 0:
            raise ValueError("need dt > 0 and T >= 0")
        ratio = self.T / self.dt
        if abs(ratio - round(ratio)) > 1e-8 * max(1.0, ratio):
            raise ValueError(f"T={self.T} is not an integer multiple of dt={self.dt}")

    @property
    def K(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def times(self):
        return self.dt * np.arange(self.K + 1)

    def index(self, t) -> int:
        k = t / self.dt
        if abs(k - round(k)) > 1e-8 * max(1.0, k):
            raise ValueError(f"t={t} is not on the time grid")
        return int(round(k))


def _evaluate(field, t, X):
    G = field(t, X)
    if not np.all(np.isfinite(G)):
        raise NumericalError(f"non-finite field value at t={t}")
    return G


def _rk4(field, t, X, h, domain=None):
    """Classical RK4 step of signed size ``h``; stage points are clamped into ``domain``."""
    proj = (lambda Y: Y) if domain is None else (lambda Y: domain.clamp(Y)[0])
    k1 = _evaluate(field, t, proj(X))
    k2 = _evaluate(field, t + h / 2, proj(X + h / 2 * k1))
    k3 = _evaluate(field, t + h / 2, proj(X + h / 2 * k2))
    k4 = _evaluate(field, t + h, proj(X + h * k3))
    return X + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_step(field, t, X, dt, domain: Domain = None):
    """One forward RK4 step.

    Returns ``(X_next, clamp_distance)``. With a domain, the result is clamped
    into it and ``clamp_distance`` is how far each point was moved (zero
    without a domain).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    X = np.asarray(X, dtype=float)
    Xn = _rk4(field, t, X, dt, domain)
    if domain is None:
        return Xn, np.zeros(Xn.shape[:-1])
    return domain.clamp(Xn)


def flow(field, t0, X, t1, max_step, domain: Domain = None):
    """``X(t1; t0, X)`` by RK4 with equal substeps no larger than ``max_step``.

    Works in both time directions. Intermediate points are not clamped, but
    stage evaluations are, so the field is never evaluated outside ``domain``.
    """
    X = np.asarray(X, dtype=float)
    if t1 == t0:
        return X.copy()
    n = max(1, math.ceil(abs(t1 - t0) / max_step - 1e-9))
    h = (t1 - t0) / n
    for s in range(n):
        X = _rk4(field, t0 + s * h, X, h, domain)
    return X


@dataclass
class CharacteristicPath:
    """Samples of ``X(t; tau, sigma)`` on the grid times ``t_k >= tau``."""

    tau: float
    sigma: np.ndarray
    times: np.ndarray
    samples: np.ndarray
    div_samples: np.ndarray
    max_clamp: float = 0.0


def integrate_path(field, tau, sigma, grid: TimeGrid, domain: Domain = None) -> CharacteristicPath:
    k0 = grid.index(tau)
    times = grid.times[k0:]
    X = np.array(sigma, dtype=float)
    samples = np.empty((len(times), 2))
    samples[0] = X
    max_clamp = 0.0
    for n, t in enumerate(times[:-1]):
        X, moved = rk4_step(field, t, X, grid.dt, domain)
        max_clamp = max(max_clamp, float(moved))
        samples[n + 1] = X
    div = np.array([field.divergence(t, Y) for t, Y in zip(times, samples)], dtype=float)
    return CharacteristicPath(float(tau), np.array(sigma, dtype=float), times, samples, div, max_clamp)


def _log_jacobian(path: CharacteristicPath):
    if len(path.times) == 1:
        return np.zeros(1)
    return cumulative_trapezoid(path.div_samples, path.times, initial=0.0)


def inflow(field, t, sigma, normal=INWARD_NORMAL_BIRTH_EDGE):
    """``G(t, sigma) . nu`` with ``nu`` the *inward* unit normal."""
    return float(np.dot(field(t, np.asarray(sigma, dtype=float)), normal))


def jacobian_J1(path: CharacteristicPath, normal, field):
    """``|G(tau, sigma) . nu| exp(int_tau^t div G)`` at every sample of ``path``.

    ``normal`` is the inward normal at ``sigma``; a non-positive inflow
    violates the inward-field hypothesis and raises :class:`InflowError`.
    """
    g_nu = inflow(field, path.tau, path.sigma, normal)
    if not g_nu > 0:
        raise InflowError(f"G.nu = {g_nu:.3g} <= 0 at tau={path.tau}, sigma={path.sigma}")
    return g_nu * np.exp(_log_jacobian(path))


def jacobian_J2(path: CharacteristicPath):
    if path.tau != 0:
        raise ValueError("J2 is defined along paths starting at t = 0")
    return np.exp(_log_jacobian(path))


@dataclass(frozen=True)
class Entrance:
    """Backward characteristic through ``(t, X)`` enters the domain at ``(tau, sigma)``."""

    tau: float
    sigma: np.ndarray


@dataclass(frozen=True)
class Interior:
    """Backward characteristic stays inside down to ``t = 0``, where it sits at ``y``."""

    y: np.ndarray


def entrance_map(field, t, X, dt, domain: Domain, tol=None) -> Union[Entrance, Interior]:
    """Invert the flow: where and when did the characteristic through ``(t, X)`` enter?

    Integrates backward with steps ``dt``. When a step leaves the domain, the
    crossing is bracketed and bisected in time down to ``tol`` (default
    ``1e-3 dt``), and the crossing point is projected onto the boundary.
    """
    X = np.array(X, dtype=float)
    if not domain.contains(X):
        raise ValueError(f"{X} is outside the domain")
    tol = 1e-3 * dt if tol is None else tol
    if domain.on_boundary(X):
        return Entrance(float(t), domain.project_to_boundary(X))
    s, Y = float(t), X
    while s > 1e-12 * max(1.0, t):
        h = min(dt, s)
        Yn = _rk4(field, s, Y, -h, domain)
        if domain.contains(Yn, 0.0):
            Y, s = Yn, s - h
            continue
        lo, hi = 0.0, h
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if domain.contains(_rk4(field, s, Y, -mid, domain), 0.0):
                lo = mid
            else:
                hi = mid
        hstar = 0.5 * (lo + hi)
        crossing = _rk4(field, s, Y, -hstar, domain)
        return Entrance(s - hstar, domain.project_to_boundary(crossing))
    if domain.on_boundary(Y, rtol=1e-6):
        # born at t = 0 on the boundary
        return Entrance(0.0, domain.project_to_boundary(Y))
    return Interior(Y)
