import numpy as np
import pytest

from angiometa import TABLE1, Discretization, Model, simulate
from angiometa.characteristics import Domain
from angiometa.transport import HAHNFELDT_PRIMARY_X0


class LinearField:
    """G(t, X) = A X + c, divergence trace(A)."""

    def __init__(self, A, c):
        self.A = np.asarray(A, dtype=float)
        self.c = np.asarray(c, dtype=float)

    def __call__(self, t, X):
        return np.asarray(X, dtype=float) @ self.A.T + self.c

    def divergence(self, t, X):
        X = np.asarray(X, dtype=float)
        return np.full(X.shape[:-1], np.trace(self.A))[()]


class PulsingField:
    """Smooth non-autonomous field with spatially varying divergence."""

    def __call__(self, t, X):
        X = np.asarray(X, dtype=float)
        x, th = X[..., 0], X[..., 1]
        g1 = (1.0 + 0.3 * np.sin(t)) * (1.0 + 0.05 * th) - 0.02 * x ** 2
        g2 = 0.1 * (5.0 - th) * (1.0 + 0.2 * np.cos(2 * t)) + 0.01 * x
        return np.stack([g1, g2], axis=-1)

    def divergence(self, t, X):
        X = np.asarray(X, dtype=float)
        return (-0.04 * X[..., 0] - 0.1 * (1.0 + 0.2 * np.cos(2 * t)))[()]


@pytest.fixture
def box():
    return Domain(1.0, 1.0, 10.0)


@pytest.fixture
def table1_domain():
    return Domain.from_params(TABLE1)


def const_rate(value):
    return lambda x: np.full(np.shape(x), float(value))[()]


def synthetic_model(field, domain, rate=0.0, theta0=5.0, delta_theta=2.0,
                    primary_source=True, profile="uniform"):
    return Model(field, domain, const_rate(rate) if np.isscalar(rate) else rate, theta0,
                 delta_theta, profile, None, primary_source)


@pytest.fixture(scope="session")
def table2_runs():
    """Dirac, trapezoid, dt=0.01 runs with the 200 mm^3 primary for the three m values."""
    from dataclasses import replace
    out = {}
    for m in (1e-4, 1e-3, 1e-2):
        model = Model.tumor(replace(TABLE1, m=m), primary_x0=HAHNFELDT_PRIMARY_X0)
        out[m] = simulate(model, Discretization(T=15, dt=0.01))
    return out
