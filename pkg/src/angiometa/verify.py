"""Executable checks for the scheme: a priori bounds, convergence order,
a small-time oracle for the metastatic index and linearity in ``m``."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .pkpd import NO_THERAPY, GrowthParams, Therapy, growth_field
from .transport import (
    DataMode,
    Discretization,
    Model,
    Quadrature,
    SolverState,
    simulate,
)


# ---------------------------------------------------------------------------
# a priori estimates

@dataclass
class EstimateReport:
    """Observed norms of ``rho1`` against their a priori bounds at every ``t_k``."""

    t: np.ndarray
    l1_rho1: np.ndarray
    l1_bound: np.ndarray
    linf_rho1: np.ndarray
    linf_bound: float
    mass_rho2: np.ndarray
    rho0_l1: float
    min_inflow: np.ndarray
    N_h: float
    f_h: float
    beta_sup: float
    nonnegative: bool

    @property
    def l1_ok(self) -> bool:
        return bool(np.all(self.l1_rho1 <= self.l1_bound))

    @property
    def linf_ok(self) -> bool:
        return bool(np.all(self.linf_rho1 <= self.linf_bound))

    @property
    def inflow_ok(self) -> bool:
        return bool(np.all(self.min_inflow > 0))

    @property
    def rho2_drift(self) -> float:
        if self.rho0_l1 == 0:
            return float(np.abs(self.mass_rho2).max(initial=0.0))
        return float(np.abs(self.mass_rho2 / self.rho0_l1 - 1).max())

    @property
    def passed(self) -> bool:
        return (self.l1_ok and self.linf_ok and self.inflow_ok and self.nonnegative
                and self.rho2_drift < 1e-12)

    def table(self, every=1) -> str:
        lines = [f"{'t':>8} {'L1(rho1)':>12} {'L1 bound':>12} {'Linf(rho1)':>12} "
                 f"{'Linf bound':>12} {'min G.nu':>10}"]
        for k in range(0, len(self.t), every):
            lines.append(f"{self.t[k]:8.3f} {self.l1_rho1[k]:12.5g} {self.l1_bound[k]:12.5g} "
                         f"{self.linf_rho1[k]:12.5g} {self.linf_bound:12.5g} {self.min_inflow[k]:10.4g}")
        flags = dict(l1=self.l1_ok, linf=self.linf_ok, inflow=self.inflow_ok,
                     nonnegative=self.nonnegative, rho2_drift=f"{self.rho2_drift:.2e}")
        lines.append("  ".join(f"{k}={v}" for k, v in flags.items()))
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def l1_bound(t, rho0_l1, f_h, beta_sup, N_h):
    """``exp(t |beta| |N|_h) (|rho0| + |f|_h / (|beta| |N|_h))``; ``rho0 + t f_h`` when ``beta = 0``."""
    t = np.asarray(t, dtype=float)
    a = beta_sup * N_h
    if a == 0:
        return rho0_l1 + t * f_h
    return np.exp(t * a) * (rho0_l1 + f_h / a)


def linf_bound(l1_values, rho0_l1, N_inf, beta_sup, f_inf):
    """``|N|_inf |beta|_inf max_k(|rho1(t_k)|_1 + |rho0|_1) + |f|_inf``."""
    return N_inf * beta_sup * float(np.max(np.asarray(l1_values) + rho0_l1)) + f_inf


def check_bounds(st: SolverState) -> EstimateReport:
    """Compare a completed run against the discrete a priori estimates.

    ``|rho1(t_k)|_1`` uses the rectangle sum over rows ``1..k``. ``|N|_h`` is
    ``max(1, sum_j N_j dsigma)`` and ``|f|_h`` the largest boundary mass of the
    primary source over the run.
    """
    log = st.log
    t = np.array(log["t"])
    beta_sup = st.model.beta_sup
    N_h = max(1.0, st.boundary_mass)
    f_h = float(np.max(log["f_l1"]))
    rho0_l1 = float(np.dot(st.cell_w, np.abs(st.rho2)))
    l1 = np.array(log["l1_rho1"])
    nonneg = bool(np.all(st.rho1[:st.k + 1] >= 0) and np.all(st.rho2 >= 0))
    return EstimateReport(
        t=t, l1_rho1=l1, l1_bound=l1_bound(t, rho0_l1, f_h, beta_sup, N_h),
        linf_rho1=np.array(log["linf_rho1"]),
        linf_bound=linf_bound(l1, rho0_l1, float(np.abs(st.N).max()), beta_sup,
                              float(np.max(log["f_linf"]))),
        mass_rho2=np.array(log["mass_rho2"]), rho0_l1=rho0_l1,
        min_inflow=np.array(log["min_inflow"]), N_h=N_h, f_h=f_h, beta_sup=beta_sup,
        nonnegative=nonneg)


# ---------------------------------------------------------------------------
# small-time oracle

def small_time_oracle(params: GrowthParams, therapy: Therapy = NO_THERAPY, T=1.5, dt=0.01,
                      primary_x0=None, theta_low=None):
    """``MI(t) ~ m int_0^t x_p(s)^alpha ds``, valid while metastases barely emit.

    The primary tumor is integrated with its own RK4 loop and the integral with
    a composite trapezoid rule, sharing nothing with the scheme but the field.
    Returns ``(t, MI)``.
    """
    n = int(round(T / dt))
    t = dt * np.arange(n + 1)
    y = np.array([params.x0 if primary_x0 is None else primary_x0, params.theta0])

    def rhs(s, z):
        return np.array(growth_field(s, z[0], z[1], params, therapy, theta_low))

    xs = np.empty(n + 1)
    xs[0] = y[0]
    for k in range(n):
        s = t[k]
        k1 = rhs(s, y)
        k2 = rhs(s + dt / 2, y + dt / 2 * k1)
        k3 = rhs(s + dt / 2, y + dt / 2 * k2)
        k4 = rhs(s + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        xs[k + 1] = y[0]
    integrand = params.m * xs ** params.alpha
    mi = np.concatenate([[0.0], np.cumsum(0.5 * dt * (integrand[1:] + integrand[:-1]))])
    return t, mi


# ---------------------------------------------------------------------------
# linearity in m

@dataclass
class LinearityTable:
    m: np.ndarray
    t: np.ndarray
    MI: np.ndarray

    @property
    def ratios(self):
        """``MI(t; m_{i+1}) / MI(t; m_i)``, one row per consecutive pair."""
        return self.MI[1:] / self.MI[:-1]

    def table(self) -> str:
        head = "m".rjust(10) + "".join(f"{'MI(%g)' % t:>14}" for t in self.t)
        rows = [head]
        for m, row in zip(self.m, self.MI):
            rows.append(f"{m:10.0e}" + "".join(f"{v:14.5g}" for v in row))
        for (m0, m1), row in zip(zip(self.m, self.m[1:]), self.ratios):
            rows.append(f"{'ratio':>10}" + "".join(f"{v:14.4f}" for v in row)
                        + f"   ({m1:.0e}/{m0:.0e})")
        return "\n".join(rows)


def linearity_in_m(params: GrowthParams, m_values: Sequence[float], t_values: Sequence[float],
                   disc: Discretization = None, **model_kw) -> LinearityTable:
    """Metastatic index at ``t_values`` for each colonization coefficient."""
    disc = Discretization(T=max(t_values)) if disc is None else disc
    out = np.empty((len(m_values), len(t_values)))
    for a, m in enumerate(m_values):
        model = Model.tumor(replace(params, m=m), **model_kw)
        ser = simulate(model, disc).series
        out[a] = [ser.MI[ser.at(t)] for t in t_values]
    return LinearityTable(np.asarray(m_values, dtype=float), np.asarray(t_values, dtype=float), out)


def self_converged_dt(model: Model, disc: Discretization, t_check, rtol=5e-3, max_halvings=6):
    """Halve ``dt`` until ``MI(t_check)`` changes by less than ``rtol``.

    Returns ``(disc, MI history)`` with the last discretization tried.
    """
    hist = []
    for _ in range(max_halvings + 1):
        ser = simulate(model, disc).series
        hist.append(float(ser.MI[ser.at(t_check)]))
        if len(hist) > 1 and abs(hist[-1] - hist[-2]) <= rtol * abs(hist[-1]):
            return disc, hist
        disc = replace(disc, dt=disc.dt / 2)
    return disc, hist


# ---------------------------------------------------------------------------
# convergence order

@dataclass
class ConvergenceReport:
    h: np.ndarray
    err_MI: np.ndarray
    err_rho1: np.ndarray
    MI: np.ndarray
    MI_ref: float
    label: str = ""

    @staticmethod
    def _orders(e):
        return np.log2(e[:-1] / e[1:])

    @property
    def orders_MI(self):
        return self._orders(self.err_MI)

    @property
    def orders_rho1(self):
        return self._orders(self.err_rho1)

    @staticmethod
    def _fit(h, e):
        return float(np.polyfit(np.log(h), np.log(e), 1)[0])

    @property
    def order_MI(self) -> float:
        """Least-squares slope of ``log e`` against ``log h``."""
        return self._fit(self.h, self.err_MI)

    @property
    def order_rho1(self) -> float:
        return self._fit(self.h, self.err_rho1)

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.err_MI) < 0) and np.all(np.diff(self.err_rho1) < 0))

    def table(self) -> str:
        lines = [f"{self.label}  reference MI(T) = {self.MI_ref!r}",
                 f"{'h/h0':>8} {'MI(T)':>14} {'|dMI|':>12} {'order':>7} {'|drho1|_1':>12} {'order':>7}"]
        oM = np.concatenate([[np.nan], self.orders_MI])
        oR = np.concatenate([[np.nan], self.orders_rho1])
        for r in range(len(self.h)):
            lines.append(f"{self.h[r] / self.h[0]:8.4f} {self.MI[r]:14.8g} {self.err_MI[r]:12.4e} "
                         f"{oM[r]:7.3f} {self.err_rho1[r]:12.4e} {oR[r]:7.3f}")
        lines.append(f"fitted order: MI {self.order_MI:.3f}, rho1 {self.order_rho1:.3f}"
                     + ("" if self.monotone else "  (non-monotone: pre-asymptotic)"))
        return "\n".join(lines)


def _restrict(fine: SolverState, coarse: SolverState, factor: int):
    """Reference ``rho1`` restricted to the coarse rows and boundary nodes.

    Point values are injected; cell averages are averaged over the coarse cell.
    """
    kc, M = coarse.k, len(coarse.sig_w)
    rho = fine.rho1[:fine.k + 1]
    if coarse.disc.data_mode is DataMode.POINT_VALUE:
        # nested nodes: coarse node (i, j) is fine node (i r, j r)
        return rho[::factor][:kc + 1, ::factor][:, :M]
    # rows i >= 1 stand for (t_{i-1}, t_i]; columns for sigma cells
    out = np.empty((kc + 1, M))
    out[0] = rho[0].reshape(M, factor).mean(axis=1)
    blocks = rho[1:].reshape(kc, factor, M, factor)
    out[1:] = blocks.mean(axis=(1, 3))
    return out


def convergence_study(model: Model, disc: Discretization, levels=4, ref_factor=32,
                      label="") -> ConvergenceReport:
    """Run at ``h, h/2, ..., h/2^(levels-1)`` and compare with ``h/ref_factor``.

    Errors are ``|MI_h(T) - MI_ref(T)|`` and the weighted L1 distance in
    ``(tau, sigma)`` between ``rho1(T)`` and the restricted reference.
    """
    ref = simulate(model, disc.refined(ref_factor)).state
    mi_ref = float(ref.log["MI"][-1])
    hs, eM, eR, mis = [], [], [], []
    for r in range(levels):
        f = 2 ** r
        st = simulate(model, disc.refined(f)).state
        R = _restrict(ref, st, ref_factor // f)
        w_tau = np.full(st.k + 1, st.disc.dt)
        diff = np.abs(st.rho1[:st.k + 1] - R)
        hs.append(disc.dt / f)
        mis.append(float(st.log["MI"][-1]))
        eM.append(abs(mis[-1] - mi_ref))
        eR.append(float(w_tau @ diff @ st.sig_w))
    return ConvergenceReport(np.array(hs), np.array(eM), np.array(eR), np.array(mis), mi_ref, label)


def smooth_convergence_setup(params: GrowthParams, quadrature=Quadrature.TRAPEZOID,
                             data_mode=DataMode.POINT_VALUE, *, T=4.0, dt=0.1,
                             delta_theta=50.0, dsigma=50.0):
    """No-therapy model with a smooth birth profile and its coarse discretization.

    With cell averages the rectangle variant is second order here: averaging
    ``beta`` at both ends of each tau-cell turns the primary source sum into a
    trapezoid rule. Point values expose the first-order behavior.
    """
    p = replace(params, delta_theta=delta_theta)
    model = Model.tumor(p, profile="cosine")
    disc = Discretization(T=T, dt=dt, dsigma=dsigma, quadrature=quadrature,
                          dirac_mode=False, data_mode=data_mode)
    return model, disc
