"""Lagrangian scheme for the density of metastases.

The density is split into two pieces that are constant along characteristics:

* ``rho1[i, j]``: metastases born at time ``tau_i`` at boundary node ``sigma_j``
  (a density against ``dtau dsigma``). One new row is created per time step
  from the nonlocal boundary condition ``rho1 = N_j B + f_j``.
* ``rho2[p]``: the initial population, one value per cell of ``Omega``
  (a density against ``dY``). It never changes.

Every stored value is attached to a characteristic whose position is advanced
by one RK4 step per time step, so the emission integral ``B`` and the
observables only need the current positions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import partial
from typing import Callable, Optional

import numpy as np

from .characteristics import (
    INWARD_NORMAL_BIRTH_EDGE,
    Domain,
    Entrance,
    TimeGrid,
    entrance_map,
    rk4_step,
)
from .pkpd import NO_THERAPY, GrowthParams, Therapy, TumorGrowthField, colonization_rate

VISIBLE_THRESHOLD_MM3 = 100.0

# Hahnfeldt et al. report their tumors at 200 mm^3 when followed; used for the
# primary tumor in the metastatic-index table.
HAHNFELDT_PRIMARY_X0 = 200.0


class Quadrature(str, Enum):
    RECTANGLE = "rectangle"
    TRAPEZOID = "trapezoid"


class DataMode(str, Enum):
    CELL_AVERAGE = "average"
    POINT_VALUE = "point"


@dataclass(frozen=True)
class Discretization:
    """Grid steps and scheme variant.

    ``dsigma`` is only used off Dirac mode, ``dx`` only with an initial density.
    Trapezoid weights need point values, so ``TRAPEZOID`` with ``CELL_AVERAGE``
    is rejected.
    """

    T: float = 15.0
    dt: float = 0.01
    dsigma: float = 1.0
    dx: float = 100.0
    quadrature: Quadrature = Quadrature.TRAPEZOID
    dirac_mode: bool = True
    data_mode: DataMode = DataMode.POINT_VALUE

    def __post_init__(self):
        object.__setattr__(self, "quadrature", Quadrature(self.quadrature))
        object.__setattr__(self, "data_mode", DataMode(self.data_mode))
        TimeGrid(self.T, self.dt)
        if self.dsigma <= 0 or self.dx <= 0:
            raise ValueError("dsigma and dx must be positive")
        if self.quadrature is Quadrature.TRAPEZOID and self.data_mode is DataMode.CELL_AVERAGE:
            raise ValueError("trapezoid quadrature needs point-value data")

    @property
    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.dt)

    @property
    def K(self) -> int:
        return self.time_grid.K

    def refined(self, factor: int) -> "Discretization":
        """All three steps divided by ``factor``."""
        return replace(self, dt=self.dt / factor, dsigma=self.dsigma / factor,
                       dx=self.dx / factor)


# ---------------------------------------------------------------------------
# birth repartition N on the segment {x = x_birth, |theta - theta0| <= dtheta}

def birth_density(theta, theta0, dtheta, shape="uniform"):
    u = (np.asarray(theta, dtype=float) - theta0) / dtheta
    inside = np.abs(u) <= 1
    if shape == "uniform":
        val = np.full_like(u, 0.5 / dtheta)
    elif shape == "tent":
        val = (1 - np.abs(u)) / dtheta
    elif shape == "cosine":
        val = np.cos(0.5 * np.pi * u) ** 2 / dtheta
    else:
        raise ValueError(f"unknown birth profile {shape!r}")
    return np.where(inside, val, 0.0)


def birth_cdf(theta, theta0, dtheta, shape="uniform"):
    u = np.clip((np.asarray(theta, dtype=float) - theta0) / dtheta, -1, 1)
    if shape == "uniform":
        return 0.5 * (u + 1)
    if shape == "tent":
        return np.where(u < 0, 0.5 * (1 + u) ** 2, 1 - 0.5 * (1 - u) ** 2)
    if shape == "cosine":
        return np.clip(0.5 * (u + 1 + np.sin(np.pi * u) / np.pi), 0.0, 1.0)
    raise ValueError(f"unknown birth profile {shape!r}")


@dataclass(frozen=True)
class Model:
    """Everything the scheme needs besides the grid.

    ``colonization`` maps sizes to emission rates and is assumed non-decreasing,
    so its supremum over the domain is its value at ``b``.
    """

    field: object
    domain: Domain
    colonization: Callable
    theta0: float
    delta_theta: float = 0.0
    profile: str = "uniform"
    primary_start: Optional[tuple] = None
    primary_source: bool = True

    @classmethod
    def tumor(cls, params: GrowthParams, therapy: Therapy = NO_THERAPY, *,
              primary_x0=None, primary_theta0=None, theta_low=None,
              profile="uniform") -> "Model":
        domain = Domain.from_params(params, theta_low)
        start = (params.x0 if primary_x0 is None else primary_x0,
                 params.theta0 if primary_theta0 is None else primary_theta0)
        return cls(TumorGrowthField(params, therapy, domain.theta_low), domain,
                   partial(colonization_rate, p=params), params.theta0,
                   params.delta_theta, profile, start)

    @property
    def emission_point(self):
        return np.array([self.domain.x_birth, self.theta0])

    @property
    def primary_initial(self):
        if self.primary_start is None:
            return self.emission_point
        return np.array(self.primary_start, dtype=float)

    @property
    def beta_sup(self) -> float:
        return float(self.colonization(np.array(self.domain.b)))


def _grid_1d(lo, hi, step, quadrature, data_mode):
    """Nodes, quadrature weights and cell edges of ``[lo, hi]``; last cell may be short."""
    n = max(1, math.ceil((hi - lo) / step - 1e-9))
    edges = lo + step * np.arange(n + 1)
    edges[-1] = hi
    widths = np.diff(edges)
    if quadrature is Quadrature.TRAPEZOID:
        w = np.zeros(n + 1)
        w[:-1] += widths / 2
        w[1:] += widths / 2
        return edges.copy(), w, edges
    if data_mode is DataMode.CELL_AVERAGE:
        return 0.5 * (edges[:-1] + edges[1:]), widths, edges
    return edges[:-1].copy(), widths, edges


_GAUSS3 = np.polynomial.legendre.leggauss(3)


def _cell_averages(rho0, xe, te):
    """Cell averages of ``rho0`` over the tensor grid with edges ``xe``, ``te``."""
    g, gw = _GAUSS3
    xm, xh = 0.5 * (xe[1:] + xe[:-1]), 0.5 * np.diff(xe)
    tm, th = 0.5 * (te[1:] + te[:-1]), 0.5 * np.diff(te)
    total = 0.0
    for gi, wi in zip(g, gw):
        for gj, wj in zip(g, gw):
            Xq, Tq = np.meshgrid(xm + gi * xh, tm + gj * th, indexing="ij")
            total = total + 0.25 * wi * wj * np.asarray(rho0(Xq, Tq), dtype=float)
    return total


@dataclass
class SimulationSeries:
    """Per-step observables. ``B`` and ``F`` are the emission integrals and the
    boundary-integrated primary source used to build each new boundary row."""

    t: np.ndarray
    x_p: np.ndarray
    theta_p: np.ndarray
    MI: np.ndarray
    visible: np.ndarray
    emitted_primary: np.ndarray
    emitted_meta: np.ndarray
    mass_rho1: np.ndarray
    mass_rho2: np.ndarray
    B: np.ndarray
    F: np.ndarray
    dt: float
    quadrature: Quadrature
    boundary_mass: float

    COLUMNS = ("t", "x_p", "theta_p", "MI", "visible", "emitted_primary",
               "emitted_meta", "mass_rho1", "mass_rho2")

    def at(self, t) -> int:
        """Index of grid time ``t``."""
        return TimeGrid(self.t[-1], self.dt).index(t)

    def rows(self):
        cols = [getattr(self, c) for c in self.COLUMNS]
        return zip(*cols)


@dataclass
class SolverState:
    model: Model
    disc: Discretization
    k: int
    sig_nodes: np.ndarray
    sig_w: np.ndarray
    N: np.ndarray
    rho1: np.ndarray
    pos1: np.ndarray
    flux1: np.ndarray
    logJ1: np.ndarray
    div1: np.ndarray
    div1_prev: np.ndarray
    d2_1: np.ndarray
    cell_index: np.ndarray
    cell_w: np.ndarray
    rho2: np.ndarray
    pos2: np.ndarray
    logJ2: np.ndarray
    div2: np.ndarray
    div2_prev: np.ndarray
    d2_2: np.ndarray
    x_p: np.ndarray
    primary: np.ndarray
    B: np.ndarray
    phi: np.ndarray
    grid_info: dict
    visible_threshold: float = VISIBLE_THRESHOLD_MM3
    beta1: Optional[np.ndarray] = None
    beta2: Optional[np.ndarray] = None
    clamp_events: int = 0
    max_clamp: float = 0.0
    log: dict = field(default_factory=dict)

    @property
    def t(self) -> float:
        return self.k * self.disc.dt

    @property
    def boundary_mass(self) -> float:
        """``sum_j N_j dsigma`` (exactly 1 in Dirac mode)."""
        return float(np.dot(self.sig_w, self.N))

    @property
    def rho2_mass(self) -> float:
        return float(np.dot(self.cell_w, self.rho2))

    @property
    def primary_position(self):
        return self.primary[self.k]


def _mass_weights(k, dt, quadrature):
    """Weights in tau over rows ``0..k`` for integrals over ``[0, t_k]``."""
    w = np.full(k + 1, dt)
    if quadrature is Quadrature.RECTANGLE:
        w[0] = 0.0
    elif k == 0:
        w[0] = 0.0
    else:
        w[0] = w[-1] = dt / 2
    return w


def _emission_weights(k, dt, quadrature):
    """Weights over rows ``0..k`` for the emission integral over ``[0, t_{k+1}]``.

    Rectangle: the sum over rows ``1..k``. Trapezoid: composite trapezoid on
    ``[0, t_k]`` plus a left rectangle on ``[t_k, t_{k+1}]``.
    """
    w = np.full(k + 1, dt)
    if quadrature is Quadrature.RECTANGLE:
        w[0] = 0.0
    elif k > 0:
        w[0] = dt / 2
        w[-1] = 1.5 * dt
    return w


def _beta(model, X):
    return np.asarray(model.colonization(X[..., 0]), dtype=float)


def init_state(model: Model, disc: Discretization, rho0=None, *,
               enforce_nonnegative=True,
               visible_threshold=VISIBLE_THRESHOLD_MM3) -> SolverState:
    """Grid, boundary data, initial cells and the first boundary row.

    ``rho0`` is ``None`` (no initial metastases) or a vectorized ``rho0(x, theta)``.
    Cells where the initial value is exactly zero carry no mass and are dropped.
    """
    dom, fld = model.domain, model.field
    K = disc.K
    info = {}
    if disc.dirac_mode:
        sig_nodes = model.emission_point[None, :]
        sig_w = np.ones(1)
        N = np.ones(1)
    else:
        if model.delta_theta <= 0:
            raise ValueError("non-Dirac mode needs delta_theta > 0")
        lo, hi = model.theta0 - model.delta_theta, model.theta0 + model.delta_theta
        if lo <= dom.theta_low or hi >= dom.b:
            raise ValueError("birth segment must lie strictly inside the theta range")
        th, sig_w, edges = _grid_1d(lo, hi, disc.dsigma, disc.quadrature, disc.data_mode)
        if disc.data_mode is DataMode.CELL_AVERAGE:
            N = np.diff(birth_cdf(edges, model.theta0, model.delta_theta, model.profile)) / np.diff(edges)
        else:
            N = birth_density(th, model.theta0, model.delta_theta, model.profile)
        sig_nodes = np.column_stack([np.full_like(th, dom.x_birth), th])
        info["sigma_edges"] = edges
    M = len(sig_w)

    if rho0 is None:
        cell_index = np.zeros((0, 2), dtype=int)
        cell_w = np.zeros(0)
        rho2 = np.zeros(0)
        nodes = np.zeros((0, 2))
    else:
        xn, xw, xe = _grid_1d(dom.x_birth, dom.b, disc.dx, disc.quadrature, disc.data_mode)
        tn, tw, te = _grid_1d(dom.theta_low, dom.b, disc.dx, disc.quadrature, disc.data_mode)
        info["x_edges"], info["theta_edges"] = xe, te
        info["x_nodes"], info["theta_nodes"] = xn, tn
        if disc.data_mode is DataMode.CELL_AVERAGE:
            values = _cell_averages(rho0, xe, te)
        else:
            Xg, Tg = np.meshgrid(xn, tn, indexing="ij")
            values = np.asarray(rho0(Xg, Tg), dtype=float) * np.ones_like(Xg)
        if enforce_nonnegative and np.any(values < 0):
            raise ValueError("initial density must be non-negative")
        l, m = np.nonzero(values)
        cell_index = np.column_stack([l, m])
        cell_w = xw[l] * tw[m]
        rho2 = values[l, m]
        nodes = np.column_stack([xn[l], tn[m]])

    pos1 = np.zeros((K + 1, M, 2))
    pos1[0] = sig_nodes
    flux1 = np.zeros((K + 1, M))
    flux1[0] = fld(0.0, sig_nodes) @ INWARD_NORMAL_BIRTH_EDGE
    div1 = np.zeros((K + 1, M))
    div1[0] = fld.divergence(0.0, sig_nodes)
    div2 = np.asarray(fld.divergence(0.0, nodes), dtype=float) if len(nodes) else np.zeros(0)

    primary = np.zeros((K + 1, 2))
    primary[0] = model.primary_initial
    st = SolverState(
        model=model, disc=disc, k=0, sig_nodes=sig_nodes, sig_w=sig_w, N=N,
        rho1=np.zeros((K + 1, M)), pos1=pos1, flux1=flux1, logJ1=np.zeros((K + 1, M)),
        div1=div1, div1_prev=div1.copy(), d2_1=np.zeros((K + 1, M)),
        cell_index=cell_index, cell_w=cell_w, rho2=rho2, pos2=nodes.copy(),
        logJ2=np.zeros(len(rho2)), div2=div2, div2_prev=div2.copy(), d2_2=np.zeros(len(rho2)),
        x_p=primary[0].copy(), primary=primary, B=np.zeros(K + 1), phi=np.zeros(K + 1),
        grid_info=info, visible_threshold=visible_threshold,
    )
    st.beta1 = _beta(model, pos1[:1])
    st.beta2 = _beta(model, st.pos2) if len(rho2) else np.zeros(0)
    st.B[0] = float(np.dot(st.cell_w, st.beta2 * st.rho2))
    st.phi[0] = _primary_rate(st, 0)
    st.rho1[0] = N * (st.B[0] + st.phi[0])
    st.log = {key: [] for key in _LOG_KEYS}
    _record(st)
    return st


def _primary_rate(st: SolverState, k):
    """Primary emission per unit of ``N`` used for row ``k`` (``f_j^k = N_j phi_k``)."""
    if not st.model.primary_source:
        return 0.0
    bk = float(_beta(st.model, st.primary[k]))
    if k > 0 and st.disc.data_mode is DataMode.CELL_AVERAGE:
        return 0.5 * (bk + float(_beta(st.model, st.primary[k - 1])))
    return bk


def boundary_emission(st: SolverState):
    """Emission integral ``B`` at the current time and the new boundary row.

    Uses rows ``0..k-1`` (already transported to ``t_k``) and the cells.
    Returns ``(B, row)`` without modifying the state.
    """
    k, dt = st.k, st.disc.dt
    rows = st.beta1[:k]
    if st.disc.data_mode is DataMode.CELL_AVERAGE and k > 1:
        # tau-cell average from the characteristics through both cell ends
        rows = rows.copy()
        rows[1:] = 0.5 * (st.beta1[:k - 1] + st.beta1[1:k])
    w = _emission_weights(k - 1, dt, st.disc.quadrature)
    B = float(w @ ((rows * st.rho1[:k]) @ st.sig_w))
    if len(st.rho2):
        B += float(np.dot(st.cell_w, st.beta2 * st.rho2))
    return B, st.N * (B + st.phi[k])


def advance(st: SolverState) -> SolverState:
    """One time step: transport every characteristic, then emit a new boundary row."""
    k, dt, K = st.k, st.disc.dt, st.disc.K
    if k >= K:
        raise ValueError("already at the final time")
    model, dom, fld = st.model, st.model.domain, st.model.field
    M, P = len(st.sig_w), len(st.rho2)
    t0, t1 = k * dt, (k + 1) * dt

    n1 = (k + 1) * M
    X = np.concatenate([st.pos1[:k + 1].reshape(-1, 2), st.pos2, st.x_p[None, :]])
    Xn, moved = rk4_step(fld, t0, X, dt, dom)
    big = moved > dom.eps_dom
    if np.any(big):
        st.clamp_events += int(big.sum())
        st.max_clamp = max(st.max_clamp, float(moved.max()))
    st.pos1[:k + 1] = Xn[:n1].reshape(k + 1, M, 2)
    st.pos2 = Xn[n1:n1 + P]
    st.x_p = Xn[-1]

    div_new = np.asarray(fld.divergence(t1, Xn[:n1 + P]), dtype=float)
    d1 = div_new[:n1].reshape(k + 1, M)
    st.logJ1[:k + 1] += 0.5 * dt * (st.div1[:k + 1] + d1)
    if k > 0:
        d2 = np.abs(d1[:k] - 2 * st.div1[:k] + st.div1_prev[:k])
        np.maximum(st.d2_1[:k], d2, out=st.d2_1[:k])
    st.div1_prev[:k + 1] = st.div1[:k + 1]
    st.div1[:k + 1] = d1
    if P:
        d2new = div_new[n1:]
        st.logJ2 += 0.5 * dt * (st.div2 + d2new)
        if k > 0:
            np.maximum(st.d2_2, np.abs(d2new - 2 * st.div2 + st.div2_prev), out=st.d2_2)
        st.div2_prev, st.div2 = st.div2, d2new

    st.k = k = k + 1
    st.primary[k] = st.x_p
    st.pos1[k] = st.sig_nodes
    st.flux1[k] = fld(t1, st.sig_nodes) @ INWARD_NORMAL_BIRTH_EDGE
    st.div1[k] = st.div1_prev[k] = fld.divergence(t1, st.sig_nodes)

    st.beta1 = _beta(model, st.pos1[:k + 1])
    if P:
        st.beta2 = _beta(model, st.pos2)
    st.phi[k] = _primary_rate(st, k)
    st.B[k], st.rho1[k] = boundary_emission(st)
    _record(st)
    return st


_LOG_KEYS = ("t", "x_p", "theta_p", "MI", "visible", "mass_rho1", "mass_rho2",
             "l1_rho1", "linf_rho1", "f_l1", "f_linf", "min_inflow")


def mass_rho1(st: SolverState) -> float:
    w = _mass_weights(st.k, st.disc.dt, st.disc.quadrature)
    return float(w @ (st.rho1[:st.k + 1] @ st.sig_w))


def metastatic_index(st: SolverState) -> float:
    """Total number of metastases: boundary-born mass plus initial mass."""
    return mass_rho1(st) + st.rho2_mass


def visible_count(st: SolverState, threshold=None) -> float:
    """Number of metastases whose current size is at least ``threshold``."""
    thr = st.visible_threshold if threshold is None else threshold
    if thr >= st.model.domain.b:
        return 0.0  # no tumor exceeds the carrying capacity
    k = st.k
    w = _mass_weights(k, st.disc.dt, st.disc.quadrature)
    big1 = st.pos1[:k + 1, :, 0] >= thr
    total = float(w @ ((st.rho1[:k + 1] * big1) @ st.sig_w))
    if len(st.rho2):
        total += float(np.dot(st.cell_w, st.rho2 * (st.pos2[:, 0] >= thr)))
    return total


def _record(st: SolverState):
    k, log = st.k, st.log
    m1 = mass_rho1(st)
    log["t"].append(st.t)
    log["x_p"].append(float(st.x_p[0]))
    log["theta_p"].append(float(st.x_p[1]))
    log["mass_rho1"].append(m1)
    log["mass_rho2"].append(st.rho2_mass)
    log["MI"].append(m1 + st.rho2_mass)
    log["visible"].append(visible_count(st))
    # norms as used by the a priori estimates
    scale = st.disc.dt * st.sig_w
    log["l1_rho1"].append(float(np.abs(st.rho1[1:k + 1]).sum(axis=0) @ scale))
    prev = log["linf_rho1"][-1] if log["linf_rho1"] else 0.0
    row = float(np.abs(st.rho1[k]).max())
    log["linf_rho1"].append(max(prev, row))
    log["f_l1"].append(abs(st.phi[k]) * float(st.sig_w @ st.N))
    log["f_linf"].append(abs(st.phi[k]) * float(np.abs(st.N).max()))
    log["min_inflow"].append(float(st.flux1[k].min()))


def series(st: SolverState) -> SimulationSeries:
    log = st.log
    k = st.k
    B, F = st.B[:k + 1].copy(), st.phi[:k + 1] * st.boundary_mass
    ser = SimulationSeries(
        t=np.array(log["t"]), x_p=np.array(log["x_p"]), theta_p=np.array(log["theta_p"]),
        MI=np.array(log["MI"]), visible=np.array(log["visible"]),
        emitted_primary=np.zeros(k + 1), emitted_meta=np.zeros(k + 1),
        mass_rho1=np.array(log["mass_rho1"]), mass_rho2=np.array(log["mass_rho2"]),
        B=B, F=F, dt=st.disc.dt, quadrature=st.disc.quadrature,
        boundary_mass=st.boundary_mass)
    ser.emitted_primary, ser.emitted_meta = emission_split(ser)
    return ser


def _cumulative_mass(values, dt, quadrature):
    """``sum_i w_i(k) values[i]`` for every ``k`` with the mass weights."""
    c = np.cumsum(values)
    if quadrature is Quadrature.RECTANGLE:
        return dt * (c - values[0])
    out = dt * (c - 0.5 * (values[0] + values))
    out[0] = 0.0
    return out


def emission_split(ser: SimulationSeries):
    """Metastases emitted by the primary tumor and by the metastases, cumulated in time.

    Both use the same tau-weights as ``mass_rho1``, so their sum equals it.
    """
    prim = _cumulative_mass(ser.F, ser.dt, ser.quadrature)
    meta = _cumulative_mass(ser.B * ser.boundary_mass, ser.dt, ser.quadrature)
    return prim, meta


@dataclass
class Run:
    state: SolverState
    series: SimulationSeries


def simulate(model: Model, disc: Discretization, rho0=None, *,
             visible_threshold=VISIBLE_THRESHOLD_MM3, enforce_nonnegative=True) -> Run:
    st = init_state(model, disc, rho0, enforce_nonnegative=enforce_nonnegative,
                    visible_threshold=visible_threshold)
    while st.k < disc.K:
        advance(st)
    return Run(st, series(st))


# ---------------------------------------------------------------------------
# Jacobians and density reconstruction

@dataclass
class JacobianTable:
    """``J1[i, j]`` for boundary rows ``0..k`` and ``J2[p]`` for the kept cells at ``t_k``."""

    t: float
    J1: np.ndarray
    J2: np.ndarray
    residual_bound: float


def jacobian_table(st: SolverState) -> JacobianTable:
    k, dt = st.k, st.disc.dt
    J1 = np.abs(st.flux1[:k + 1]) * np.exp(st.logJ1[:k + 1])
    J2 = np.exp(st.logJ2)
    age = (k - np.arange(k + 1))[:, None] * dt
    # composite trapezoid error ~ (length) * h^2 * |f''| / 12, with h^2 f'' ~ second difference
    r1 = float((age * st.d2_1[:k + 1]).max() / 12) if k else 0.0
    r2 = float((k * dt * st.d2_2).max() / 12) if len(st.d2_2) else 0.0
    return JacobianTable(st.t, J1, J2, max(r1, r2))


def _locate(value, edges, nodes, quadrature, data_mode):
    """Index of the stored value representing coordinate ``value``."""
    if quadrature is Quadrature.TRAPEZOID:
        return int(np.argmin(np.abs(nodes - value)))
    j = int(np.searchsorted(edges, value, side="right") - 1)
    return min(max(j, 0), len(edges) - 2)


def reconstruct_density(st: SolverState, X, table: JacobianTable = None) -> float:
    """Density of metastases at point ``X`` and the current time.

    The characteristic through ``(t_k, X)`` is traced back. If it entered
    through the birth segment at ``(tau, sigma)``, the matching ``rho1`` value
    divided by ``J1`` is returned; if it started inside at ``Y``, the matching
    ``rho2`` value divided by ``J2``.
    """
    if st.disc.dirac_mode:
        raise ValueError("the density is a measure in Dirac mode; use non-Dirac mode")
    model, disc = st.model, st.disc
    table = jacobian_table(st) if table is None else table
    hit = entrance_map(model.field, st.t, X, disc.dt, model.domain)
    if isinstance(hit, Entrance):
        edges = st.grid_info["sigma_edges"]
        x_ok = hit.sigma[0] == model.domain.x_birth  # entered through the birth edge
        theta = hit.sigma[1]
        if not x_ok or theta < edges[0] or theta > edges[-1]:
            return 0.0
        if disc.quadrature is Quadrature.TRAPEZOID:
            i = int(round(hit.tau / disc.dt))
        else:
            i = math.ceil(hit.tau / disc.dt - 1e-9)
            i = max(i, 1)
        i = min(max(i, 0), st.k)
        j = _locate(theta, edges, st.sig_nodes[:, 1], disc.quadrature, disc.data_mode)
        return float(st.rho1[i, j] / table.J1[i, j])
    if not len(st.rho2):
        return 0.0
    info = st.grid_info
    l = _locate(hit.y[0], info["x_edges"], info["x_nodes"], disc.quadrature, disc.data_mode)
    m = _locate(hit.y[1], info["theta_edges"], info["theta_nodes"], disc.quadrature, disc.data_mode)
    match = np.nonzero((st.cell_index[:, 0] == l) & (st.cell_index[:, 1] == m))[0]
    if not len(match):
        return 0.0
    p = match[0]
    return float(st.rho2[p] / table.J2[p])
