"""Fixed-step integration of time-varying fields on charts and matrix groups.

Group fields are given in the body frame: ``field(g, t)`` returns the algebra
matrix ``xi`` with ``g' = g xi``.  Chart fields return coordinate velocities.

Methods
-------
``LIE_EULER``  ``g <- g exp(h xi(g, t))``; exact for constant ``xi``.
``RKMK4``      Runge-Kutta-Munthe-Kaas, classical tableau in the algebra with a
               third-order truncated inverse ``dexp``.
``CHART_RK4``  classical RK4 on chart coordinates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field
from typing import Any, Callable, Optional

import numpy as np

from . import lie
from .errors import (ChartExitError, DomainError, IntegrationDivergedError, NumericalError,
                     OracleContractError)
from .eslaw import ESField, _raw
from .fields import DEFAULT_QUADRATURE, averaged_field, gradient_field
from .lie import GroupElement, GroupTag
from .manifold import ManifoldDescriptor, euclidean

DIVERGENCE_DEFECT = 1e-3
_EYE3 = np.eye(3)


class Method(str, enum.Enum):
    LIE_EULER = "LIE_EULER"
    RKMK4 = "RKMK4"
    CHART_RK4 = "CHART_RK4"


@dataclass(frozen=True)
class IntegratorConfig:
    step: float
    horizon: float
    method: Method = Method.CHART_RK4
    t0: float = 0.0
    sample_stride: int = 1
    project_each_step: bool = True

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not (self.step > 0 and self.horizon > 0):
            raise ValueError("step and horizon must be positive")
        if not self.step < self.horizon:
            raise ValueError("step must be smaller than the horizon")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ValueError("sample_stride must be a positive integer")
        n = round(self.horizon / self.step)
        if abs(n * self.step - self.horizon) > 1e-9 * self.horizon:
            raise ValueError("horizon must be an integer number of steps")

    @property
    def n_steps(self) -> int:
        return round(self.horizon / self.step)

    @property
    def t_final(self) -> float:
        return self.t0 + self.n_steps * self.step

    def time(self, k: int) -> float:
        return self.t0 + k * self.step


@dataclass(frozen=True)
class Monitor:
    """What to record alongside the state: cost and distance to a target."""

    cost: Optional[Callable] = None
    target: Any = None
    distance: Optional[Callable] = None


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    costs: np.ndarray
    dists: np.ndarray
    config: IntegratorConfig
    description: str = ""
    space: Any = None
    defects: Optional[np.ndarray] = None
    complete: bool = True
    error: Optional[str] = None

    def __len__(self):
        return len(self.times)

    @property
    def is_group(self) -> bool:
        return isinstance(self.space, GroupTag)

    def samples(self):
        """Iterate ``(t, state, cost, dist)`` tuples."""
        return zip(self.times, self.states, self.costs, self.dists)

    @property
    def final_state(self):
        return self.states[-1]

    def state_at(self, i: int):
        s = self.states[i]
        return GroupElement(s, self.space) if self.is_group else s


@dataclass
class _Recorder:
    monitor: Monitor
    space: Any
    times: list = dc_field(default_factory=list)
    states: list = dc_field(default_factory=list)
    costs: list = dc_field(default_factory=list)
    dists: list = dc_field(default_factory=list)
    defects: list = dc_field(default_factory=list)

    def add(self, t, x):
        mon = self.monitor
        self.times.append(t)
        self.states.append(np.array(x, dtype=float))
        self.costs.append(float(mon.cost(x)) if mon.cost is not None else math.nan)
        if mon.distance is not None and mon.target is not None:
            self.dists.append(float(mon.distance(x, mon.target)))
        else:
            self.dists.append(math.nan)
        if isinstance(self.space, GroupTag):
            self.defects.append(lie.membership_defect_raw(x, self.space).worst)

    def build(self, cfg, description, complete=True, error=None) -> Trajectory:
        return Trajectory(
            times=np.array(self.times),
            states=np.array(self.states),
            costs=np.array(self.costs),
            dists=np.array(self.dists),
            config=cfg,
            description=description,
            space=self.space,
            defects=np.array(self.defects) if isinstance(self.space, GroupTag) else None,
            complete=complete,
            error=error,
        )


def _default_monitor(field, space) -> Monitor:
    cost = getattr(field, "cost", None)
    return _monitor_for(cost, space)


def _monitor_for(cost, space, target=None) -> Monitor:
    if target is None:
        target = getattr(cost, "target", None)
    if isinstance(space, GroupTag):
        tgt = _raw(target) if target is not None else None
        return Monitor(cost, tgt, lambda x, y: lie.raw_group_distance(x, y, space))
    dist = None
    if space.distance is not None:
        dist = lambda x, y: float(space.distance(space.wrap(x), space.wrap(y)))  # noqa: E731
    return Monitor(cost, None if target is None else np.asarray(target, dtype=float), dist)


def _resolve_space(field, x0, space):
    if space is None:
        space = getattr(field, "space", None)
    if isinstance(x0, GroupElement):
        if space is not None and GroupTag(space) is not x0.tag:
            raise ValueError("initial state and field live on different groups")
        return x0.tag, np.array(x0.mat)
    if space is None:
        x = np.asarray(x0, dtype=float).ravel()
        return euclidean(x.size), x
    if isinstance(space, ManifoldDescriptor):
        return space, space.check(np.asarray(x0, dtype=float).ravel())
    tag = GroupTag(space)
    return tag, np.array(GroupElement(x0, tag).mat)


def _dexpinv(u, k):
    c1 = u @ k - k @ u
    c2 = u @ c1 - c1 @ u
    return k + 0.5 * c1 + c2 / 12.0


def _group_step(field, g, t, h, tag, method):
    if method is Method.LIE_EULER:
        return g @ lie.exp_raw(h * field(g, t), tag)
    k1 = field(g, t)
    u = 0.5 * h * k1
    k2 = _dexpinv(u, field(g @ lie.exp_raw(u, tag), t + 0.5 * h))
    u = 0.5 * h * k2
    k3 = _dexpinv(u, field(g @ lie.exp_raw(u, tag), t + 0.5 * h))
    u = h * k3
    k4 = _dexpinv(u, field(g @ lie.exp_raw(u, tag), t + h))
    return g @ lie.exp_raw((h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), tag)


def _chart_step(field, x, t, h, m):
    k1 = np.asarray(field(x, t), dtype=float)
    k2 = np.asarray(field(m.wrap(x + 0.5 * h * k1), t + 0.5 * h), dtype=float)
    k3 = np.asarray(field(m.wrap(x + 0.5 * h * k2), t + 0.5 * h), dtype=float)
    k4 = np.asarray(field(m.wrap(x + h * k3), t + h), dtype=float)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(field, x0, cfg: IntegratorConfig, monitor: Optional[Monitor] = None,
              space=None, description: str = "") -> Trajectory:
    """Sample the flow of ``field`` from ``x0`` over ``[t0, t0 + horizon]``.

    Samples are taken every ``sample_stride`` steps and at the final time;
    time stamps are ``t0 + k * step``.  On a chart exit or a group-membership
    defect above 1e-3 the raised error carries the partial trajectory.
    """
    space, x = _resolve_space(field, x0, space)
    if monitor is None:
        monitor = _default_monitor(field, space)
    if not description and isinstance(field, ESField):
        description = f"extremum seeking on {getattr(space, 'name', getattr(space, 'value', space))}"
    is_group = isinstance(space, GroupTag)
    method = cfg.method
    if is_group and method is Method.CHART_RK4:
        raise ValueError("CHART_RK4 integrates chart coordinates; use LIE_EULER or RKMK4 on groups")
    if not is_group and method is not Method.CHART_RK4:
        raise ValueError(f"{method.value} needs a matrix-group state")

    rec = _Recorder(monitor, space)
    rec.add(cfg.t0, x)
    h, n, stride = cfg.step, cfg.n_steps, cfg.sample_stride
    for k in range(1, n + 1):
        t = cfg.time(k - 1)
        if is_group:
            try:
                x = _group_step(field, x, t, h, space, method)
                if cfg.project_each_step:
                    x = lie.project_raw(x, space)
                rot = x[:3, :3]
                defect = float(np.abs(rot @ rot.T - _EYE3).max())
                reason = f"group-membership defect {defect:.3g}"
            except (NumericalError, OracleContractError) as e:
                defect, reason = math.inf, str(e)
            if not defect <= DIVERGENCE_DEFECT:
                traj = rec.build(cfg, description, False, f"diverged at t={cfg.time(k):.6g}")
                raise IntegrationDivergedError(f"{reason} at t={cfg.time(k):.6g}", trajectory=traj)
        else:
            try:
                new = _chart_step(field, x, t, h, space)
            except OracleContractError as e:
                traj = rec.build(cfg, description, False, f"diverged at t={cfg.time(k):.6g}")
                raise IntegrationDivergedError(f"{e} at t={cfg.time(k):.6g}", trajectory=traj) from e
            except DomainError:
                new = None  # an intermediate stage already left the chart
            if new is None or not space.contains(new):
                traj = rec.build(cfg, description, False, f"left chart at t={cfg.time(k):.6g}")
                raise ChartExitError(f"flow left the chart of {space.name} at t={cfg.time(k):.6g}",
                                     last_point=x, trajectory=traj)
            x = space.wrap(new)
        if k % stride == 0 or k == n:
            rec.add(cfg.time(k), x)
    return rec.build(cfg, description)


def integrate_gradient(cost, x0, amplitudes, cfg: IntegratorConfig, space=None,
                       monitor: Optional[Monitor] = None) -> Trajectory:
    """Flow of the scaled gradient field ``-(a_i^2/2) D_i J`` (finite differences)."""
    if space is None:
        space = x0.tag if isinstance(x0, GroupElement) else euclidean(np.size(x0))
    if not isinstance(space, ManifoldDescriptor):
        space = GroupTag(space)
    a = np.asarray(getattr(amplitudes, "amplitudes", amplitudes), dtype=float)

    if isinstance(space, GroupTag):
        def fld(g, t):
            return lie.algebra_from_coords(gradient_field(cost, g, a, space), space)
    else:
        def fld(x, t):
            return gradient_field(cost, x, a, space)

    if monitor is None:
        monitor = _monitor_for(cost, space)
    return integrate(fld, x0, cfg, monitor, space, description="scaled gradient flow")


def integrate_averaged(es: ESField, x0, cfg: IntegratorConfig, n: int = DEFAULT_QUADRATURE,
                       monitor: Optional[Monitor] = None) -> Trajectory:
    """Flow of the period-averaged ES field (Simpson with ``n`` subintervals)."""
    space = es.space

    if es.is_group:
        def fld(g, t):
            return lie.algebra_from_coords(averaged_field(es, g, n), space)
    else:
        def fld(x, t):
            return averaged_field(es, x, n)

    if monitor is None:
        monitor = _monitor_for(es.cost, space)
    return integrate(fld, x0, cfg, monitor, space, description="averaged ES flow")
