"""Numerical checks of the averaging analysis.

* the averaged ES field against the scaled gradient field, and the
  ``O((max a)^4)`` scaling of their difference;
* Taylor remainders along geodesics;
* monotone descent of the cost along gradient flows;
* the corrector flow ``z(t) = Phi_Z(1, 0, x(t))`` with
  ``Z(t, x) = int_0^t (fhat(x) - f(x, s)) ds``, whose distance to the ES
  state is ``O(1/w)``;
* distance legs between ES, averaged and gradient trajectories.

Fields are compared in the original time ``t``, where the average carries no
``1/w`` factor, so every residual here is independent of ``w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import lie
from .errors import DegenerateFitError, DomainError
from .eslaw import ESField
from .fields import (DEFAULT_QUADRATURE, FD_GRADIENT_STEP, averaged_field,
                     gradient_field, simpson_weights)
from .integrate import (IntegratorConfig, Trajectory, integrate,
                        integrate_averaged, integrate_gradient)
from .manifold import (ManifoldDescriptor, euclidean, exp_map, tangent_norm,
                       validate_dither_amplitude)

__all__ = [
    "averaged_field", "gradient_field", "ResidualReport", "averaging_residual",
    "SlopeFit", "residual_slope", "taylor_remainder", "DescentReport",
    "lyapunov_monitor", "corrector_field", "CorrectorResult", "corrector_flow",
    "corrector_distances", "ClosenessReport", "closeness_report",
]

RESIDUAL_FLOOR = 1e-12
REMAINDER_FLOOR = 1e-13
# second differences lose too many digits at 1e-5
FD_SECOND_STEP = 1e-4


def _field_norm(es: ESField, x, v) -> float:
    if es.is_group:
        # orthonormal coefficients of the left-invariant basis
        return float(np.linalg.norm(v))
    return tangent_norm(es.space, x, v)


@dataclass(frozen=True)
class ResidualReport:
    scale: float
    residual: float
    per_point: tuple

    def __post_init__(self):
        if not self.residual >= 0:
            raise ValueError("residual must be nonnegative")


def averaging_residual(es: ESField, cost, probes: Sequence, n: int = DEFAULT_QUADRATURE,
                       h: float = FD_GRADIENT_STEP) -> ResidualReport:
    """``|fhat(x) - fgrad(x)|_g`` at each probe; ``residual`` is the largest."""
    a = es.spec.amplitude_array
    per = []
    for x in probes:
        diff = averaged_field(es, x, n) - gradient_field(cost, x, a, es.space, h)
        per.append(_field_norm(es, x, diff))
    if not per:
        raise ValueError("no probe points")
    return ResidualReport(scale=float(a.max()), residual=max(per), per_point=tuple(per))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    xs: tuple
    ys: tuple

    def __float__(self):
        return self.slope


def _loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def residual_slope(es: ESField, cost, probe, scales=(0.2, 0.1, 0.05, 0.025),
                   n: int = DEFAULT_QUADRATURE) -> SlopeFit:
    """Log-log slope of the averaging residual against the largest amplitude.

    Each scale ``s`` rescales the dither so that ``max a_i = s`` (ratios kept).
    """
    scales = [float(s) for s in scales]
    if len(scales) < 3:
        raise ValueError("need at least 3 scales for a slope")
    res = []
    for s in scales:
        spec = es.spec.with_max_amplitude(s)
        if isinstance(es.space, ManifoldDescriptor):
            rep = validate_dither_amplitude(es.space, spec)
            if not rep.passed:
                raise DomainError(f"scale {s}: dither length {rep.bound:.3g} exceeds the injectivity radius")
        r = averaging_residual(es.with_spec(spec), cost, [probe], n).residual
        if r < RESIDUAL_FLOOR:
            raise DegenerateFitError(f"residual {r:.3g} at scale {s} is at the rounding floor; pick another probe")
        res.append(r)
    return SlopeFit(_loglog_slope(scales, res), tuple(scales), tuple(res))


def taylor_remainder(cost, x, direction, etas=(0.1, 0.05, 0.025), order: int = 1,
                     space=None, h: Optional[float] = None) -> SlopeFit:
    """Slope of ``|J(exp_x(eta X)) - sum_{j<=m} eta^j/j! D^j J|`` against ``eta``.

    The directional derivatives are central differences along the same
    geodesic (step 1e-5 for first order, 1e-4 when a second difference is needed).
    ``space`` may be a chart manifold or a group tag; on a group ``direction``
    holds algebra coordinates and the geodesic is ``g exp(eta X)``.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    X = np.asarray(direction, dtype=float).ravel()
    etas = [float(e) for e in etas]
    if len(etas) < 2 or min(etas) <= 0:
        raise ValueError("need at least two positive etas")
    if isinstance(space, (str, lie.GroupTag)):
        # one-parameter subgroup g exp(eta X); rotation angle bounded by pi
        tag = lie.GroupTag(space)
        g = lie.GroupElement(x, tag).mat if not isinstance(x, lie.GroupElement) else x.mat
        xi = lie.algebra_from_coords(X, tag)
        if max(etas) * float(np.linalg.norm(X[:3])) >= math.pi:
            raise DomainError("eta * |X| reaches the injectivity radius")

        def walk(eta):
            return g @ lie.exp_raw(eta * xi, tag)
    else:
        if space is None:
            space = euclidean(np.size(x))
        x = space.check(np.asarray(x, dtype=float).ravel())
        if max(etas) * tangent_norm(space, x, X) >= space.injectivity_radius:
            raise DomainError("eta * |X| reaches the injectivity radius")
        g = x

        def walk(eta):
            return exp_map(space, x, X, eta) if eta >= 0 else exp_map(space, x, -X, -eta)
    if h is None:
        h = FD_GRADIENT_STEP if order == 1 else FD_SECOND_STEP

    j0 = cost(g)
    jp, jm = cost(walk(h)), cost(walk(-h))
    d1 = (jp - jm) / (2.0 * h)
    d2 = (jp - 2.0 * j0 + jm) / (h * h)
    # rounding in the differences, propagated to the remainder
    noise = 10.0 * np.finfo(float).eps * (1.0 + abs(j0))
    rem = []
    for eta in etas:
        r = cost(walk(eta)) - j0 - eta * d1
        floor = noise * (1.0 + eta / h)
        if order == 2:
            r -= 0.5 * eta * eta * d2
            floor += noise * (eta / h) ** 2
        r = abs(r)
        if r < max(REMAINDER_FLOOR, floor):
            raise DegenerateFitError(f"remainder {r:.3g} at eta={eta} is at the rounding floor")
        rem.append(r)
    return SlopeFit(_loglog_slope(etas, rem), tuple(etas), tuple(rem))


@dataclass(frozen=True)
class DescentReport:
    max_jump: float
    tolerance: float
    initial_cost: float
    positive_jumps: int

    @property
    def descending(self) -> bool:
        return self.max_jump <= self.tolerance


def lyapunov_monitor(traj: Trajectory) -> DescentReport:
    """Largest increase of the cost between consecutive samples.

    Descent holds iff that increase is at most ``1e-8 (1 + J0)``.  Any
    trajectory is accepted; ES trajectories simply report their wobble.
    """
    c = np.asarray(traj.costs, dtype=float)
    jumps = np.diff(c)
    j0 = float(c[0])
    mx = float(max(jumps.max(initial=0.0), 0.0))
    return DescentReport(mx, 1e-8 * (1.0 + j0), j0, int(np.count_nonzero(jumps > 0)))


# corrector flow ----------------------------------------------------------

def corrector_field(es: ESField, t: float, x, n: int = DEFAULT_QUADRATURE,
                    fhat: Optional[np.ndarray] = None) -> np.ndarray:
    """``Z(t, x) = int_0^t (fhat(x) - f(x, s)) ds`` on a chart.

    The integrand has zero mean over a period, so ``t`` is first reduced
    modulo the common period; Simpson with ``n`` subintervals covers the rest.
    """
    if es.is_group:
        raise NotImplementedError("the corrector flow is implemented on chart manifolds only")
    period = es.spec.period
    tr = math.fmod(float(t), period)
    if tr < 0:
        tr += period
    if tr == 0.0:
        return np.zeros(es.dim)
    if fhat is None:
        fhat = averaged_field(es, x, n)
    ts = np.linspace(0.0, tr, n + 1)
    mean_f = simpson_weights(n) @ es.batch_coefficients(x, ts)
    return tr * (fhat - mean_f)


def _corrector_endpoint(es: ESField, t: float, x, n: int, steps: int) -> np.ndarray:
    # unit pseudo-time flow of the frozen field Z(t, .) by classical RK4
    m = es.space
    ds = 1.0 / steps

    def Z(y):
        return corrector_field(es, t, y, n)

    y = np.array(x, dtype=float)
    for _ in range(steps):
        k1 = Z(y)
        k2 = Z(m.wrap(y + 0.5 * ds * k1))
        k3 = Z(m.wrap(y + 0.5 * ds * k2))
        k4 = Z(m.wrap(y + ds * k3))
        y = m.wrap(y + (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    return y


def _chart_distance(m: ManifoldDescriptor, x, y) -> float:
    if m.distance is not None:
        return float(m.distance(m.wrap(x), m.wrap(y)))
    return float(np.linalg.norm(np.asarray(x) - np.asarray(y)))


@dataclass(frozen=True)
class CorrectorResult:
    t: float
    x: np.ndarray
    z: np.ndarray
    distance: float


def corrector_flow(es: ESField, x0, t_eval: float, cfg: IntegratorConfig,
                   n: int = DEFAULT_QUADRATURE, pseudo_steps: int = 4) -> CorrectorResult:
    """ES state ``x(t_eval)``, corrected state ``z`` and their chart distance.

    ``cfg`` supplies the step, method and ``t0``; the horizon is ``t_eval - t0``.
    """
    if es.is_group:
        raise NotImplementedError("the corrector flow is implemented on chart manifolds only")
    m = es.space
    x0 = m.check(np.asarray(x0, dtype=float).ravel())
    span = float(t_eval) - cfg.t0
    if span < 0:
        raise ValueError("t_eval precedes t0")
    if span == 0:
        x = x0
    else:
        run = IntegratorConfig(cfg.step, span, cfg.method, cfg.t0, round(span / cfg.step))
        x = integrate(es, x0, run).final_state
    z = _corrector_endpoint(es, t_eval, x, n, pseudo_steps)
    return CorrectorResult(float(t_eval), x, z, _chart_distance(m, x, z))


def corrector_distances(es: ESField, x0, cfg: IntegratorConfig, n: int = DEFAULT_QUADRATURE,
                        pseudo_steps: int = 4):
    """Corrector distance at every sample of one ES run; returns ``(times, distances)``."""
    if es.is_group:
        raise NotImplementedError("the corrector flow is implemented on chart manifolds only")
    traj = integrate(es, x0, cfg)
    d = [_chart_distance(es.space, x, _corrector_endpoint(es, t, x, n, pseudo_steps))
         for t, x in zip(traj.times, traj.states)]
    return traj.times.copy(), np.array(d)


# closeness ---------------------------------------------------------------

@dataclass(frozen=True)
class ClosenessReport:
    times: np.ndarray
    es_avg: np.ndarray
    es_target: np.ndarray
    avg_target: np.ndarray
    grad_target: np.ndarray
    radius: float
    t_enter: Optional[float]
    settle: float = 0.0

    @property
    def sup_es_avg(self) -> float:
        return float(self.es_avg.max())

    @property
    def sup_avg_target(self) -> float:
        return float(self.avg_target.max())

    @property
    def sup_es_target_after_settle(self) -> float:
        mask = self.times >= self.settle
        return float(self.es_target[mask].max()) if mask.any() else math.nan

    @property
    def entered(self) -> bool:
        return self.t_enter is not None

    def triangle_defect(self) -> float:
        """Largest violation of ``d(f, x*) <= d(f, fhat) + d(fhat, x*)``."""
        return float(np.max(self.es_target - self.es_avg - self.avg_target, initial=0.0))


def _enter_time(times, dist, radius) -> Optional[float]:
    outside = np.nonzero(dist >= radius)[0]
    if outside.size == 0:
        return float(times[0])
    last = outside[-1]
    return None if last == len(times) - 1 else float(times[last + 1])


def closeness_report(es: ESField, x0, cfg: IntegratorConfig, radius: float = 0.1,
                     slow_step: Optional[float] = None, n: int = DEFAULT_QUADRATURE,
                     settle: float = 0.0) -> ClosenessReport:
    """Distances between the ES, averaged and gradient flows from ``x0``.

    The ES run uses ``cfg``.  The averaged and gradient flows are slow, so they
    step at ``slow_step`` (default: the ES sample interval) and are sampled at
    the same times.  ``t_enter`` is the first sample time after which the ES
    state stays within ``radius`` of the target, or ``None``.
    """
    target = getattr(es.cost, "target", None)
    if target is None:
        raise ValueError("the cost oracle has no registered target")
    interval = cfg.step * cfg.sample_stride
    if slow_step is None:
        slow_step = interval
    ratio = interval / slow_step
    stride = round(ratio)
    if stride < 1 or abs(stride - ratio) > 1e-9 * ratio:
        raise ValueError("slow_step must divide the ES sample interval")
    slow = IntegratorConfig(slow_step, cfg.horizon, cfg.method, cfg.t0, stride, cfg.project_each_step)
    if cfg.n_steps % cfg.sample_stride:
        raise ValueError("horizon must be a whole number of sample intervals")

    es_tr = integrate(es, x0, cfg)
    av_tr = integrate_averaged(es, x0, slow, n)
    gr_tr = integrate_gradient(es.cost, x0, es.spec, slow, space=es.space)
    if es.is_group:
        tag = es.space
        d = lambda u, v: lie.raw_group_distance(u, v, tag)  # noqa: E731
        tgt = lie.GroupElement(getattr(target, "mat", target), tag).mat
    else:
        d = lambda u, v: _chart_distance(es.space, u, v)  # noqa: E731
        tgt = np.asarray(target, dtype=float)
    es_avg = np.array([d(u, v) for u, v in zip(es_tr.states, av_tr.states)])
    es_target = np.array([d(u, tgt) for u in es_tr.states])
    avg_target = np.array([d(u, tgt) for u in av_tr.states])
    grad_target = np.array([d(u, tgt) for u in gr_tr.states])
    return ClosenessReport(es_tr.times.copy(), es_avg, es_target, avg_target, grad_target,
                           float(radius), _enter_time(es_tr.times, es_target, radius), settle)
