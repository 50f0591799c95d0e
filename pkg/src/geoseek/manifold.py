"""Chart-level Riemannian primitives.

Points are plain ``numpy`` coordinate vectors in a single chart.  A manifold is
described by its metric evaluator plus a box-shaped chart domain; Christoffel
symbols are obtained from the metric by central differences and geodesics are
integrated with a fixed-step RK4 scheme on the first-order system
``(gamma, gamma_dot)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ChartExitError, DomainError, UnsupportedOperationError

TWO_PI = 2.0 * math.pi

#: relative step used for metric partial derivatives
FD_METRIC_STEP = 1e-5
#: number of RK4 steps used by :func:`exp_map` (step = eta / GEODESIC_STEPS)
GEODESIC_STEPS = 1000


class InjectivityWarning(UserWarning):
    """Geodesic length reached the injectivity radius."""


@dataclass(frozen=True)
class ManifoldDescriptor:
    """A manifold known through one chart.

    ``lower``/``upper`` bound the chart box.  When ``periodic`` is set the
    coordinates are identified modulo ``upper - lower`` and points are wrapped
    back into the box instead of being rejected.  ``flat`` marks a constant
    metric, for which geodesics are straight coordinate lines.
    """

    name: str
    dim: int
    metric_at: Callable[[np.ndarray], np.ndarray]
    injectivity_radius: float
    lower: tuple
    upper: tuple
    periodic: bool = False
    flat: bool = False
    distance: Optional[Callable[[np.ndarray, np.ndarray], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if not self.injectivity_radius > 0:
            raise ValueError("injectivity radius must be positive")
        if len(self.lower) != self.dim or len(self.upper) != self.dim:
            raise ValueError("chart box must have one interval per coordinate")
        lo, hi = np.array(self.lower, float), np.array(self.upper, float)
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_hi", hi)
        object.__setattr__(self, "_span", hi - lo)

    @property
    def chart_domain(self) -> tuple[np.ndarray, np.ndarray]:
        return self._lo, self._hi

    def wrap(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.periodic:
            return x
        return self._lo + np.mod(x - self._lo, self._span)

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            return False
        if self.periodic:
            return bool(np.isfinite(x).all())
        lo, hi = self._lo, self._hi
        # comparisons are False for NaN and for +-inf against infinite bounds
        return bool(((x > lo) & (x < hi)).all())

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            raise DomainError(f"point {x} is outside the chart domain of {self.name}")
        return self.wrap(x)

    def metric(self, x) -> np.ndarray:
        return np.asarray(self.metric_at(self.check(x)), dtype=float).reshape(self.dim, self.dim)

    def sample_points(self, per_axis: int = 7) -> np.ndarray:
        """Grid of interior chart points used for sup-bounds over the chart."""
        per_axis = max(2, min(per_axis, int(4096 ** (1.0 / self.dim))))
        axes = []
        for lo, hi in zip(*self.chart_domain):
            lo = -1.0 if not math.isfinite(lo) else lo
            hi = 1.0 if not math.isfinite(hi) else hi
            axes.append(np.linspace(lo, hi, per_axis + 2)[1:-1])
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class TangentCoords:
    """Tangent vector given by its components on the coordinate basis at ``base``."""

    base: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float).ravel()
        comps = np.asarray(self.components, dtype=float).ravel()
        if base.shape != comps.shape:
            raise ValueError("tangent components must match the base point dimension")
        if not np.all(np.isfinite(comps)):
            raise ValueError("tangent components must be finite")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "components", comps)


@dataclass(frozen=True)
class AmplitudeReport:
    passed: bool
    bound: float
    radius: float


def _flat_metric(dim):
    eye = np.eye(dim)
    return lambda x: eye


def euclidean(n: int = 1) -> ManifoldDescriptor:
    return ManifoldDescriptor(
        name=f"R{n}",
        dim=n,
        metric_at=_flat_metric(n),
        injectivity_radius=math.inf,
        lower=(-math.inf,) * n,
        upper=(math.inf,) * n,
        flat=True,
        distance=lambda x, y: float(np.linalg.norm(np.asarray(y, float) - np.asarray(x, float))),
    )


def angular_distance(x, y) -> float:
    d = abs(float(np.ravel(y)[0]) - float(np.ravel(x)[0])) % TWO_PI
    return min(d, TWO_PI - d)


def circle() -> ManifoldDescriptor:
    """S^1 in the angle chart theta in [0, 2*pi), wrapped modulo 2*pi."""
    return ManifoldDescriptor(
        name="S1",
        dim=1,
        metric_at=_flat_metric(1),
        injectivity_radius=math.pi,
        lower=(0.0,),
        upper=(TWO_PI,),
        periodic=True,
        flat=True,
        distance=angular_distance,
    )


def chart_manifold(name, dim, metric_at, lower, upper, injectivity_radius=math.inf,
                   distance=None, periodic=False) -> ManifoldDescriptor:
    """Generic chart manifold; geodesics always go through the ODE integrator."""
    return ManifoldDescriptor(
        name=name,
        dim=dim,
        metric_at=metric_at,
        injectivity_radius=injectivity_radius,
        lower=tuple(float(v) for v in lower),
        upper=tuple(float(v) for v in upper),
        periodic=periodic,
        distance=distance,
    )


def _components(v, x=None) -> np.ndarray:
    if isinstance(v, TangentCoords):
        if x is not None and not np.array_equal(v.base, np.asarray(x, float).ravel()):
            raise ValueError("tangent vector is not based at the given point")
        return v.components
    return np.asarray(v, dtype=float).ravel()


def metric_eval(m: ManifoldDescriptor, u: TangentCoords, v: TangentCoords) -> float:
    """Inner product ``sum_ij g_ij u_i v_j`` at the common base point."""
    if not np.array_equal(u.base, v.base):
        raise ValueError("tangent vectors live at different base points")
    g = m.metric(u.base)
    return float(u.components @ g @ v.components)


def tangent_norm(m: ManifoldDescriptor, x, v) -> float:
    comps = _components(v)
    return math.sqrt(max(float(comps @ m.metric(x) @ comps), 0.0))


def christoffel(m: ManifoldDescriptor, x) -> np.ndarray:
    """Christoffel symbols ``gamma[i, j, k]`` = Gamma^i_{jk} at ``x``.

    Metric partials use central differences with step ``1e-5 * max(1, |x_k|)``;
    a singular metric raises ``numpy.linalg.LinAlgError``.
    """
    x = m.check(x)
    n = m.dim
    ginv = np.linalg.inv(m.metric_at(x))
    dg = np.empty((n, n, n))
    for k in range(n):
        h = FD_METRIC_STEP * max(1.0, abs(x[k]))
        e = np.zeros(n)
        e[k] = h
        dg[k] = (np.asarray(m.metric_at(x + e), float) - np.asarray(m.metric_at(x - e), float)) / (2.0 * h)
    dg = 0.5 * (dg + dg.transpose(0, 2, 1))
    # s[j, k, l] = g_{jl,k} + g_{kl,j} - g_{jk,l}
    s = dg.transpose(1, 0, 2) + dg - dg.transpose(1, 2, 0)
    gamma = 0.5 * np.einsum("il,jkl->ijk", ginv, s)
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def _geodesic_rhs(m, pos, vel):
    gamma = christoffel(m, pos)
    return vel, -np.einsum("ijk,j,k->i", gamma, vel, vel)


def _integrate_geodesic(m, x, v, eta, n_steps):
    h = eta / n_steps
    pos, vel = x.copy(), v.copy()
    for _ in range(n_steps):
        try:
            k1x, k1v = _geodesic_rhs(m, pos, vel)
            k2x, k2v = _geodesic_rhs(m, pos + 0.5 * h * k1x, vel + 0.5 * h * k1v)
            k3x, k3v = _geodesic_rhs(m, pos + 0.5 * h * k2x, vel + 0.5 * h * k2v)
            k4x, k4v = _geodesic_rhs(m, pos + h * k3x, vel + h * k3v)
        except DomainError:
            raise ChartExitError(f"geodesic left the chart of {m.name}", last_point=m.wrap(pos)) from None
        new_pos = pos + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        if not m.contains(new_pos):
            raise ChartExitError(f"geodesic left the chart of {m.name}", last_point=m.wrap(pos))
        vel = vel + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        pos = new_pos
    return pos


def exp_map(m: ManifoldDescriptor, x, v, eta: float = 1.0, n_steps: int = GEODESIC_STEPS,
            force_ode: bool = False) -> np.ndarray:
    """Point ``gamma(eta)`` on the geodesic with ``gamma(0) = x``, ``gamma'(0) = v``.

    Flat charts take the straight line directly unless ``force_ode`` is set.
    Exceeding the injectivity radius only warns.
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    x = m.check(x)
    comps = _components(v, None)
    if comps.shape != x.shape:
        raise ValueError("tangent vector dimension does not match the manifold")
    if eta == 0:
        return x.copy()
    if math.isfinite(m.injectivity_radius) and tangent_norm(m, x, comps) * eta >= m.injectivity_radius:
        warnings.warn(
            f"geodesic length {tangent_norm(m, x, comps) * eta:.6g} exceeds injectivity radius of {m.name}",
            InjectivityWarning,
            stacklevel=2,
        )
    if m.flat and not force_ode:
        y = x + eta * comps
        if m.contains(y):
            return m.wrap(y)
    return m.wrap(_integrate_geodesic(m, x, comps, float(eta), n_steps))


def riemannian_distance(m: ManifoldDescriptor, x, y) -> float:
    x, y = m.check(x), m.check(y)
    if m.distance is None:
        raise UnsupportedOperationError(f"no closed-form distance registered for {m.name}")
    return float(m.distance(x, y))


def validate_dither_amplitude(m: ManifoldDescriptor, spec) -> AmplitudeReport:
    """Check that the worst-case dither length stays below the injectivity radius.

    ``spec`` is a DitherSpec or a plain amplitude sequence.  The bound is
    ``sqrt(sum_ij a_i a_j max|g_ij|)`` with the max over a grid of chart points.
    """
    a = np.asarray(getattr(spec, "amplitudes", spec), dtype=float)
    if a.shape != (m.dim,):
        raise ValueError(f"expected {m.dim} amplitudes, got {a.size}")
    gmax = np.zeros((m.dim, m.dim))
    for p in m.sample_points():
        gmax = np.maximum(gmax, np.abs(m.metric(p)))
    bound = math.sqrt(float(a @ gmax @ a))
    return AmplitudeReport(passed=bound < m.injectivity_radius, bound=bound, radius=m.injectivity_radius)
