"""Time-invariant fields derived from the ES law: period average and scaled gradient.

Both return coefficient vectors on the coordinate basis (charts) or on the
algebra basis in the body frame (groups), which is what the integrators use.
"""

from __future__ import annotations

import numpy as np

from . import lie
from .eslaw import ESField, _raw
from .lie import GroupTag
from .manifold import ManifoldDescriptor, exp_map

FD_GRADIENT_STEP = 1e-5
DEFAULT_QUADRATURE = 512


def simpson_weights(n: int) -> np.ndarray:
    """Composite Simpson weights on ``n`` (even) subintervals of a unit interval."""
    if n < 2 or n % 2:
        raise ValueError("Simpson's rule needs an even number of subintervals")
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * n)


def averaged_field(es: ESField, x, n: int = DEFAULT_QUADRATURE, start: float = 0.0) -> np.ndarray:
    """``(1/T) int_start^{start+T} f(x, tau) dtau`` by composite Simpson."""
    if n < 8:
        raise ValueError("use at least 8 quadrature subintervals")
    period = es.spec.period
    ts = start + period * np.linspace(0.0, 1.0, n + 1)
    return simpson_weights(n) @ es.batch_coefficients(x, ts)


def directional_derivatives(cost, x, space, h: float = FD_GRADIENT_STEP) -> np.ndarray:
    """Central differences of ``cost`` along each basis geodesic through ``x``.

    Chart: ``exp_x(+-h e_i)``; group: ``g exp(+-h E_i)``.
    """
    if isinstance(space, ManifoldDescriptor):
        x = space.check(x)
        out = np.empty(space.dim)
        for i in range(space.dim):
            e = np.zeros(space.dim)
            e[i] = 1.0
            out[i] = (cost(exp_map(space, x, e, h)) - cost(exp_map(space, x, -e, h))) / (2.0 * h)
        return out
    tag = GroupTag(space)
    g = _raw(x)
    out = np.empty(tag.algebra_dim)
    for i, e in enumerate(lie.basis(tag)):
        plus = g @ lie.exp_raw(h * e, tag)
        minus = g @ lie.exp_raw(-h * e, tag)
        out[i] = (cost(plus) - cost(minus)) / (2.0 * h)
    return out


def gradient_field(cost, x, amplitudes, space, h: float = FD_GRADIENT_STEP) -> np.ndarray:
    """Scaled gradient ``-(a_i^2 / 2) D_i J(x)`` on each basis direction."""
    a = np.asarray(getattr(amplitudes, "amplitudes", amplitudes), dtype=float)
    return -0.5 * a * a * directional_derivatives(cost, x, space, h)
