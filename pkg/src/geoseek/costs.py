"""Built-in cost oracles used by the experiments and the test-suite."""

from __future__ import annotations

import math

import numpy as np

from .eslaw import CostOracle
from .lie import GroupElement, GroupTag


def quadratic(target=(0.0,)) -> CostOracle:
    """``|x - x*|^2`` on R^n."""
    xs = np.asarray(target, dtype=float).ravel()

    def fn(x):
        d = np.asarray(x, dtype=float) - xs
        return float(d @ d)

    return CostOracle(fn, target=xs, name="quadratic")


def cosine(theta_star: float = 0.0) -> CostOracle:
    """``1 - cos(theta - theta*)`` on S^1."""

    def fn(x):
        return 1.0 - math.cos(float(x[0]) - theta_star)

    return CostOracle(fn, target=np.array([theta_star]), name="cosine")


def constant(value: float = 1.0, target=None) -> CostOracle:
    return CostOracle(lambda x: value, target=target, name="constant")


def so3_trace(target=None) -> CostOracle:
    """``1/2 |g - g*|_F^2 = 3 - tr(g*^T g)``; ``3 - tr(g)`` for ``g* = I``."""
    gs = np.eye(3) if target is None else np.asarray(getattr(target, "mat", target), dtype=float)

    w = gs.ravel().copy()

    def fn(g):
        # clamp: the rotation misfit is >= 0 but rounds to -1e-16 near g*
        return max(0.0, 3.0 - float(w @ np.ravel(g)))

    return CostOracle(fn, target=GroupElement(gs, GroupTag.SO3), name="so3_trace")


def se3_pose(target=None) -> CostOracle:
    """Rotation misfit ``3 - tr(R*^T R)`` plus ``1/2 |p - p*|^2``."""
    ts = np.eye(4) if target is None else np.asarray(getattr(target, "mat", target), dtype=float)
    rs, ps = ts[:3, :3], ts[:3, 3]

    w = np.zeros((4, 4))
    w[:3, :3] = rs
    w = w.ravel()

    def fn(g):
        d = g[:3, 3] - ps
        return max(0.0, 3.0 - float(w @ np.ravel(g))) + 0.5 * float(d @ d)

    return CostOracle(fn, target=GroupElement(ts, GroupTag.SE3), name="se3_pose")
