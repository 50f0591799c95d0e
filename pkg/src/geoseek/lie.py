"""SO(3) and SE(3) as matrix groups.

The algebra bases follow the orderings used for the two worked examples:

* so(3): ``E1`` has +1 at (1,2), ``E2`` at (2,3), ``E3`` at (1,3) (1-based).
* se(3): ``E1`` at (1,2), ``E2`` at (1,3), ``E3`` at (2,3) for the rotation
  block, then ``E4..E6`` the unit translations in column 4.

Both orderings are kept exactly as written even though they disagree on
which rotation generator is second.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

SMALL_ANGLE = 1e-6
ORTHO_TOL = 1e-6


class GroupTag(str, enum.Enum):
    SO3 = "SO3"
    SE3 = "SE3"

    @property
    def algebra_dim(self) -> int:
        return 3 if self is GroupTag.SO3 else 6

    @property
    def matrix_size(self) -> int:
        return 3 if self is GroupTag.SO3 else 4


def _skew_unit(i, j):
    m = np.zeros((3, 3))
    m[i, j], m[j, i] = 1.0, -1.0
    return m


def _so3_basis():
    return (_skew_unit(0, 1), _skew_unit(1, 2), _skew_unit(0, 2))


def _se3_basis():
    rot = [(0, 1), (0, 2), (1, 2)]
    out = []
    for i, j in rot:
        m = np.zeros((4, 4))
        m[i, j], m[j, i] = 1.0, -1.0
        out.append(m)
    for i in range(3):
        m = np.zeros((4, 4))
        m[i, 3] = 1.0
        out.append(m)
    return tuple(out)


_BASES = {GroupTag.SO3: _so3_basis(), GroupTag.SE3: _se3_basis()}
_BASIS_FLAT = {tag: np.stack(b).reshape(len(b), -1) for tag, b in _BASES.items()}
_EYE3 = np.eye(3)
_EYE3.setflags(write=False)
for _b in _BASES.values():
    for _m in _b:
        _m.setflags(write=False)


def basis(tag) -> tuple:
    """The ordered algebra basis matrices for ``tag`` (read-only arrays)."""
    return _BASES[GroupTag(tag)]


@dataclass(frozen=True, eq=False)
class GroupElement:
    mat: np.ndarray
    tag: GroupTag

    def __post_init__(self):
        tag = GroupTag(self.tag)
        mat = np.array(self.mat, dtype=float)
        k = tag.matrix_size
        if mat.shape != (k, k):
            raise ValueError(f"{tag.value} element must be {k}x{k}, got {mat.shape}")
        rot = mat[:3, :3]
        if np.linalg.norm(rot @ rot.T - np.eye(3)) >= ORTHO_TOL or np.linalg.det(rot) <= 0:
            raise ValueError(f"matrix is not in {tag.value}: rotation block not special orthogonal")
        if tag is GroupTag.SE3 and not np.array_equal(mat[3], [0.0, 0.0, 0.0, 1.0]):
            raise ValueError("SE3 bottom row must be exactly (0, 0, 0, 1)")
        mat.setflags(write=False)
        object.__setattr__(self, "tag", tag)
        object.__setattr__(self, "mat", mat)

    @classmethod
    def identity(cls, tag) -> "GroupElement":
        tag = GroupTag(tag)
        return cls(np.eye(tag.matrix_size), tag)

    @property
    def rotation(self) -> np.ndarray:
        return self.mat[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        if self.tag is not GroupTag.SE3:
            raise AttributeError("SO3 elements have no translation")
        return self.mat[:3, 3]

    def __matmul__(self, other):
        if isinstance(other, GroupElement):
            if other.tag is not self.tag:
                raise ValueError("cannot compose elements of different groups")
            return GroupElement(self.mat @ other.mat, self.tag)
        return self.mat @ np.asarray(other)


@dataclass(frozen=True)
class MembershipDefect:
    orthogonality: float
    determinant: float
    bottom_row: float

    @property
    def worst(self) -> float:
        return max(self.orthogonality, self.determinant, self.bottom_row)


def rz(angle: float, tag=GroupTag.SO3) -> GroupElement:
    c, s = math.cos(angle), math.sin(angle)
    r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    tag = GroupTag(tag)
    if tag is GroupTag.SO3:
        return GroupElement(r, tag)
    return GroupElement(se3_matrix(r, np.zeros(3)), tag)


def se3_matrix(rotation, translation) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = rotation
    m[:3, 3] = translation
    return m


def algebra_from_coords(coeffs, tag) -> np.ndarray:
    """``sum_i coeffs[i] * E_i`` for the group's algebra basis."""
    tag = GroupTag(tag)
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size != tag.algebra_dim:
        raise ValueError(f"{tag.value} algebra needs {tag.algebra_dim} coefficients, got {c.size}")
    k = tag.matrix_size
    return (c @ _BASIS_FLAT[tag]).reshape(k, k)


def coords_from_algebra(x, tag) -> np.ndarray:
    """Inverse of :func:`algebra_from_coords` (reads the upper-triangle entries)."""
    tag = GroupTag(tag)
    x = np.asarray(x, dtype=float)
    if tag is GroupTag.SO3:
        return np.array([x[0, 1], x[1, 2], x[0, 2]])
    return np.array([x[0, 1], x[0, 2], x[1, 2], x[0, 3], x[1, 3], x[2, 3]])


def _rodrigues_coeffs(theta):
    """(sin t / t, (1 - cos t) / t^2, (t - sin t) / t^3) without cancellation."""
    t2 = theta * theta
    if theta < SMALL_ANGLE:
        a = 1.0 - t2 / 6.0
    else:
        a = math.sin(theta) / theta
    half = 0.5 * theta
    b = 0.5 if half == 0.0 else 0.5 * (math.sin(half) / half) ** 2
    if theta < 1e-2:
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    else:
        c = (theta - math.sin(theta)) / (t2 * theta)
    return a, b, c


# Closed forms are written out entrywise: on 3x3/4x4 arrays the per-call
# overhead of numpy ops dominates the arithmetic.  With the generator
# S = [[0, p, q], [-p, 0, r], [-q, -r, 0]] one has
# S^2 = [[-p2-q2, -qr, pr], [-qr, -p2-r2, -pq], [pr, -pq, -q2-r2]].

def _rotation_rows(p, q, r, a, b):
    pp, qq, rr = p * p, q * q, r * r
    return [
        [1.0 - b * (pp + qq), a * p - b * q * r, a * q + b * p * r],
        [-a * p - b * q * r, 1.0 - b * (pp + rr), a * r - b * p * q],
        [-a * q + b * p * r, -a * r - b * p * q, 1.0 - b * (qq + rr)],
    ]


def _so3_exp_pqr(p, q, r):
    a, b, _ = _rodrigues_coeffs(math.sqrt(p * p + q * q + r * r))
    return np.array(_rotation_rows(p, q, r, a, b))


def _so3_exp_raw(s):
    return _so3_exp_pqr(float(s[0, 1]), float(s[0, 2]), float(s[1, 2]))


def _se3_exp_raw(xi):
    (_, p, q, v0), (_, _, r, v1), (_, _, _, v2), _ = xi.tolist()
    return _se3_exp_pqrv(p, q, r, v0, v1, v2)


def _se3_exp_pqrv(p, q, r, v0, v1, v2):
    a, b, c = _rodrigues_coeffs(math.sqrt(p * p + q * q + r * r))
    rows = _rotation_rows(p, q, r, a, b)
    s0, s1, s2 = p * v1 + q * v2, -p * v0 + r * v2, -q * v0 - r * v1
    t0, t1, t2 = p * s1 + q * s2, -p * s0 + r * s2, -q * s0 - r * s1
    rows[0].append(v0 + b * s0 + c * t0)
    rows[1].append(v1 + b * s1 + c * t1)
    rows[2].append(v2 + b * s2 + c * t2)
    rows.append([0.0, 0.0, 0.0, 1.0])
    return np.array(rows)


def _check_skew(s, tol=1e-10):
    if np.linalg.norm(s + s.T) >= tol:
        raise ValueError("rotation generator must be antisymmetric")


def so3_exp(s) -> GroupElement:
    """Rodrigues formula ``I + (sin t/t) S + ((1 - cos t)/t^2) S^2``."""
    s = np.asarray(s, dtype=float)
    if s.shape != (3, 3):
        raise ValueError("so(3) element must be 3x3")
    _check_skew(s)
    return GroupElement(_so3_exp_raw(s), GroupTag.SO3)


def se3_exp(xi) -> GroupElement:
    """Closed-form SE(3) exponential ``[[exp S, A v], [0, 1]]``.

    ``A = I + ((1 - cos t)/t^2) S + ((t - sin t)/t^3) S^2``; ``A = I`` when t = 0.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (4, 4):
        raise ValueError("se(3) element must be 4x4")
    _check_skew(xi[:3, :3])
    if np.any(xi[3] != 0.0):
        raise ValueError("se(3) element must have a zero bottom row")
    return GroupElement(_se3_exp_raw(xi), GroupTag.SE3)


def group_exp(x, tag) -> GroupElement:
    tag = GroupTag(tag)
    return so3_exp(x) if tag is GroupTag.SO3 else se3_exp(x)


def exp_raw(x, tag) -> np.ndarray:
    """Unchecked closed-form exponential on a raw algebra matrix (hot path)."""
    return _so3_exp_raw(x) if tag is GroupTag.SO3 else _se3_exp_raw(x)


def exp_coords(coeffs, tag) -> np.ndarray:
    """``exp(sum_i coeffs[i] E_i)`` as a raw matrix, straight from coordinates."""
    c = coeffs.tolist() if isinstance(coeffs, np.ndarray) else [float(v) for v in coeffs]
    if tag is GroupTag.SO3:
        e1, e2, e3 = c
        return _so3_exp_pqr(e1, e3, e2)
    return _se3_exp_pqrv(*c)


def left_translate(g, x) -> np.ndarray:
    """Pushforward of the algebra value ``x`` to ``T_g G``: the product ``g @ x``."""
    gm = g.mat if isinstance(g, GroupElement) else np.asarray(g, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape != gm.shape:
        raise ValueError(f"dimension mismatch: {gm.shape} vs {x.shape}")
    return gm @ x


def _polar_rotation(r, max_iter=50):
    # Newton-Schulz iteration for r (r^T r)^{-1/2}
    prev = math.inf
    for _ in range(max_iter):
        nxt = r @ (1.5 * _EYE3 - 0.5 * (r.T @ r))
        step = float(np.abs(nxt - r).max())
        if not step < 1e3:  # diverging (singular values beyond sqrt(3)) or NaN
            break
        # stop at 1e-15, or once rounding noise stops the update shrinking
        if step <= 1e-15 or (step < 1e-12 and step >= prev):
            return nxt
        r, prev = nxt, step
    raise NumericalError("polar projection did not converge in %d iterations" % max_iter)


def project_raw(mat, tag) -> np.ndarray:
    out = np.array(mat, dtype=float)
    out[:3, :3] = _polar_rotation(out[:3, :3])
    if tag is GroupTag.SE3:
        out[3] = (0.0, 0.0, 0.0, 1.0)
    return out


def project_to_group(g_raw, tag) -> GroupElement:
    """Replace the rotation block by its nearest rotation (polar factor)."""
    tag = GroupTag(tag)
    g_raw = np.asarray(g_raw, dtype=float)
    if g_raw.shape != (tag.matrix_size,) * 2:
        raise ValueError(f"expected a {tag.matrix_size}x{tag.matrix_size} matrix")
    if np.linalg.det(g_raw[:3, :3]) <= 0:
        raise ValueError("rotation block has nonpositive determinant; no nearby rotation")
    return GroupElement(project_raw(g_raw, tag), tag)


def rotation_angle(r) -> float:
    """Angle of the rotation ``r`` in [0, pi].

    Same value as ``arccos((tr r - 1)/2)`` but accurate near 0 and pi.
    """
    cos_t = 0.5 * (r[0, 0] + r[1, 1] + r[2, 2] - 1.0)
    sin_t = 0.5 * math.sqrt((r[2, 1] - r[1, 2]) ** 2 + (r[0, 2] - r[2, 0]) ** 2 + (r[1, 0] - r[0, 1]) ** 2)
    return math.atan2(sin_t, cos_t)


def group_distance(g1: GroupElement, g2: GroupElement) -> float:
    """Rotation angle between ``g1`` and ``g2``; for SE3 ``sqrt(angle^2 + |dt|^2)``.

    The SE3 value is a monitoring proxy, not a geodesic distance.
    """
    if g1.tag is not g2.tag:
        raise ValueError("group tags differ")
    return raw_group_distance(g1.mat, g2.mat, g1.tag)


def raw_group_distance(m1, m2, tag) -> float:
    angle = rotation_angle(m1[:3, :3].T @ m2[:3, :3])
    if tag == GroupTag.SO3:
        return angle
    dt = m2[:3, 3] - m1[:3, 3]
    return math.sqrt(angle * angle + float(dt @ dt))


def membership_defect_raw(mat, tag) -> MembershipDefect:
    rot = mat[:3, :3]
    ortho = float(np.linalg.norm(rot @ rot.T - np.eye(3)))
    det = abs(float(np.linalg.det(rot)) - 1.0)
    bottom = 0.0
    if tag is GroupTag.SE3:
        bottom = float(np.max(np.abs(mat[3] - np.array([0.0, 0.0, 0.0, 1.0]))))
    return MembershipDefect(ortho, det, bottom)


def check_group_membership(g) -> MembershipDefect:
    """Defect report; accepts a GroupElement or a raw ``(matrix, tag)`` pair."""
    if isinstance(g, GroupElement):
        return membership_defect_raw(g.mat, g.tag)
    mat, tag = g
    return membership_defect_raw(np.asarray(mat, dtype=float), GroupTag(tag))
