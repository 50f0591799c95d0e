"""Geodesic-dither extremum seeking law.

The closed loop is ``x' = f(x, t)`` with

    f(x, t) = -sum_i a_i sin(w_i t) J(exp_x(sum_j a_j sin(w_j t) d/dx_j)) d/dx_i

on a chart manifold, and the same coefficients applied to the left-translated
basis ``g E_i`` on a matrix group (dither ``g exp(sum_j a_j sin(w_j t) E_j)``).
Frequencies are ``w_i = w * r_i`` with exact rational multipliers ``r_i``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence, Union

import numpy as np

from . import lie
from .errors import FrequencyError, OracleContractError
from .lie import GroupElement, GroupTag
from .manifold import ManifoldDescriptor, exp_map

GAIN = -1.0


def parse_multiplier(value) -> Fraction:
    """Exact rational from decimal text (``"4.1"`` -> 41/10), int or Fraction.

    Floats are read through their shortest repr so ``4.1`` also gives 41/10.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a frequency multiplier")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite multiplier {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot read a rational multiplier from {value!r}")


@dataclass(frozen=True)
class Violation:
    """One broken non-resonance condition; indices are 0-based."""

    kind: str  # "equal" | "double" | "sum"
    indices: tuple

    def __str__(self):
        w = [f"w{i + 1}" for i in self.indices]
        if self.kind == "equal":
            return f"{w[0]} = {w[1]}"
        if self.kind == "double":
            return f"2*{w[0]} = {w[1]}"
        return f"{w[1]} + {w[2]} = {w[0]}"


def validate_frequencies(multipliers: Sequence) -> list[Violation]:
    """Every violated condition among: r_i != r_j, 2 r_i != r_j (j != i),
    r_i != r_j + r_k for distinct i, j, k.  Empty list means the set is valid.
    """
    r = [parse_multiplier(m) for m in multipliers]
    for i, v in enumerate(r):
        if v <= 0:
            raise ValueError(f"multiplier {i + 1} is not positive: {v}")
    n = len(r)
    out = []
    for i, j in itertools.combinations(range(n), 2):
        if r[i] == r[j]:
            out.append(Violation("equal", (i, j)))
    for i, j in itertools.permutations(range(n), 2):
        if 2 * r[i] == r[j]:
            out.append(Violation("double", (i, j)))
    for i in range(n):
        for j, k in itertools.combinations([m for m in range(n) if m != i], 2):
            if r[i] == r[j] + r[k]:
                out.append(Violation("sum", (i, j, k)))
    return out


def common_period(multipliers: Sequence) -> float:
    """Least common period of ``sin(r_i tau)``: ``2 pi lcm(q) / gcd(p_i lcm(q) / q_i)``."""
    r = [parse_multiplier(m) for m in multipliers]
    if not r or any(v <= 0 for v in r):
        raise ValueError("multipliers must be positive")
    lcm_q = math.lcm(*(v.denominator for v in r))
    g = math.gcd(*(v.numerator * (lcm_q // v.denominator) for v in r))
    try:
        ratio = float(Fraction(lcm_q, g))
    except OverflowError:
        raise ArithmeticError("common period overflows a float") from None
    period = 2.0 * math.pi * ratio
    if not math.isfinite(period):
        raise ArithmeticError("common period overflows a float")
    return period


@dataclass(frozen=True)
class DitherSpec:
    amplitudes: tuple
    multipliers: tuple
    base_frequency: float = 1.0

    def __post_init__(self):
        amps = tuple(float(a) for a in self.amplitudes)
        mults = tuple(parse_multiplier(m) for m in self.multipliers)
        if len(amps) != len(mults):
            raise ValueError("need one multiplier per amplitude")
        if not amps:
            raise ValueError("empty dither")
        if not all(a > 0 and math.isfinite(a) for a in amps):
            raise ValueError("amplitudes must be positive and finite")
        if not (self.base_frequency > 0 and math.isfinite(self.base_frequency)):
            raise ValueError("base frequency must be positive")
        violations = validate_frequencies(mults)
        if violations:
            raise FrequencyError(violations)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "multipliers", mults)
        object.__setattr__(self, "base_frequency", float(self.base_frequency))
        object.__setattr__(self, "_a", np.array(amps))
        object.__setattr__(self, "_w", self.base_frequency * np.array([float(m) for m in mults]))

    @property
    def n(self) -> int:
        return len(self.amplitudes)

    @property
    def amplitude_array(self) -> np.ndarray:
        return self._a.copy()

    @property
    def frequencies(self) -> np.ndarray:
        return self._w.copy()

    @property
    def period(self) -> float:
        """Common period in physical time, ``common_period(r) / w``."""
        return common_period(self.multipliers) / self.base_frequency

    def scaled(self, s: float) -> "DitherSpec":
        return DitherSpec(tuple(s * a for a in self.amplitudes), self.multipliers, self.base_frequency)

    def with_max_amplitude(self, amax: float) -> "DitherSpec":
        return self.scaled(amax / max(self.amplitudes))

    def with_omega(self, omega: float) -> "DitherSpec":
        return DitherSpec(self.amplitudes, self.multipliers, omega)


def dither_vector(t: float, spec: DitherSpec) -> np.ndarray:
    """Dither coefficients ``a_i sin(w r_i t)``."""
    return spec._a * np.sin(spec._w * t)


def dither_matrix(ts, spec: DitherSpec) -> np.ndarray:
    """Row ``k`` is ``dither_vector(ts[k])``."""
    ts = np.asarray(ts, dtype=float)
    return spec._a * np.sin(np.outer(ts, spec._w))


@dataclass
class CostOracle:
    """Black-box cost ``J >= 0``.

    Chart costs receive the coordinate vector, group costs the raw matrix.
    ``target`` is the known minimiser when one is registered (used only for
    monitoring, never by the control law).
    """

    fn: Callable[[Any], float]
    target: Any = None
    name: str = ""

    def __call__(self, x) -> float:
        return float(self.fn(x))


@dataclass
class CountingOracle(CostOracle):
    """CostOracle that counts evaluations (single-threaded use only)."""

    calls: int = field(default=0, init=False)

    def __call__(self, x) -> float:
        self.calls += 1
        return float(self.fn(x))


Space = Union[ManifoldDescriptor, GroupTag]


def _checked(value: float) -> float:
    if not value >= 0.0:
        raise OracleContractError(f"cost oracle returned {value!r}; expected a nonnegative number")
    return value


def _raw(x):
    return x.mat if isinstance(x, GroupElement) else x


@dataclass(frozen=True)
class ESField:
    """The extremum-seeking vector field bound to a chart manifold or a group.

    Calling the field returns the integrator-ready tangent: the coefficient
    vector on a chart, the body-frame algebra matrix ``sum_i c_i E_i`` on a
    group.  :func:`es_field_eval` gives the spatial value ``g sum_i c_i E_i``.
    """

    spec: DitherSpec
    cost: Callable
    space: Any

    def __post_init__(self):
        space = self.space
        if not isinstance(space, ManifoldDescriptor):
            space = GroupTag(space)
            object.__setattr__(self, "space", space)
        if self.dim != self.spec.n:
            raise ValueError(f"dither has {self.spec.n} components but the space has dimension {self.dim}")

    @property
    def is_group(self) -> bool:
        return isinstance(self.space, GroupTag)

    @property
    def dim(self) -> int:
        return self.space.algebra_dim if self.is_group else self.space.dim

    @property
    def gain(self) -> float:
        return GAIN

    def with_spec(self, spec: DitherSpec) -> "ESField":
        return ESField(spec, self.cost, self.space)

    def coefficients(self, x, t: float) -> np.ndarray:
        """``(k a_i sin(w_i t) J(dithered))_i`` with exactly one cost call."""
        d = dither_vector(t, self.spec)
        j = _checked(float(self.cost(_dithered_raw(x, d, self))))
        return GAIN * d * j

    def __call__(self, x, t: float):
        c = self.coefficients(x, t)
        if self.is_group:
            return lie.algebra_from_coords(c, self.space)
        return c

    def batch_coefficients(self, x, ts) -> np.ndarray:
        """Coefficients at every time in ``ts`` (one cost call per time).

        Same values as repeated :meth:`coefficients` calls; vectorises the
        dither and the flat-chart exponential.
        """
        d = dither_matrix(ts, self.spec)
        if not self.is_group and self.space.flat:
            m = self.space
            base = m.check(x)
            pts = base + d
            if m.periodic:
                lo, hi = m.chart_domain
                pts = lo + np.mod(pts - lo, hi - lo)
            elif not all(m.contains(p) for p in pts):
                pts = [_dithered_raw(base, row, self) for row in d]
            j = np.array([self.cost(p) for p in pts], dtype=float)
        else:
            j = np.array([self.cost(_dithered_raw(x, row, self)) for row in d], dtype=float)
        if not np.all(j >= 0.0):
            bad = j[~(j >= 0.0)][0]
            raise OracleContractError(f"cost oracle returned {bad!r}; expected a nonnegative number")
        return GAIN * d * j[:, None]


def _dithered_raw(x, d, field: ESField):
    if field.is_group:
        return _raw(x) @ lie.exp_coords(d, field.space)
    m = field.space
    if m.flat:
        # straight-line geodesic, as in exp_map's flat branch
        y = np.asarray(x, dtype=float) + d
        if m.contains(y):
            return m.wrap(y)
    return exp_map(m, x, d, 1.0)


def dithered_point(x, t: float, spec: DitherSpec, space):
    """Chart: ``exp_x(dither)``; group: ``g exp(sum_i d_i E_i)`` via closed forms."""
    d = dither_vector(t, spec)
    if isinstance(space, ManifoldDescriptor):
        return exp_map(space, x, d, 1.0)
    tag = GroupTag(space)
    g = _raw(x)
    out = g @ lie.exp_coords(d, tag)
    if isinstance(x, GroupElement):
        return GroupElement(out, tag)
    return out


def es_field_eval(x, t: float, field: ESField):
    """Value of the ES field at ``(x, t)``.

    Chart: coefficient vector on ``d/dx_i``.  Group: the matrix
    ``g @ sum_i c_i E_i`` in ``T_g G``.
    """
    c = field.coefficients(x, t)
    if field.is_group:
        return lie.left_translate(_raw(x), lie.algebra_from_coords(c, field.space))
    return c
