import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as spi
from scipy.special import j1

from geoseek import costs, lie
from geoseek.averaging import (averaged_field, averaging_residual, closeness_report,
                               corrector_distances, corrector_field, corrector_flow,
                               gradient_field, lyapunov_monitor, residual_slope,
                               taylor_remainder)
from geoseek.errors import DegenerateFitError, DomainError
from geoseek.eslaw import DitherSpec, ESField
from geoseek.fields import simpson_weights
from geoseek.integrate import IntegratorConfig, integrate, integrate_gradient
from geoseek.manifold import circle, euclidean

R1, S1 = euclidean(1), circle()
SO3_MULT = ("2", "4.1", "6.2")


def s1_field(a=0.1, omega=50.0, theta_star=1.0):
    return ESField(DitherSpec((a,), ("1",), omega), costs.cosine(theta_star), S1)


def bessel_average(a, phi):
    # <-a sin s (1 - cos(phi + a sin s))> over one period
    return -a * math.sin(phi) * j1(a)


# averaged field ------------------------------------------------------------

def test_simpson_weights():
    w = simpson_weights(8)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    x = np.linspace(0, 1, 9)
    assert w @ x**3 == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(ValueError):
        simpson_weights(7)


def test_averaged_field_quadratic_example():
    es = ESField(DitherSpec((0.1,), ("1",), 100.0), costs.quadratic(), R1)
    assert averaged_field(es, [1.0])[0] == pytest.approx(-0.01, abs=1e-12)
    assert averaged_field(es, [0.0])[0] == pytest.approx(0.0, abs=1e-15)
    const = ESField(DitherSpec((0.1,), ("1",)), costs.constant(3.0), S1)
    assert abs(averaged_field(const, [2.0])[0]) < 1e-15


@given(st.floats(0.0, 2 * math.pi, exclude_max=True), st.floats(0.01, 0.5))
def test_averaged_field_matches_bessel_oracle(theta, a):
    es = s1_field(a, 7.0)
    assert averaged_field(es, [theta])[0] == pytest.approx(bessel_average(a, theta - 1.0), abs=1e-13)


@settings(max_examples=20)
@given(st.floats(0, 100), st.floats(0.2, 3.0))
def test_averaged_field_window_and_resolution(start, th):
    es = ESField(DitherSpec((0.1, 0.1, 0.1), SO3_MULT), costs.so3_trace(), "SO3")
    g = lie.so3_exp(lie.algebra_from_coords([th, 0.3, -0.2], "SO3")).mat
    base = averaged_field(es, g, 512)
    assert np.abs(averaged_field(es, g, 1024) - base).max() < 1e-12
    assert np.abs(averaged_field(es, g, 512, start=start) - base).max() < 1e-12


def test_averaged_field_independent_of_omega():
    a = averaged_field(s1_field(omega=1.0), [2.0])
    b = averaged_field(s1_field(omega=80.0), [2.0])
    assert np.allclose(a, b, atol=1e-15, rtol=1e-12)


# gradient field ----------------------------------------------------------

def test_gradient_field_examples():
    assert gradient_field(costs.quadratic(), [1.0], [0.1], R1)[0] == pytest.approx(-0.01, abs=1e-10)
    assert gradient_field(costs.cosine(1.0), [1.0], [0.1], S1)[0] == pytest.approx(0.0, abs=1e-12)
    th = 1.0 + 0.5
    assert gradient_field(costs.cosine(1.0), [th], [0.2], S1)[0] == pytest.approx(
        -0.02 * math.sin(0.5), abs=1e-10)


def test_gradient_field_on_so3_about_z_axis():
    # J = 3 - tr(rz(th)) = 2 - 2 cos th; only the generator e1 (rotation about z) sees it
    g = lie.rz(0.6)
    v = gradient_field(costs.so3_trace(), g, [0.1, 0.1, 0.1], "SO3")
    assert abs(v[0]) == pytest.approx(0.01 * math.sin(0.6), abs=1e-9)
    assert np.abs(v[1:]).max() < 1e-9


# residuals / slopes --------------------------------------------------------

def test_residual_examples():
    es = ESField(DitherSpec((0.1,), ("1",), 100.0), costs.quadratic(), R1)
    rep = averaging_residual(es, es.cost, [[1.0], [-2.0]])
    assert rep.residual < 1e-9 and rep.scale == 0.1
    s1 = s1_field(0.2)
    r = averaging_residual(s1, s1.cost, [[1.7]]).residual
    expect = abs(bessel_average(0.2, 0.7) + 0.02 * math.sin(0.7))
    assert r == pytest.approx(expect, rel=1e-5)
    with pytest.raises(ValueError):
        averaging_residual(s1, s1.cost, [])


@settings(max_examples=15)
@given(st.permutations([[0.3], [1.7], [2.9], [5.0]]))
def test_residual_probe_order_invariant(probes):
    es = s1_field(0.2)
    a = averaging_residual(es, es.cost, probes).residual
    b = averaging_residual(es, es.cost, [[0.3], [1.7], [2.9], [5.0]]).residual
    assert a == b


def test_residual_slope_is_four_on_circle():
    es = s1_field()
    fit = residual_slope(es, es.cost, [1.7])
    assert float(fit) == pytest.approx(4.0, abs=0.1)
    assert np.all(np.diff(fit.ys) < 0)


def test_residual_slope_degenerate_and_invalid():
    es = ESField(DitherSpec((0.1,), ("1",)), costs.quadratic(), R1)
    with pytest.raises(DegenerateFitError):
        residual_slope(es, es.cost, [1.0])
    s1 = s1_field()
    with pytest.raises(ValueError):
        residual_slope(s1, s1.cost, [1.7], scales=(0.1, 0.05))
    with pytest.raises(DomainError):
        residual_slope(s1, s1.cost, [1.7], scales=(4.0, 0.1, 0.05))


def test_taylor_remainder_orders():
    c = costs.cosine(1.0)
    assert taylor_remainder(c, [1.7], [1.0], order=1, space=S1).slope == pytest.approx(2.0, abs=0.1)
    assert taylor_remainder(c, [1.7], [1.0], order=2, space=S1).slope == pytest.approx(3.0, abs=0.1)
    so3 = costs.so3_trace()
    g = lie.so3_exp(lie.algebra_from_coords([0.4, 0.2, -0.3], "SO3")).mat
    assert taylor_remainder(so3, g, [0.3, -0.5, 1.0], order=1, space="SO3").slope == pytest.approx(2.0, abs=0.15)


def test_taylor_remainder_linear_cost_degenerate():
    lin = costs.CostOracle(lambda x: 5.0 + float(x[0]))
    with pytest.raises(DegenerateFitError):
        taylor_remainder(lin, [0.3], [1.0], order=1, space=R1)


# descent -------------------------------------------------------------------

def test_lyapunov_monitor():
    cfg = IntegratorConfig(0.5, 200.0, "CHART_RK4", sample_stride=4)
    tr = integrate_gradient(costs.cosine(1.0), [2.5], (0.1,), cfg, space=S1)
    rep = lyapunov_monitor(tr)
    assert rep.descending and rep.positive_jumps == 0
    es = s1_field(omega=5.0)
    wobble = lyapunov_monitor(integrate(es, [2.5], IntegratorConfig(0.01, 20.0)))
    assert not wobble.descending and wobble.positive_jumps > 0


# corrector -----------------------------------------------------------------

def test_corrector_field_vanishes_on_whole_periods():
    es = s1_field(omega=10.0)
    T = es.spec.period
    assert np.array_equal(corrector_field(es, 0.0, [2.0]), [0.0])
    for k in (1, 3):
        assert abs(corrector_field(es, k * T, [2.0])[0]) < 1e-12
    assert corrector_field(es, 0.3 * T + 2 * T, [2.0])[0] == pytest.approx(
        corrector_field(es, 0.3 * T, [2.0])[0], abs=1e-13)


@settings(max_examples=20)
@given(st.floats(0.01, 0.99), st.floats(0.0, 2 * math.pi, exclude_max=True))
def test_corrector_field_matches_quad(frac, theta):
    es = s1_field(omega=4.0)
    t = frac * es.spec.period
    fhat = averaged_field(es, [theta])[0]
    oracle, _ = spi.quad(lambda s: fhat - es.coefficients([theta], s)[0], 0.0, t,
                         epsabs=1e-14, epsrel=1e-12)
    assert corrector_field(es, t, [theta])[0] == pytest.approx(oracle, abs=1e-11)


def test_corrector_group_not_implemented():
    es = ESField(DitherSpec((0.1, 0.1, 0.1), SO3_MULT), costs.so3_trace(), "SO3")
    with pytest.raises(NotImplementedError):
        corrector_field(es, 0.1, np.eye(3))


def test_corrector_flow_shrinks_with_omega():
    sups = []
    for w in (20.0, 40.0):
        es = s1_field(omega=w)
        cfg = IntegratorConfig(2e-4, 0.4, "CHART_RK4", sample_stride=25)
        _, d = corrector_distances(es, [1.5], cfg)
        sups.append(d.max())
    assert sups[1] / sups[0] == pytest.approx(0.5, abs=0.1)


def test_corrector_flow_single_point():
    es = s1_field(omega=20.0)
    cfg = IntegratorConfig(1e-3, 1.0)
    res = corrector_flow(es, [1.5], 0.0, cfg)
    assert res.distance == 0.0 and np.array_equal(res.x, res.z)
    res = corrector_flow(es, [1.5], 0.05, cfg)
    assert 0 < res.distance < 0.01
    with pytest.raises(ValueError):
        corrector_flow(es, [1.5], -1.0, cfg)


# closeness -----------------------------------------------------------------

def test_closeness_from_target_stays_close():
    es = s1_field(omega=50.0)
    rep = closeness_report(es, [1.0], IntegratorConfig(0.01, 20.0, sample_stride=100))
    assert rep.entered and rep.t_enter == 0.0
    assert rep.sup_avg_target < 1e-12 and rep.grad_target.max() < 1e-12
    assert rep.es_target.max() < 0.01


def test_closeness_triangle_and_entry():
    es = s1_field(a=0.3, omega=50.0)
    rep = closeness_report(es, [1.5], IntegratorConfig(0.01, 100.0, sample_stride=100), radius=0.3)
    assert rep.triangle_defect() <= 1e-12
    assert rep.entered and 0 < rep.t_enter <= 100.0
    assert np.all(np.diff(rep.avg_target) <= 1e-12)
    assert rep.sup_es_avg < 0.05


def test_closeness_es_avg_decreases_with_omega():
    sups = []
    for w in (10.0, 40.0):
        es = s1_field(a=0.3, omega=w)
        sups.append(closeness_report(es, [1.5], IntegratorConfig(0.005, 20.0, sample_stride=100)).sup_es_avg)
    assert sups[1] < sups[0]


def test_closeness_needs_target_and_divisible_step():
    es = ESField(DitherSpec((0.1,), ("1",)), costs.CostOracle(lambda x: 1.0), S1)
    with pytest.raises(ValueError):
        closeness_report(es, [1.0], IntegratorConfig(0.1, 1.0))
    with pytest.raises(ValueError):
        closeness_report(s1_field(), [1.0], IntegratorConfig(0.1, 1.0, sample_stride=2), slow_step=0.3)
