"""Acceptance criteria, each at its stated tolerance.

Every test records one ``[PASS]`` / ``[FAIL]`` line (printed in the terminal
summary and to stdout with ``-s``) before asserting.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from geoseek import costs, lie
from geoseek.averaging import (averaged_field, corrector_distances, lyapunov_monitor,
                               residual_slope, taylor_remainder)
from geoseek.eslaw import DitherSpec, ESField, validate_frequencies
from geoseek.experiments import builtin_config, builtin_names, run_experiment
from geoseek.integrate import IntegratorConfig, integrate, integrate_gradient
from geoseek.lie import algebra_from_coords, se3_exp, so3_exp
from geoseek.manifold import circle, euclidean

S1 = circle()


def verdict(log, n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    log.append(line)
    print(line)
    assert ok, line


def series_exp(x, terms=30):
    out = np.eye(len(x))
    term = np.eye(len(x))
    for k in range(1, terms):
        term = term @ x / k
        out = out + term
    return out


@pytest.fixture(scope="module")
def group_runs(tmp_path_factory):
    """Full SO(3) and SE(3) built-in runs, each done once for criteria 1, 2, 6 and 10."""
    out = tmp_path_factory.mktemp("groups")
    return {name: (run_experiment(builtin_config(name), out), out)
            for name in ("so3_paper", "se3_paper")}


def test_criterion_01_so3_reproduction(group_runs, acceptance_log):
    rec, _ = group_runs["so3_paper"]
    ok = (rec.complete and rec.final_cost < 0.02 and rec.identity_distance < 0.2
          and rec.wall_seconds < 30.0)
    verdict(acceptance_log, 1, ok,
            f"SO(3) final cost {rec.final_cost:.4g} (<0.02), angle to I {rec.identity_distance:.4g} rad (<0.2), "
            f"{rec.wall_seconds:.1f} s (<30)")


def test_criterion_02_se3_reproduction(group_runs, acceptance_log):
    rec, _ = group_runs["se3_paper"]
    ok = (rec.complete and abs(rec.initial_cost - 3.585786) <= 1e-6
          and rec.final_cost < 0.05 * rec.initial_cost and rec.wall_seconds < 60.0)
    verdict(acceptance_log, 2, ok,
            f"SE(3) initial cost {rec.initial_cost:.7f} (3.585786+-1e-6), final {rec.final_cost:.4g} "
            f"(<{0.05 * rec.initial_cost:.4g}), {rec.wall_seconds:.1f} s (<60)")


def test_criterion_03_averaging_slope(acceptance_log):
    es = ESField(DitherSpec((0.1,), ("1",), 50.0), costs.cosine(1.0), S1)
    start = time.perf_counter()
    fit = residual_slope(es, es.cost, [1.7], scales=(0.2, 0.1, 0.05, 0.025))
    wall = time.perf_counter() - start
    ok = 3.5 <= fit.slope <= 4.5 and wall < 10.0
    verdict(acceptance_log, 3, ok, f"S1 residual log-log slope {fit.slope:.4f} in [3.5, 4.5], {wall:.2f} s (<10)")


def test_criterion_04_corrector_closeness(acceptance_log):
    start = time.perf_counter()
    sups = []
    for w in (50.0, 100.0):
        es = ESField(DitherSpec((0.1,), ("1",), w), costs.cosine(1.0), S1)
        cfg = IntegratorConfig(1e-4, 0.25, "CHART_RK4", sample_stride=20)
        _, d = corrector_distances(es, [1.5], cfg)
        sups.append(float(d.max()))
    wall = time.perf_counter() - start
    ratio = sups[1] / sups[0]
    ok = 0.3 <= ratio <= 0.7 and wall < 20.0
    verdict(acceptance_log, 4, ok,
            f"sup corrector distance {sups[0]:.3e} -> {sups[1]:.3e}, ratio {ratio:.3f} in [0.3, 0.7], "
            f"{wall:.1f} s (<20)")


def test_criterion_05_lyapunov_descent(acceptance_log):
    s1 = integrate_gradient(costs.cosine(1.0), [2.5], (0.1,), IntegratorConfig(0.1, 500.0), space=S1)
    so3 = integrate_gradient(costs.so3_trace(), lie.rz(math.pi / 4), (0.1, 0.1, 0.1),
                             IntegratorConfig(0.1, 500.0, "LIE_EULER"))
    reps = [lyapunov_monitor(s1), lyapunov_monitor(so3)]
    ok = all(r.descending for r in reps) and all(r.max_jump <= 1e-8 * (1 + r.initial_cost) for r in reps)
    verdict(acceptance_log, 5, ok,
            "max positive cost jump S1 {:.2e}, SO(3) {:.2e} (<= 1e-8(1+J0))".format(*(r.max_jump for r in reps)))


def test_criterion_06_structure_preservation(group_runs, acceptance_log):
    worst = {}
    for name, (rec, _) in group_runs.items():
        worst[name] = rec.max_defect if rec.complete else math.inf
    rng = np.random.default_rng(20240601)
    sub = 0.0
    for _ in range(100):
        c3, c6 = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 6)
        t, s = rng.uniform(-1, 1, 2)
        for x, ex in ((algebra_from_coords(c3, "SO3"), so3_exp), (algebra_from_coords(c6, "SE3"), se3_exp)):
            sub = max(sub, float(np.abs(ex(t * x).mat @ ex(s * x).mat - ex((t + s) * x).mat).max()))
    ok = max(worst.values()) < 1e-12 and sub < 1e-10
    verdict(acceptance_log, 6, ok,
            f"membership defect SO(3) {worst['so3_paper']:.2e}, SE(3) {worst['se3_paper']:.2e} (<1e-12); "
            f"one-parameter subgroup error {sub:.2e} over 100 draws (<1e-10)")


def test_criterion_07_frequency_validator(acceptance_log):
    ok3 = validate_frequencies(["2", "4.1", "6.2"]) == []
    ok6 = validate_frequencies(["2", "4.1", "6.2", "8.3", "10.4", "12.5"]) == []
    bad = {str(v) for v in validate_frequencies(["1", "2", "3"])}
    # decimal text is read exactly: 0.1 + 0.2 = 0.3 is caught, which float equality misses
    exact = [str(v) for v in validate_frequencies(["0.1", "0.2", "0.3"])] == ["2*w1 = w2", "w1 + w2 = w3"]
    ok = ok3 and ok6 and bad == {"2*w1 = w2", "w1 + w2 = w3"} and exact and Fraction("4.1") == Fraction(41, 10)
    verdict(acceptance_log, 7, ok, f"accepts both multiplier sets, rejects (1,2,3) with {sorted(bad)}")


def test_criterion_08_oracle_equivalences(acceptance_log):
    rng = np.random.default_rng(7)
    err = 0.0
    for _ in range(50):
        c = rng.normal(size=3)
        x = algebra_from_coords(c * rng.uniform(0, math.pi) / np.linalg.norm(algebra_from_coords(c, "SO3")), "SO3")
        err = max(err, float(np.abs(so3_exp(x).mat - series_exp(x)).max()))
        c6 = rng.normal(size=6)
        x6 = algebra_from_coords(c6 * rng.uniform(0, math.pi) / np.linalg.norm(algebra_from_coords(c6, "SE3")), "SE3")
        err = max(err, float(np.abs(se3_exp(x6).mat - series_exp(x6)).max()))
    es = ESField(DitherSpec((0.1,), ("1",), 100.0), costs.quadratic(), euclidean(1))
    x = 1.0
    closed = -(0.1 ** 2 / 2) * 2 * x
    avg = float(averaged_field(es, [x])[0])
    ok = err < 1e-10 and abs(avg - closed) < 1e-4
    verdict(acceptance_log, 8, ok,
            f"exp vs 30-term series {err:.2e} (<1e-10); R1 averaged field {avg:.6g} vs {closed:.6g} (<1e-4)")


def test_criterion_09_taylor_scaling(acceptance_log):
    c = costs.cosine(1.0)
    s1 = taylor_remainder(c, [1.7], [1.0], order=1, space=S1).slope
    s2 = taylor_remainder(c, [1.7], [1.0], order=2, space=S1).slope
    ok = 1.8 <= s1 <= 2.2 and 2.7 <= s2 <= 3.3
    verdict(acceptance_log, 9, ok, f"remainder slopes {s1:.3f} in [1.8, 2.2], {s2:.3f} in [2.7, 3.3]")


def test_criterion_10_determinism(group_runs, acceptance_log, tmp_path):
    same = {}
    for name in builtin_names():
        cfg = builtin_config(name)
        if name in group_runs:
            rec, first_dir = group_runs[name]
            first = (first_dir / cfg.output).read_bytes()
        else:
            run_experiment(cfg, tmp_path / "a")
            first = (tmp_path / "a" / cfg.output).read_bytes()
        run_experiment(cfg, tmp_path / "b")
        same[name] = first == (tmp_path / "b" / cfg.output).read_bytes()
    ok = all(same.values())
    verdict(acceptance_log, 10, ok, "byte-identical CSV on rerun: " + ", ".join(
        f"{k} {'yes' if v else 'NO'}" for k, v in same.items()))
