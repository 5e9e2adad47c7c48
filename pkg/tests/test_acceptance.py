"""Acceptance criteria, one timed test per criterion.

Each test carries ``@pytest.mark.acceptance(n)``; the terminal summary prints
one PASS/FAIL line per criterion.
"""

import math
import time

import mpmath
import numpy as np
import pytest

from cmpkit import (
    CmbParams,
    CmpbParams,
    CmpParams,
    FinitePmf,
    cmb_char_residual,
    cmb_mode,
    cmb_truncated_pmf,
    cmp_asymptotic_profile,
    cmp_char_residual,
    cmp_factorial_power_moment,
    cmp_log_norm_const,
    cmp_mean_deviation,
    cmp_median_and_bound,
    cmp_mode,
    cmp_truncated_pmf,
    cmpb_brute_force,
    cmpb_pmf,
    convergence_table,
    loglog_fit,
    poincare_estimate,
    power_bias,
    st_order_leq,
    stein_bound_check,
    stein_factor_g,
    stein_solution,
    thm31_bound,
    tv_distance,
)
from cmpkit.moments import pmf_argmax
from cmpkit.stein import delta_bound, g_branch_labels, perturb_pmf, random_test_functions
from cmpkit.transforms import variance_and_mean


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


LAMS = (0.5, 1.0, 2.0, 5.0)
NUS = (0.3, 0.5, 1.0, 2.0, 4.0)


@pytest.mark.acceptance(1)
def test_ac1_closed_form_normalizers():
    with Timer() as t:
        for lam in (0.1, 1.0, 5.0, 50.0):
            assert abs(cmp_log_norm_const(CmpParams(lam, 1.0)).value - lam) <= 1e-12
        for lam in (0.1, 0.5, 0.9):
            z = math.exp(cmp_log_norm_const(CmpParams(lam, 0.0)).value)
            assert abs(z - 1 / (1 - lam)) <= 1e-12
        for lam in (0.5, 1.0, 4.0, 25.0):
            z = math.exp(cmp_log_norm_const(CmpParams(lam, 2.0)).value)
            i0 = float(mpmath.besseli(0, 2 * mpmath.sqrt(lam)))
            assert abs(z - i0) <= 1e-10 * i0
    assert t.elapsed < 1.0


@pytest.mark.acceptance(2)
def test_ac2_factorial_power_identity():
    with Timer() as t:
        worst = 0.0
        for lam in LAMS + (10.0,):
            for nu in NUS:
                for r in (1, 2, 3):
                    ev = cmp_factorial_power_moment(CmpParams(lam, nu), r)
                    worst = max(worst, abs(ev.value - lam**r))
    assert worst <= 1e-8
    assert t.elapsed < 1.0


@pytest.mark.acceptance(3)
def test_ac3_characterisation_residuals():
    with Timer() as t:
        for lam in LAMS:
            for nu in (0.0, 0.5, 1.0, 2.0) if lam < 1 else (0.5, 1.0, 2.0):
                p = CmpParams(lam, nu)
                law = cmp_truncated_pmf(p, 1e-14)
                fs = random_test_functions(50, law.end + 2)
                assert max(cmp_char_residual(law, p, f) for f in fs) <= 1e-8
                bad = perturb_pmf(law, int(np.argmax(law.probs)))
                fs_bad = random_test_functions(50, bad.end + 2)
                assert max(cmp_char_residual(bad, p, f) for f in fs_bad) > 1e-4
        for n in (5, 10, 20):
            for pp in (0.1, 0.5, 0.9):
                for nu in (0.5, 1.0, 2.0):
                    params = CmbParams(n, pp, nu)
                    assert max(cmb_char_residual(params, f) for f in random_test_functions(50, n + 2)) <= 1e-8
    assert t.elapsed < 5.0


def _stein_instances(branch, count, rng):
    out = []
    while len(out) < count:
        if branch == 1:
            lam, nu = rng.uniform(1.05, 10.0), rng.uniform(1.0, 3.0)
        elif branch == 2:
            lam, nu = rng.uniform(1.0, 8.0), rng.uniform(0.3, 1.0)
        elif branch == 3:
            lam, nu = rng.uniform(0.05, 1.0), rng.uniform(1.0, 4.0)
        else:
            lam, nu = rng.uniform(0.05, 0.9), rng.uniform(0.0, 0.95)
        p = CmpParams(float(lam), float(nu))
        big_j = cmp_truncated_pmf(p, 1e-14).end + 5
        size = int(rng.integers(1, 8))
        out.append((p, set(rng.integers(0, big_j + 1, size).tolist()), big_j))
    return out


@pytest.mark.acceptance(4)
def test_ac4_stein_machinery():
    rng = np.random.default_rng(0x5EED)
    with Timer() as t:
        count = 0
        for branch in (1, 2, 3, 4):
            for p, target, big_j in _stein_instances(branch, 125, rng):
                assert branch in g_branch_labels(p)
                sol = stein_solution(p, target, big_j)
                assert np.max(np.abs(sol.residuals())) <= 1e-9
                sup_f, sup_d = stein_bound_check(p, target, big_j)
                assert sup_f <= stein_factor_g(p) + 1e-12
                assert sup_d <= min(1.0, 1.0 / p.lam) + 1e-12
                count += 1
        assert count >= 500
        for lam, nu in [(1.0, 1.0), (4.0, 2.0), (0.5, 0.5), (3.0, 1.5), (0.3, 0.0)]:
            p = CmpParams(lam, nu)
            sol = stein_solution(p, {1}, 20)
            assert abs((sol.values[2] - sol.values[1]) - delta_bound(p)) <= 1e-10
    assert t.elapsed < 30.0


@pytest.mark.acceptance(5)
def test_ac5_cmb_to_cmp_dominance():
    with Timer() as t:
        for n in (5, 10, 20, 50, 100):
            for lam in (0.5, 1.0, 2.0):
                for nu in (0.5, 1.0, 1.5, 2.0):
                    rep = thm31_bound(n, lam, nu)
                    assert rep.exact_tv <= rep.bound + rep.exact_tv_error, (n, lam, nu)
                    if nu == 1.0:
                        m = min(lam, lam * lam)
                        assert m / (32 * n) <= rep.exact_tv <= m / n, (n, lam)
    assert t.elapsed < 60.0


@pytest.mark.acceptance(6)
def test_ac6_numerical_study():
    with Timer() as t:
        ns = [20, 40, 80, 160, 320]
        half = loglog_fit(convergence_table(1.0, 0.5, ns))
        three_halves = loglog_fit(convergence_table(1.0, 1.5, ns))
    assert abs(half.slope - (-0.502)) <= 0.05
    assert abs(three_halves.slope - (-0.974)) <= 0.05
    assert t.elapsed < 120.0


@pytest.mark.acceptance(7)
def test_ac7_ordering_suite():
    rng = np.random.default_rng(7)
    with Timer() as t:
        for n in (5, 20):
            for pp in (0.1, 0.5):
                for nu in (0.5, 1.0, 2.0):
                    law = cmb_truncated_pmf(CmbParams(n, pp, nu))
                    assert st_order_leq(power_bias(law, nu), law.shift(1)).holds
        for lam in LAMS:
            for nu in (0.5, 1.0, 2.0, 4.0):
                law = cmp_truncated_pmf(CmpParams(lam, nu), 1e-14)
                tv, err = tv_distance(power_bias(law, nu), law.shift(1))
                assert tv <= err + 1e-12
        for _ in range(100):
            size = int(rng.integers(2, 21))
            pmf = FinitePmf(0, rng.dirichlet(np.ones(size)))
            a = float(rng.uniform(0, 3))
            b = a + float(rng.uniform(0.01, 3))
            assert st_order_leq(power_bias(pmf, a), power_bias(pmf, b)).holds
        for params in [CmpParams(lam, nu) for lam in LAMS for nu in (1.0, 1.5, 2.0, 4.0)] + [
            CmbParams(10, 0.3, 2.0),
            CmbParams(20, 0.5, 1.0),
            CmbParams(15, 0.2, 1.5),
        ]:
            r = poincare_estimate(params)
            var, mu = variance_and_mean(params)
            assert var - 1e-6 <= r <= mu + 1e-6, params
        for lam in LAMS:
            assert abs(poincare_estimate(CmpParams(lam, 1.0)) - lam) <= 0.01 * lam
    assert t.elapsed < 30.0


@pytest.mark.acceptance(8)
def test_ac8_mode_median_mean_deviation():
    with Timer() as t:
        grid = [(lam, nu) for lam in LAMS for nu in NUS] + [(9.0, 2.0), (4.0, 1.0), (8.0, 3.0), (16.0, 2.0), (0.5, 0.0)]
        for lam, nu in grid:
            p = CmpParams(lam, nu)
            law = cmp_truncated_pmf(p, 1e-14)
            mode = cmp_mode(p)
            assert pmf_argmax(law.probs, law.offset, rel=1e-9) == (mode if isinstance(mode, tuple) else (mode,))
            if nu > 0:
                exact, direct = cmp_mean_deviation(p)
                assert abs(exact - direct.value) <= 1e-9
                assert cmp_median_and_bound(p)[1]
        assert cmp_mode(CmpParams(9.0, 2.0)) == (2, 3)
        for n in (5, 10, 20):
            for pp in (0.1, 0.3, 0.5, 0.77):
                for nu in (0.5, 1.0, 2.0):
                    mode = cmb_mode(CmbParams(n, pp, nu))
                    law = cmb_truncated_pmf(CmbParams(n, pp, nu))
                    assert pmf_argmax(law.probs, 0, rel=1e-9) == (mode if isinstance(mode, tuple) else (mode,))
        exact, _ = cmp_mean_deviation(CmpParams(1.0, 1.0))
        assert abs(exact - 2 / math.e) <= 1e-10
    assert t.elapsed < 5.0


@pytest.mark.acceptance(9)
def test_ac9_cmpb():
    rng = np.random.default_rng(9)
    with Timer() as t:
        for n in range(1, 13):
            for nu in (0.5, 1.0, 2.0):
                ps = rng.uniform(0, 1, n)
                params = CmpbParams(tuple(ps), nu)
                np.testing.assert_allclose(cmpb_pmf(params).probs, cmpb_brute_force(params), rtol=0, atol=1e-11)
                equal = CmpbParams((0.35,) * n, nu)
                np.testing.assert_allclose(cmpb_pmf(equal).probs, cmb_truncated_pmf(CmbParams(n, 0.35, nu)).probs, rtol=0, atol=1e-12)
        ns = (10, 20, 40, 80, 120, 160, 200)
        for nu in (0.5, 1.0, 1.5, 2.0):
            target = cmp_truncated_pmf(CmpParams(1.0, nu), 1e-12)
            tvs = []
            for n in ns:
                ps = tuple((0.5 if i % 2 == 0 else 1.5) / n**nu for i in range(n))
                tvs.append(tv_distance(cmpb_pmf(CmpbParams(ps, nu)), target)[0])
            assert all(b < a for a, b in zip(tvs, tvs[1:])), (nu, tvs)
            if nu >= 1:
                assert tvs[-1] < 0.01, (nu, tvs)
    assert t.elapsed < 60.0


def _profile_quantities(prof):
    out = [("Z", prof.norm_const)]
    out += [(f"moment{k}", ev) for k, ev in enumerate(prof.moments, 1)]
    out += [(f"kappa{k}", ev) for k, ev in enumerate(prof.cumulants, 1)]
    return out + [("gamma1", prof.skewness), ("gamma2", prof.excess_kurtosis)]


@pytest.mark.acceptance(10)
def test_ac10_asymptotics():
    with Timer() as t:
        for nu in (0.5, 1.0, 2.0, 3.0):
            profiles = [_profile_quantities(cmp_asymptotic_profile(CmpParams(10.0**e, nu))) for e in range(2, 7)]
            for i, (name, _) in enumerate(profiles[0]):
                seq = [p[i][1] for p in profiles]
                dev = [abs(ev.value - 1) for ev in seq]
                err = [ev.abs_error_bound for ev in seq]
                for a in range(len(seq) - 1):
                    assert dev[a + 1] <= dev[a] + err[a] + err[a + 1], (nu, name, dev, err)
                assert dev[-1] + err[-1] <= 0.05, (nu, name, dev[-1], err[-1])
    assert t.elapsed < 30.0
