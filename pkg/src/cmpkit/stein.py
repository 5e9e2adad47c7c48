"""Stein's method for the CMP law: the Stein equation solution and its
factors, characterisation residuals, and total-variation bounds for CMB,
power-parameter and mixed CMP approximations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.special import gammaln

from ._series import accurate_sum, cmp_mode_index
from .dist import (
    CmbParams,
    CmpParams,
    FinitePmf,
    MixingDistribution,
    _cmb_probs,
    cmb_truncated_pmf,
    cmp_log_norm_const,
    cmp_truncated_pmf,
    mixed_cmp_truncated_pmf,
)
from .moments import cmb_moment, cmp_mean_var, nu2_closed_forms
from .transforms import tv_distance

SEED = 0x5EED
TV_TAIL = 1e-12


@dataclass(frozen=True)
class SteinSolution:
    params: CmpParams
    target_set: frozenset[int]
    values: np.ndarray = field(repr=False)
    window_end: int
    prob_a: float

    def residuals(self) -> np.ndarray:
        """lam f(j+1) - j**nu f(j) - [1(j in A) - P(A)] for j = 0..J-1."""
        lam, nu = self.params.lam, self.params.nu
        f = self.values
        j = np.arange(self.window_end, dtype=float)
        ind = np.isin(np.arange(self.window_end), list(self.target_set)).astype(float)
        jnu = np.where(j > 0, j**nu, 0.0)
        return lam * f[1:] - jnu * f[:-1] - (ind - self.prob_a)


@dataclass(frozen=True)
class TvBoundReport:
    bound: float
    exact_tv: float
    exact_tv_error: float
    components: dict


def _log_probs(params: CmpParams, k_end: int) -> np.ndarray:
    ks = np.arange(k_end + 1, dtype=float)
    log_z = cmp_log_norm_const(params, 1e-15).value
    if params.nu == 0:
        return ks * math.log(params.lam) - log_z
    return ks * math.log(params.lam) - params.nu * gammaln(ks + 1.0) - log_z


def stein_solution(params: CmpParams, target: Iterable[int], window_end: int) -> SteinSolution:
    """f_A(0..J) for the CMP Stein equation with f_A(0) = 0.

    Up to the mode f_A(j+1) = [P(A, X <= j) - P(A) P(X <= j)] / (lam pi_j) and
    above it the complementary form [P(A) P(X > j) - P(A, X > j)] / (lam pi_j).
    The partial sums are carried relative to pi_j by the recursions
    S_j = 1 + S_{j-1} j**nu / lam and T_j = (lam / (j+1)**nu)(1 + T_{j+1}),
    each of which is contracting on its side of the mode, so nothing underflows.
    """
    a_set = frozenset(int(a) for a in target)
    big_j = int(window_end)
    if big_j < 1:
        raise ValueError("window must contain at least one step")
    if any(a < 0 or a > big_j for a in a_set):
        raise ValueError("target set must lie inside the window")
    lam, nu = params.lam, params.nu
    mode = cmp_mode_index(lam, nu)
    # upper sums start far enough out that the neglected part is below 1e-30 of pi_J
    k_end = max(big_j, mode) + 64
    while True:
        lp = _log_probs(params, k_end)
        if lp[-1] - lp[big_j] < -70.0 and k_end > mode:
            break
        k_end *= 2
    if k_end > 50_000_000:
        raise ValueError("window too large")
    ks = np.arange(k_end + 1, dtype=float)
    in_a = np.zeros(k_end + 1, dtype=bool)
    in_a[list(a_set)] = True
    prob_a = math.fsum(np.exp(lp[in_a]).tolist()) if a_set else 0.0
    # ratio pi_{k-1} / pi_k = k**nu / lam
    down = np.where(ks > 0, ks**nu / lam, 0.0)
    split = min(mode, big_j - 1)
    low, low_a = 0.0, 0.0
    f = np.zeros(big_j + 1)
    for j in range(0, split + 1):
        low = 1.0 + low * down[j]
        low_a = float(in_a[j]) + low_a * down[j]
        f[j + 1] = (low_a - prob_a * low) / lam
    up, up_a = 0.0, 0.0
    for j in range(k_end - 1, split, -1):
        r = 1.0 / down[j + 1]
        up = r * (1.0 + up)
        up_a = r * (float(in_a[j + 1]) + up_a)
        if j < big_j:
            f[j + 1] = (prob_a * up - up_a) / lam
    return SteinSolution(params, a_set, f, big_j, prob_a)


def _g_branches(lam: float, nu: float) -> list[float]:
    out = []
    if nu >= 1 and lam > 1:
        lead = max(1.0 + 1.0 / nu, 1.5**nu)
        out.append(min(1.0, lead * (1.0 - lam ** (-0.5 / nu)) ** (1.0 / nu - 1.0) * lam ** (0.5 / nu - 1.0)))
    if 0 < nu <= 1 and lam >= 1:
        out.append((1.0 + 1.0 / nu) * (1.0 + lam ** (-0.5 / nu)) ** (1.0 / nu - 1.0) * lam ** (0.5 / nu - 1.0))
    if nu >= 1 and lam <= 1:
        out.append(1.0)
    if nu < 1 and lam < 1:
        out.append(1.0 / (1.0 - lam ** (1.0 - nu)))
    return out


def stein_factor_g(params: CmpParams) -> float:
    """Uniform bound on |f_A|; where branches overlap the smallest applies."""
    branches = _g_branches(params.lam, params.nu)
    if not branches:
        raise ValueError("no Stein-factor branch covers these parameters")
    return min(branches)


def g_branch_labels(params: CmpParams) -> list[int]:
    """Which of the four regions (1..4) contain the parameters."""
    lam, nu = params.lam, params.nu
    conds = [nu >= 1 and lam > 1, 0 < nu <= 1 and lam >= 1, nu >= 1 and lam <= 1, nu < 1 and lam < 1]
    return [i + 1 for i, c in enumerate(conds) if c]


def delta_bound(params: CmpParams) -> float:
    """lam**-1 (1 - 1/Z), the sharp bound on the forward differences."""
    log_z = cmp_log_norm_const(params, 1e-15).value
    return -math.expm1(-log_z) / params.lam


def stein_bound_check(params: CmpParams, target: Iterable[int], window_end: int) -> tuple[float, float]:
    """(sup_j |f_A(j)|, sup_j |f_A(j+1) - f_A(j)|) over j >= 1 in the window."""
    sol = stein_solution(params, target, window_end)
    f = sol.values[1:]
    return float(np.max(np.abs(f))), float(np.max(np.abs(np.diff(f)))) if f.size > 1 else 0.0


# --- characterisations -----------------------------------------------------


def random_test_functions(count: int, size: int, seed: int = SEED) -> list[np.ndarray]:
    """Tables of values uniform on [-1, 1], usable as f(j) = table[j]."""
    rng = np.random.default_rng(seed)
    return [rng.uniform(-1.0, 1.0, size) for _ in range(count)]


def _as_callable(f) -> Callable:
    if callable(f):
        return f
    table = np.asarray(f, dtype=float)
    return lambda j: table[np.asarray(j, dtype=int)]


def cmp_char_residual(pmf: FinitePmf, params: CmpParams, f) -> float:
    """|E[lam f(W+1) - W**nu f(W)]| under the supplied window mass function.

    ``f`` is a vectorized callable or a table indexed from zero that covers
    the window plus one.
    """
    fn = _as_callable(f)
    ks = pmf.support
    kf = ks.astype(float)
    knu = np.where(kf > 0, kf**params.nu, 0.0)
    vals = params.lam * fn(ks + 1) - knu * fn(ks)
    return abs(accurate_sum(vals * pmf.probs))


def cmb_char_residual(params: CmbParams, f) -> float:
    """|E[p (n-Y)**nu f(Y+1) - (1-p) Y**nu f(Y)]| under the exact CMB law."""
    fn = _as_callable(f)
    n, p, nu = params.n, params.p, params.nu
    ks = np.arange(n + 1)
    kf = ks.astype(float)
    up = np.where(n - kf > 0, (n - kf) ** nu, 0.0)
    down = np.where(kf > 0, kf**nu, 0.0)
    vals = p * up * fn(ks + 1) - (1.0 - p) * down * fn(ks)
    return abs(accurate_sum(vals * _cmb_probs(params)))


def perturb_pmf(pmf: FinitePmf, index: int, amount: float = 0.01) -> FinitePmf:
    """Move ``amount`` of mass from ``index`` to ``index + 1``."""
    probs = np.array(pmf.probs)
    i = index - pmf.offset
    if not 0 <= i < probs.size:
        raise ValueError("index outside the window")
    if probs[i] < amount:
        raise ValueError("not enough mass to move")
    if i + 1 == probs.size:
        probs = np.append(probs, 0.0)
    probs[i] -= amount
    probs[i + 1] += amount
    return FinitePmf(pmf.offset, probs, pmf.tail_bound)


# --- CMB approximation -----------------------------------------------------


def c_nu(nu: float) -> float:
    return max(1.0, nu)


def _cmb_moments(params: CmbParams) -> tuple[float, float, float, float]:
    """E Y, E Y**2, E Y**nu, E Y**(nu+1)."""
    nu = params.nu
    return cmb_moment(params, 1), cmb_moment(params, 2), cmb_moment(params, nu), cmb_moment(params, nu + 1)


def _check_lambda(n: int, lam: float, nu: float) -> CmbParams:
    if not 0 < lam < n**nu:
        raise ValueError(f"need 0 < lambda < n**nu, got lambda={lam}, n**nu={n**nu}")
    return CmbParams(n, lam / n**nu, nu)


def exact_tv_cmb_cmp(cmb: CmbParams, cmp: CmpParams) -> tuple[float, float]:
    return tv_distance(cmb_truncated_pmf(cmb), cmp_truncated_pmf(cmp, TV_TAIL))


def thm31_bound(n: int, lam: float, nu: float) -> TvBoundReport:
    """CMB(n, lam/n**nu, nu) versus CMP(lam, nu) total-variation bound."""
    cmb = _check_lambda(n, lam, nu)
    cmp = CmpParams(lam, nu)
    ey, ey2, ey_nu, ey_nu1 = _cmb_moments(cmb)
    g = stein_factor_g(cmp)
    m1 = min(1.0, 1.0 / lam)
    nn = float(n) ** nu
    dev = lam * (lam / (nn - lam) + nu * nn * ey / (n * (nn - lam)))
    first = dev * (g + (1.0 + ey) * m1)
    second = lam * c_nu(nu) / n * (ey + ey2) * m1
    # the sharper intermediate form with exact moments
    intermediate = m1 * ((1.0 + ey) * ey_nu - ey_nu1) + g * abs(lam - ey_nu)
    tv, tv_err = exact_tv_cmb_cmp(cmb, cmp)
    return TvBoundReport(
        bound=first + second,
        exact_tv=tv,
        exact_tv_error=tv_err,
        components={"first": first, "second": second, "intermediate": intermediate, "g": g, "EY": ey, "EY2": ey2},
    )


def special_lambda_bound(params: CmbParams) -> float:
    """min{1, lam} (c_nu / n)(E Y + E Y**2) with lam = E Y**nu."""
    ey, ey2 = cmb_moment(params, 1), cmb_moment(params, 2)
    lam = cmb_moment(params, params.nu)
    return min(1.0, lam) * c_nu(params.nu) / params.n * (ey + ey2)


def special_lambda_report(params: CmbParams) -> TvBoundReport:
    """Bound and exact distance from CMB to CMP(E Y**nu, nu)."""
    lam = cmb_moment(params, params.nu)
    tv, tv_err = exact_tv_cmb_cmp(params, CmpParams(lam, params.nu))
    return TvBoundReport(special_lambda_bound(params), tv, tv_err, {"lambda": lam})


def lemma_moment_bounds(n: int, lam: float, nu: float) -> tuple[float, float]:
    """(lower bound on E Y**(nu+1), bound on |lam - E Y**nu|)."""
    cmb = _check_lambda(n, lam, nu)
    ey, ey2 = cmb_moment(cmb, 1), cmb_moment(cmb, 2)
    nn = float(n) ** nu
    lower = lam * (1.0 + ey - c_nu(nu) / n * (ey + ey2))
    dev = lam * (lam / (nn - lam) + nu * nn * ey / (n * (nn - lam)))
    return lower, dev


def refined_moment_deviation_bounds(n: int, lam: float, nu: float) -> tuple[float, float]:
    """Sign-aware bounds (lower, upper) on lam - E Y**nu.

    For nu >= 1 (large n) 0 <= lam - E Y**nu <= lam (nu n**nu E Y / (n (n**nu - lam)) - lam / (n**nu - lam));
    for nu < 1, -lam**2 / (n**nu - lam) <= lam - E Y**nu <= 0.
    """
    cmb = _check_lambda(n, lam, nu)
    nn = float(n) ** nu
    if nu >= 1:
        ey = cmb_moment(cmb, 1)
        return 0.0, lam * (nu * nn * ey / (n * (nn - lam)) - lam / (nn - lam))
    return -(lam**2) / (nn - lam), 0.0


def small_p_gap(params: CmbParams) -> float:
    """E Y**nu - n**nu p; non-positive for nu >= 1 and non-negative for nu < 1 at small p."""
    return cmb_moment(params, params.nu) - float(params.n) ** params.nu * params.p


# --- mixed CMP -------------------------------------------------------------


def mixed_cmp_tv_bound(mix: MixingDistribution, lam: float, nu: float) -> tuple[float, float]:
    """(g_nu(lam) E|xi - lam|, exact distance), the exact value up to tails of 1e-12."""
    target = CmpParams(lam, nu)
    bound = stein_factor_g(target) * mix.mean_abs_deviation(lam)
    tv, _ = tv_distance(mixed_cmp_truncated_pmf(mix, nu, TV_TAIL), cmp_truncated_pmf(target, TV_TAIL))
    return bound, tv


def nu2_tv_display_gap(lam: float) -> float:
    """(mu - Var)/mu minus sqrt(lam)(I_1/I_0 - I_2/I_1) for CMP(lam, 2)."""
    mu, var = cmp_mean_var(CmpParams(lam, 2.0))
    return (mu - var) / mu - nu2_closed_forms(lam)["tv_poisson_bound"]
