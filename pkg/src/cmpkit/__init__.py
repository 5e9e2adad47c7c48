"""Conway-Maxwell-Poisson and Conway-Maxwell-binomial distributions with
certified series evaluation, moment identities, stochastic orderings and
Stein's-method approximation bounds."""

from .dist import (
    CmbParams,
    CmpbParams,
    CmpParams,
    FinitePmf,
    MixingDistribution,
    SeriesEval,
    cmb_norm_const,
    cmb_pmf,
    cmb_truncated_pmf,
    cmp_asymptotic_ratio,
    cmp_cdf,
    cmp_log_norm_const,
    cmp_norm_const_asymptotic,
    cmp_pgf,
    cmp_pmf,
    cmp_quantile,
    cmp_truncated_pmf,
    cmpb_brute_force,
    cmpb_pmf,
    mixed_cmp_pmf,
    mixed_cmp_truncated_pmf,
)
from .moments import (
    AsymptoticProfile,
    CumulantVector,
    MomentSummary,
    bessel_i,
    cmb_factorial_power_moment,
    cmb_mode,
    cmp_asymptotic_profile,
    cmp_cumulants,
    cmp_factorial_power_moment,
    cmp_mean_deviation,
    cmp_median_and_bound,
    cmp_mode,
    cmp_moment,
    cmp_moment_asymptotic,
    cmp_moment_summary,
    stirling2,
)
from .stein import (
    SteinSolution,
    TvBoundReport,
    cmb_char_residual,
    cmp_char_residual,
    lemma_moment_bounds,
    mixed_cmp_tv_bound,
    special_lambda_bound,
    stein_bound_check,
    stein_factor_g,
    stein_solution,
    thm31_bound,
)
from .study import ConvergenceRow, SlopeFit, convergence_table, loglog_fit
from .transforms import (
    OrderReport,
    convex_tail_bounds,
    negative_dependence_check,
    poincare_estimate,
    power_bias,
    st_order_leq,
    tv_distance,
    tv_poisson_bound,
)

__version__ = "0.1.0"
