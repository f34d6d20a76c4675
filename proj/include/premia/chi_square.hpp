#ifndef PREMIA_CHI_SQUARE_HPP
#define PREMIA_CHI_SQUARE_HPP

namespace premia {

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
/// Series expansion for x < a + 1, continued fraction otherwise;
/// absolute tolerance 1e-12.
double regularized_gamma_p(double a, double x);

/// Upper counterpart Q(a, x) = 1 - P(a, x), computed directly so small
/// tail probabilities keep relative accuracy.
double regularized_gamma_q(double a, double x);

double chi2_cdf(double x, double df);

/// Survival function, i.e. the p-value of a chi-square statistic.
double chi2_pvalue(double x, double df);

/// Upper alpha-quantile: the x with chi2_pvalue(x, df) == alpha.
/// Bisection on the CDF, absolute tolerance 1e-10.
double chi2_upper_quantile(double df, double alpha);

/// Two-sided standard-normal critical value for level alpha,
/// derived from the df=1 chi-square quantile.
double normal_two_sided_critical(double alpha);

}  // namespace premia

#endif
