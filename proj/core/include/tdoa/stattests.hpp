// Statistical tests on TDOA groups: chi-square special functions, the
// mixture null distributions of the squared feasible-set distances, p-values
// for the G=1/2/3 tests, Benjamini-Hochberg adjustment and the standardized
// Fisher combination.

#pragma once

#include "tdoa/geometry.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace tdoa {

/// Chi-square CDF with one degree of freedom, F(x) = erf(sqrt(x/2)).
/// Absolute error below 1e-12 on [0, inf). Throws std::domain_error for x < 0.
double chi2_cdf_1dof(double x);

/// Survival function 1 - F(x), evaluated through erfc so deep tails keep
/// full relative precision (needed for p-values far below DBL_EPSILON).
double chi2_sf_1dof(double x);

/// Inverse of chi2_cdf_1dof on [0, 1); bisection to 1e-12 followed by two
/// Newton polish steps. Throws std::domain_error outside [0, 1).
double chi2_quantile_1dof(double p);

/// Null distribution of a squared distance to a boundary-constrained
/// feasible set: beta0 * chi2_0 + beta1 * chi2_1 + beta2 * chi2_2, where
/// chi2_0 is a point mass at zero.
struct MixtureNull {
    double beta0 = 0.5;
    double beta1 = 0.5;
    double beta2 = 0.0;

    MixtureNull() = default;
    MixtureNull(double b0, double b1, double b2);

    /// P[X > statistic] under the mixture (strict tail, so pvalue(0) = 1 - beta0).
    double pvalue(double statistic) const;

    /// The global half/half approximation used by the G=1 and G=2 tests.
    static MixtureNull halves() { return MixtureNull(0.5, 0.5, 0.0); }
    /// The exact chi-square(1) law of the squared ZSC plane distance (G=3).
    static MixtureNull chi1() { return MixtureNull(0.0, 1.0, 0.0); }
};

struct TestOutcome {
    double statistic = 0.0;  // squared distance, dimensionless
    double pvalue = 1.0;
    bool reject = false;
};

struct G1Result {
    TestOutcome outcome;
    Interval acceptance;  // [-d - gamma, d + gamma]
    double gamma = 0.0;   // sigma * sqrt(quantile(1 - 2 alpha))
};

/// Single-TDOA test: distance (|tau| - d)/sigma past the feasible interval,
/// p-value under the half/half mixture, and the acceptance interval whose
/// complement is rejected at level alpha. Requires d > 0, sigma > 0 and
/// 0 < alpha < 1/2.
G1Result g1_test(double tau_hat, double d, double sigma, double alpha);

/// P-value of the G=2 test from the simplified feasible-set distance f.
double g2_pvalue(double f);

/// P-value of the G=3 test from the ZSC plane distance.
double g3_pvalue(double d);

struct BhResult {
    std::vector<double> adjusted;  // aligned with the input order, capped at 1
    double min_adjusted = 1.0;
};

/// Benjamini-Hochberg adjustment: the m-th smallest of M p-values is scaled
/// by M/m. Ties keep their input order. Throws on an empty list.
BhResult bh_adjust(std::span<const double> pvalues);

struct FisherResult {
    double statistic = 0.0;
    bool floored = false;  // some p-value was clamped to the floor
};

/// Standardized Fisher combination T = -(2/M) sum ln(p). Zeros are clamped
/// to `floor` and flagged; inputs must lie in [0, 1].
FisherResult fisher_combine(std::span<const double> pvalues, double floor = 1e-300);

/// Measurement-noise covariance over the canonical pair enumeration.
/// Oriented sub-blocks are extracted with sign conjugation S * Sigma * S,
/// S = diag(signs), so group statistics are independent of the storage
/// orientation of each pair.
class CovarianceModel {
public:
    enum class Form { Isotropic, Diagonal, Full };

    static CovarianceModel isotropic(double sigma);
    /// Per-pair standard deviations in canonical order. Entries may be NaN
    /// for pairs that never occur in the data; touching one throws.
    static CovarianceModel diagonal(std::vector<double> sigmas);
    static CovarianceModel full(Eigen::MatrixXd cov);

    Form form() const noexcept { return form_; }

    /// Standard deviation of one TDOA.
    double sigma(PairIndex pair, int last_sensor) const;

    /// 2x2 covariance of a shared-pair group's oriented components.
    Eigen::Matrix2d pair_block(const TripleGroup& group, int last_sensor) const;

    /// 3x3 covariance of a triple group's oriented components.
    Eigen::Matrix3d triple_block(const TripleGroup& group, int last_sensor) const;

    /// Restriction to an ordered list of canonical pairs.
    Eigen::MatrixXd restriction(std::span<const PairIndex> pairs, int last_sensor) const;

private:
    CovarianceModel(Form form, double sigma, std::vector<double> sigmas, Eigen::MatrixXd cov);

    double entry(int row_index, int col_index, int q) const;
    void check_index(int linear_index, int q) const;

    Form form_;
    double sigma_ = 0.0;
    std::vector<double> sigmas_;
    Eigen::MatrixXd cov_;
};

}  // namespace tdoa
