#include "tdoa/stattests.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace tdoa {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

double chi2_pdf_1dof(double x) {
    // x > 0 expected; the density integrates to the CDF used below.
    return std::exp(-0.5 * x) / std::sqrt(2.0 * std::numbers::pi * x);
}

}  // namespace

double chi2_cdf_1dof(double x) {
    if (std::isnan(x) || x < 0.0) throw std::domain_error("chi2_cdf_1dof requires x >= 0");
    return std::erf(std::sqrt(0.5 * x));
}

double chi2_sf_1dof(double x) {
    if (std::isnan(x) || x < 0.0) throw std::domain_error("chi2_sf_1dof requires x >= 0");
    return std::erfc(std::sqrt(0.5 * x));
}

double chi2_quantile_1dof(double p) {
    if (std::isnan(p) || p < 0.0 || p >= 1.0)
        throw std::domain_error("chi2_quantile_1dof requires p in [0, 1)");
    if (p == 0.0) return 0.0;

    double lo = 0.0;
    double hi = 1.0;
    while (chi2_cdf_1dof(hi) < p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 4096.0) break;  // erfc underflow territory; p < 1 keeps us well below
    }
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf_1dof(mid) < p)
            lo = mid;
        else
            hi = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int step = 0; step < 2; ++step) {
        if (x <= 0.0) break;
        const double delta = (chi2_cdf_1dof(x) - p) / chi2_pdf_1dof(x);
        const double next = x - delta;
        if (next > 0.0 && std::isfinite(next)) x = next;
    }
    return x;
}

MixtureNull::MixtureNull(double b0, double b1, double b2) : beta0(b0), beta1(b1), beta2(b2) {
    if (b0 < 0.0 || b1 < 0.0 || b2 < 0.0 || std::abs(b0 + b1 + b2 - 1.0) > 1e-12)
        throw std::invalid_argument("mixture weights must be nonnegative and sum to 1");
}

double MixtureNull::pvalue(double statistic) const {
    if (std::isnan(statistic) || statistic < 0.0)
        throw std::domain_error("mixture p-value requires a nonnegative statistic");
    // chi2_2 survival has the closed form exp(-x/2).
    return beta1 * chi2_sf_1dof(statistic) + beta2 * std::exp(-0.5 * statistic);
}

G1Result g1_test(double tau_hat, double d, double sigma, double alpha) {
    if (!(d > 0.0)) throw std::invalid_argument("g1_test requires d > 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("g1_test requires sigma > 0");
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("g1_test requires alpha in (0, 1/2)");

    const double distance = std::abs(tau_hat) <= d ? 0.0 : (std::abs(tau_hat) - d) / sigma;
    G1Result result;
    result.outcome.statistic = distance * distance;
    // Half/half mixture null: lambda = (1/2)(1 - F(dist^2)) = (1/2) erfc(dist / sqrt 2).
    result.outcome.pvalue = 0.5 * std::erfc(distance / kSqrt2);
    result.outcome.reject = result.outcome.pvalue <= alpha;
    result.gamma = sigma * std::sqrt(chi2_quantile_1dof(1.0 - 2.0 * alpha));
    result.acceptance = Interval{-d - result.gamma, d + result.gamma};
    return result;
}

double g2_pvalue(double f) {
    if (std::isnan(f) || f < 0.0) throw std::domain_error("g2_pvalue requires f >= 0");
    return 0.5 * std::erfc(f / kSqrt2);
}

double g3_pvalue(double d) {
    if (std::isnan(d) || d < 0.0) throw std::domain_error("g3_pvalue requires d >= 0");
    return std::erfc(d / kSqrt2);
}

BhResult bh_adjust(std::span<const double> pvalues) {
    const std::size_t count = pvalues.size();
    if (count == 0) throw std::invalid_argument("bh_adjust requires at least one p-value");
    for (double p : pvalues)
        if (std::isnan(p) || p < 0.0 || p > 1.0)
            throw std::invalid_argument("bh_adjust requires p-values in [0, 1]");

    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });

    BhResult result;
    result.adjusted.resize(count);
    result.min_adjusted = 1.0;
    const double m_total = static_cast<double>(count);
    for (std::size_t rank = 0; rank < count; ++rank) {
        const double adjusted =
            std::min(1.0, pvalues[order[rank]] * m_total / static_cast<double>(rank + 1));
        result.adjusted[order[rank]] = adjusted;
        result.min_adjusted = std::min(result.min_adjusted, adjusted);
    }
    return result;
}

FisherResult fisher_combine(std::span<const double> pvalues, double floor) {
    const std::size_t count = pvalues.size();
    if (count == 0) throw std::invalid_argument("fisher_combine requires at least one p-value");
    if (!(floor > 0.0)) throw std::invalid_argument("fisher_combine floor must be positive");

    FisherResult result;
    double log_sum = 0.0;
    for (double p : pvalues) {
        if (std::isnan(p) || p < 0.0 || p > 1.0)
            throw std::invalid_argument("fisher_combine requires p-values in [0, 1]");
        if (p < floor) {
            p = floor;
            result.floored = true;
        }
        log_sum += std::log(p);
    }
    result.statistic = -2.0 * log_sum / static_cast<double>(count);
    return result;
}

CovarianceModel::CovarianceModel(Form form, double sigma, std::vector<double> sigmas,
                                 Eigen::MatrixXd cov)
    : form_(form), sigma_(sigma), sigmas_(std::move(sigmas)), cov_(std::move(cov)) {}

CovarianceModel CovarianceModel::isotropic(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("isotropic covariance requires sigma > 0");
    return CovarianceModel(Form::Isotropic, sigma, {}, {});
}

CovarianceModel CovarianceModel::diagonal(std::vector<double> sigmas) {
    if (sigmas.empty()) throw std::invalid_argument("diagonal covariance requires at least one sigma");
    for (double s : sigmas)
        if (!std::isnan(s) && !(s > 0.0 && std::isfinite(s)))
            throw std::invalid_argument("diagonal covariance entries must be positive (or NaN placeholders)");
    return CovarianceModel(Form::Diagonal, 0.0, std::move(sigmas), {});
}

CovarianceModel CovarianceModel::full(Eigen::MatrixXd cov) {
    if (cov.rows() == 0 || cov.rows() != cov.cols())
        throw std::invalid_argument("full covariance must be square and nonempty");
    if (!cov.allFinite()) throw std::invalid_argument("full covariance has non-finite entries");
    const double scale = cov.cwiseAbs().maxCoeff();
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(scale, 1.0))
        throw std::invalid_argument("full covariance is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("full covariance is not positive definite");
    return CovarianceModel(Form::Full, 0.0, {}, std::move(cov));
}

void CovarianceModel::check_index(int linear_index, int q) const {
    if (form_ == Form::Diagonal && static_cast<int>(sigmas_.size()) != q)
        throw std::invalid_argument("diagonal covariance size does not match the array");
    if (form_ == Form::Full && cov_.rows() != q)
        throw std::invalid_argument("full covariance size does not match the array");
    if (linear_index < 0 || linear_index >= q)
        throw std::invalid_argument("pair index outside the covariance enumeration");
}

double CovarianceModel::entry(int row_index, int col_index, int q) const {
    check_index(row_index, q);
    check_index(col_index, q);
    switch (form_) {
        case Form::Isotropic:
            return row_index == col_index ? sigma_ * sigma_ : 0.0;
        case Form::Diagonal: {
            if (row_index != col_index) return 0.0;
            const double s = sigmas_[static_cast<std::size_t>(row_index)];
            if (std::isnan(s))
                throw std::invalid_argument("covariance queried for a pair without a sigma");
            return s * s;
        }
        case Form::Full:
            return cov_(row_index, col_index);
    }
    return 0.0;
}

double CovarianceModel::sigma(PairIndex pair, int last_sensor) const {
    const int q = last_sensor * (last_sensor + 1) / 2;
    return std::sqrt(entry(pair_linear_index(pair), pair_linear_index(pair), q));
}

Eigen::Matrix2d CovarianceModel::pair_block(const TripleGroup& group, int last_sensor) const {
    if (group.member_count != 2)
        throw std::invalid_argument("pair_block requires a shared-pair group");
    const int q = last_sensor * (last_sensor + 1) / 2;
    Eigen::Matrix2d block;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            block(r, c) = group.signs[static_cast<std::size_t>(r)] *
                          group.signs[static_cast<std::size_t>(c)] *
                          entry(pair_linear_index(group.members[static_cast<std::size_t>(r)]),
                                pair_linear_index(group.members[static_cast<std::size_t>(c)]), q);
    return block;
}

Eigen::Matrix3d CovarianceModel::triple_block(const TripleGroup& group, int last_sensor) const {
    if (group.member_count != 3) throw std::invalid_argument("triple_block requires a triple group");
    const int q = last_sensor * (last_sensor + 1) / 2;
    Eigen::Matrix3d block;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            block(r, c) = group.signs[static_cast<std::size_t>(r)] *
                          group.signs[static_cast<std::size_t>(c)] *
                          entry(pair_linear_index(group.members[static_cast<std::size_t>(r)]),
                                pair_linear_index(group.members[static_cast<std::size_t>(c)]), q);
    return block;
}

Eigen::MatrixXd CovarianceModel::restriction(std::span<const PairIndex> pairs,
                                             int last_sensor) const {
    const int q = last_sensor * (last_sensor + 1) / 2;
    const Eigen::Index m = static_cast<Eigen::Index>(pairs.size());
    Eigen::MatrixXd block(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c)
            block(r, c) = entry(pair_linear_index(pairs[static_cast<std::size_t>(r)]),
                                pair_linear_index(pairs[static_cast<std::size_t>(c)]), q);
    return block;
}

}  // namespace tdoa
