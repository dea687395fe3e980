#include "tdoa/localization.hpp"

#include <cmath>
#include <stdexcept>

namespace tdoa {

namespace {

std::vector<PairIndex> present_pairs(const TdoaSet& set) {
    std::vector<PairIndex> pairs;
    pairs.reserve(set.size());
    for (const auto& [pair, value] : set.entries()) pairs.push_back(pair);
    return pairs;
}

Eigen::VectorXd residual(const Eigen::Vector3d& x, const TdoaSet& set, const SensorArray& array,
                         const std::vector<PairIndex>& pairs) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t m = 0; m < pairs.size(); ++m) {
        const PairIndex pair = pairs[m];
        const double model = (x - array.position(pair.j)).norm() - (x - array.position(pair.i)).norm();
        r(static_cast<Eigen::Index>(m)) = *set.get(pair) - model;
    }
    return r;
}

// Keeps iterates off the sensors, where the model loses differentiability.
Eigen::Vector3d nudge_off_sensors(Eigen::Vector3d x, const SensorArray& array,
                                  const Eigen::Vector3d& direction) {
    for (const auto& p : array.positions()) {
        if ((x - p).norm() < 1e-9) {
            const Eigen::Vector3d dir =
                direction.norm() > 0.0 ? direction.normalized() : Eigen::Vector3d(1, 0, 0);
            x += 1e-6 * dir;
        }
    }
    return x;
}

}  // namespace

double ml_cost(const Eigen::Vector3d& x, const TdoaSet& set, const SensorArray& array,
               const CovarianceModel& covariance) {
    if (set.empty()) throw std::invalid_argument("ml_cost requires a nonempty measurement set");
    const std::vector<PairIndex> pairs = present_pairs(set);
    const Eigen::MatrixXd sigma = covariance.restriction(pairs, array.last_index());
    const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("restricted covariance is singular");
    const Eigen::VectorXd r = residual(x, set, array, pairs);
    return r.dot(llt.solve(r));
}

Eigen::MatrixXd tdoa_jacobian(const Eigen::Vector3d& x, const SensorArray& array,
                              std::span<const PairIndex> pairs) {
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(pairs.size()), 3);
    for (std::size_t m = 0; m < pairs.size(); ++m) {
        const PairIndex pair = pairs[m];
        const Eigen::Vector3d to_j = x - array.position(pair.j);
        const Eigen::Vector3d to_i = x - array.position(pair.i);
        const double norm_j = to_j.norm();
        const double norm_i = to_i.norm();
        if (norm_j == 0.0 || norm_i == 0.0)
            throw std::invalid_argument("jacobian undefined at a sensor position");
        jac.row(static_cast<Eigen::Index>(m)) = (to_j / norm_j - to_i / norm_i).transpose();
    }
    return jac;
}

LocalizationResult localize(const TdoaSet& set, const SensorArray& array,
                            const CovarianceModel& covariance, const LocalizationConfig& config) {
    if (set.empty()) throw std::invalid_argument("localize requires a nonempty measurement set");
    if (!(config.gradient_tolerance > 0.0) || config.max_iterations < 1)
        throw std::invalid_argument("localization tolerances must be positive");

    const std::vector<PairIndex> pairs = present_pairs(set);
    const bool observable = pairs.size() >= 3;

    const Eigen::MatrixXd sigma = covariance.restriction(pairs, array.last_index());
    const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("restricted covariance is singular");

    Eigen::Vector3d x = config.initial_guess.value_or(array.centroid());
    Eigen::Vector3d last_step(0, 0, 0);
    x = nudge_off_sensors(x, array, last_step);

    Eigen::VectorXd r = residual(x, set, array, pairs);
    double cost = r.dot(llt.solve(r));

    LocalizationResult result;
    result.position = x;
    result.final_cost = cost;

    double damping = config.initial_damping;
    bool gradient_small = false;

    int iteration = 0;
    for (; iteration < config.max_iterations; ++iteration) {
        const Eigen::MatrixXd jac = tdoa_jacobian(x, array, pairs);
        const Eigen::MatrixXd weighted = llt.solve(jac);  // Sigma^-1 J
        const Eigen::Vector3d gradient_half = jac.transpose() * llt.solve(r);
        if (gradient_half.norm() <= 0.5 * config.gradient_tolerance) {
            gradient_small = true;
            break;
        }

        const Eigen::Matrix3d normal = jac.transpose() * weighted;
        bool stepped = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            const Eigen::Matrix3d damped = normal + damping * Eigen::Matrix3d::Identity();
            const Eigen::Vector3d step = damped.ldlt().solve(gradient_half);
            Eigen::Vector3d candidate = nudge_off_sensors(x + step, array, step);
            const Eigen::VectorXd r_new = residual(candidate, set, array, pairs);
            const double cost_new = r_new.dot(llt.solve(r_new));
            if (cost_new < cost) {
                x = candidate;
                last_step = step;
                r = r_new;
                cost = cost_new;
                damping = std::max(damping / config.damping_factor, 1e-15);
                stepped = true;
                break;
            }
            damping *= config.damping_factor;
            if (damping > 1e15) break;
        }
        if (!stepped) break;  // stalled: no descent direction at any damping
    }

    result.position = x;
    result.final_cost = cost;
    result.iterations = iteration;
    if (!gradient_small) {
        const Eigen::Vector3d gradient_half =
            tdoa_jacobian(x, array, pairs).transpose() * llt.solve(r);
        gradient_small = gradient_half.norm() <= 0.5 * config.gradient_tolerance;
    }
    result.converged = observable && gradient_small;
    return result;
}

}  // namespace tdoa
