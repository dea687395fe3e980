// Maximum-likelihood TDOA source localization: the Mahalanobis least-squares
// cost over the measured pairs and a damped Gauss-Newton minimizer.

#pragma once

#include "tdoa/geometry.hpp"
#include "tdoa/stattests.hpp"

#include <optional>

namespace tdoa {

struct LocalizationConfig {
    /// Starting point; the sensor centroid is used when unset.
    std::optional<Eigen::Vector3d> initial_guess;
    int max_iterations = 200;
    double gradient_tolerance = 1e-8;
    double initial_damping = 1e-3;
    double damping_factor = 10.0;  // multiplicative up/down adjustment
};

struct LocalizationResult {
    Eigen::Vector3d position{0, 0, 0};
    double final_cost = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Squared Mahalanobis distance between the measured set and the model TDOAs
/// of a source at x, over the pairs present in the set.
double ml_cost(const Eigen::Vector3d& x, const TdoaSet& set, const SensorArray& array,
               const CovarianceModel& covariance);

/// Rows d tau_ji / dx = (x - m_j)/||x - m_j|| - (x - m_i)/||x - m_i|| for the
/// given pairs, in order.
Eigen::MatrixXd tdoa_jacobian(const Eigen::Vector3d& x, const SensorArray& array,
                              std::span<const PairIndex> pairs);

/// Damped Gauss-Newton descent on ml_cost. Deterministic. Fewer than three
/// measured pairs cannot pin down a 3D source, so such inputs always report
/// converged = false (the best iterate is still returned).
LocalizationResult localize(const TdoaSet& set, const SensorArray& array,
                            const CovarianceModel& covariance,
                            const LocalizationConfig& config = {});

}  // namespace tdoa
