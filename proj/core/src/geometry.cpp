#include "tdoa/geometry.hpp"

#include "tdoa/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tdoa {

namespace {

template <typename Matrix>
void require_spd(const Matrix& cov) {
    if (!cov.allFinite()) throw std::invalid_argument("covariance has non-finite entries");
    const double scale = cov.cwiseAbs().maxCoeff();
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(scale, 1.0))
        throw std::invalid_argument("covariance is not symmetric");
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("covariance is not positive definite");
}

template <typename Vector, typename Matrix>
double mahalanobis_normal_norm(const Vector& normal, const Matrix& cov) {
    require_spd(cov);
    return std::sqrt(normal.dot(cov * normal));
}

// 90-degree counterclockwise rotation, the planar restriction of the paper's
// rotation about the vertical axis.
Eigen::Vector2d rot90(const Eigen::Vector2d& v) { return {-v.y(), v.x()}; }

}  // namespace

OrientedPair orient_pair(int a, int b) {
    if (a < 0 || b < 0) throw std::invalid_argument("sensor indices must be nonnegative");
    if (a == b) throw std::invalid_argument("a TDOA pair needs two distinct sensors");
    if (a > b) return {PairIndex{a, b}, 1.0};
    return {PairIndex{b, a}, -1.0};
}

std::vector<PairIndex> enumerate_pairs(int last_sensor) {
    std::vector<PairIndex> pairs;
    pairs.reserve(static_cast<std::size_t>(last_sensor * (last_sensor + 1) / 2));
    for (int j = 1; j <= last_sensor; ++j)
        for (int i = 0; i < j; ++i) pairs.push_back(PairIndex{j, i});
    return pairs;
}

SensorArray::SensorArray(std::vector<Eigen::Vector3d> positions)
    : positions_(std::move(positions)) {
    const auto count = positions_.size();
    if (count < 2) throw std::invalid_argument("a sensor array needs at least two sensors");
    for (const auto& p : positions_)
        if (!p.allFinite()) throw std::invalid_argument("sensor position has non-finite coordinates");

    dist_.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(count));
    for (std::size_t j = 0; j < count; ++j) {
        dist_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = 0.0;
        for (std::size_t i = 0; i < j; ++i) {
            const double d = (positions_[j] - positions_[i]).norm();
            if (d == 0.0) throw std::invalid_argument("sensors must occupy distinct positions");
            dist_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
            dist_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
        }
    }
}

Eigen::Vector3d SensorArray::centroid() const {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const auto& p : positions_) c += p;
    return c / static_cast<double>(positions_.size());
}

void TdoaSet::set(int a, int b, double value) {
    const OrientedPair o = orient_pair(a, b);
    entries_[o.pair] = o.sign * value;
}

std::optional<double> TdoaSet::get(int a, int b) const {
    const OrientedPair o = orient_pair(a, b);
    const auto it = entries_.find(o.pair);
    if (it == entries_.end()) return std::nullopt;
    return o.sign * it->second;
}

std::optional<double> TdoaSet::get(PairIndex p) const {
    const auto it = entries_.find(p);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

TripleGroup TripleGroup::shared_pair(int shared, int j, int k) {
    if (j > k) std::swap(j, k);
    if (shared == j || shared == k || j == k)
        throw std::invalid_argument("shared-pair group needs three distinct sensors");
    TripleGroup g;
    g.kind = Kind::SharedPair;
    g.i = shared;
    g.j = j;
    g.k = k;
    const OrientedPair oji = orient_pair(j, shared);
    const OrientedPair oki = orient_pair(k, shared);
    g.members = {oji.pair, oki.pair, PairIndex{}};
    g.signs = {oji.sign, oki.sign, 1.0};
    g.member_count = 2;
    return g;
}

TripleGroup TripleGroup::triple(int i, int j, int k) {
    if (!(0 <= i && i < j && j < k))
        throw std::invalid_argument("triple group requires i < j < k");
    TripleGroup g;
    g.kind = Kind::Triple;
    g.i = i;
    g.j = j;
    g.k = k;
    // With i < j < k all three oriented components are canonical already.
    g.members = {PairIndex{j, i}, PairIndex{k, i}, PairIndex{k, j}};
    g.signs = {1.0, 1.0, 1.0};
    g.member_count = 3;
    return g;
}

TdoaSet tdoa_map(const Eigen::Vector3d& x, const SensorArray& array) {
    const int n = array.last_index();
    std::vector<double> range(static_cast<std::size_t>(n) + 1);
    for (int s = 0; s <= n; ++s) range[static_cast<std::size_t>(s)] = (x - array.position(s)).norm();
    TdoaSet set;
    for (int j = 1; j <= n; ++j)
        for (int i = 0; i < j; ++i)
            set.set(PairIndex{j, i}, range[static_cast<std::size_t>(j)] - range[static_cast<std::size_t>(i)]);
    return set;
}

Interval theta1_interval(PairIndex pair, const SensorArray& array) {
    if (pair.i < 0 || pair.j > array.last_index() || pair.i >= pair.j)
        throw std::invalid_argument("pair indices outside the sensor array");
    const double d = array.distance(pair);
    return Interval{-d, d};
}

PlanarTripleGeometry classify_triple(int i, int j, int k, const SensorArray& array,
                                     double alignment_tol) {
    if (i == j || i == k || j == k)
        throw std::invalid_argument("triple classification needs three distinct sensors");
    const int n = array.last_index();
    if (i < 0 || j < 0 || k < 0 || i > n || j > n || k > n)
        throw std::invalid_argument("sensor index outside the array");

    PlanarTripleGeometry g;
    g.i = i;
    g.j = j;
    g.k = k;
    g.d_ji = array.distance(std::max(j, i), std::min(j, i));
    g.d_ki = array.distance(std::max(k, i), std::min(k, i));
    g.d_kj = array.distance(std::max(k, j), std::min(k, j));

    const double d_max = g.scale();
    const double defect = d_max - (g.d_ji + g.d_ki + g.d_kj - d_max);
    if (std::abs(defect) <= alignment_tol * d_max) {
        // Collinear triple: the shared sensor lies between the others exactly
        // when the j-k distance dominates.
        g.classification = (d_max == g.d_kj) ? TripleClass::AlignedSharedBetween
                                             : TripleClass::AlignedSharedOutside;
    } else {
        g.classification = TripleClass::General;
    }

    // Distance-preserving planar embedding with m_i at the origin, m_j on the
    // positive x axis and m_k above it (counterclockwise, W >= 0).
    const double xk = (g.d_ji * g.d_ji + g.d_ki * g.d_ki - g.d_kj * g.d_kj) / (2.0 * g.d_ji);
    const double yk2 = g.d_ki * g.d_ki - xk * xk;
    const double yk = yk2 > 0.0 ? std::sqrt(yk2) : 0.0;
    g.disp_j = Eigen::Vector2d(g.d_ji, 0.0);
    g.disp_k = Eigen::Vector2d(xk, g.classification == TripleClass::General ? yk : 0.0);
    g.area_det = g.disp_j.x() * g.disp_k.y() - g.disp_j.y() * g.disp_k.x();

    g.vertex_r0 = Eigen::Vector2d(g.d_ji, g.d_ki);
    g.vertex_r1 = Eigen::Vector2d(-g.d_ji, g.d_kj - g.d_ji);
    g.vertex_r2 = Eigen::Vector2d(g.d_kj - g.d_ki, -g.d_ki);
    return g;
}

double PlanarTripleGeometry::ellipse_a(const Eigen::Vector2d& tau) const {
    if (classification != TripleClass::General)
        throw std::invalid_argument("ellipse polynomial is defined for general triples only");
    const Eigen::Vector2d v = rot90(tau.y() * disp_j - tau.x() * disp_k);
    return v.squaredNorm() - area_det * area_det;
}

double PlanarTripleGeometry::cubic_b(const Eigen::Vector2d& tau) const {
    if (classification != TripleClass::General)
        throw std::invalid_argument("cubic polynomial is defined for general triples only");
    const Eigen::Vector2d v = rot90(tau.y() * disp_j - tau.x() * disp_k);
    const Eigen::Vector2d l0 = rot90((d_ki * d_ki - tau.y() * tau.y()) * disp_j -
                                     (d_ji * d_ji - tau.x() * tau.x()) * disp_k) /
                               (2.0 * area_det);
    return v.dot(l0);
}

bool theta2_membership(const Eigen::Vector2d& tau_pair, const PlanarTripleGeometry& geom) {
    const double s = geom.scale();
    const double tau_ji = tau_pair.x();
    const double tau_ki = tau_pair.y();

    if (geom.classification == TripleClass::General) {
        // Closed version of E^- u (C^+ n P) u vertices.
        if (geom.ellipse_a(tau_pair) <= kMembershipTol * s * s * s * s) return true;
        const double tol1 = kMembershipTol * s;
        const bool in_hexagon = std::abs(tau_ji) <= geom.d_ji + tol1 &&
                                std::abs(tau_ki) <= geom.d_ki + tol1 &&
                                std::abs(tau_ki - tau_ji) <= geom.d_kj + tol1;
        if (in_hexagon && geom.cubic_b(tau_pair) >= -kMembershipTol * s * s * s) return true;
        return (tau_pair - geom.vertex_r0).norm() <= tol1 ||
               (tau_pair - geom.vertex_r1).norm() <= tol1 ||
               (tau_pair - geom.vertex_r2).norm() <= tol1;
    }

    // Aligned: the topological closure of the feasible triangle.
    const double tol2 = kMembershipTol * s * s;
    return geom.c(-1, -1, +1) * tau_ji + 2.0 * geom.d_ji * tau_ki <=
               geom.d_ji * geom.c(-1, +1, +1) + tol2 &&
           2.0 * geom.d_ki * tau_ji + geom.c(-1, -1, +1) * tau_ki <=
               geom.d_ki * geom.c(+1, -1, +1) + tol2 &&
           geom.c(+1, -1, -1) * tau_ji + geom.c(-1, +1, -1) * tau_ki <=
               geom.d_kj * geom.c(+1, +1, -1) + tol2;
}

double strip_distance_general(const Eigen::Vector2d& tau_pair, const PlanarTripleGeometry& geom,
                              const Eigen::Matrix2d& cov2) {
    if (geom.classification != TripleClass::General)
        throw std::invalid_argument("strip distance requires a general-position triple");
    const double diff = tau_pair.y() - tau_pair.x();
    if (std::abs(diff) <= geom.d_kj) return 0.0;
    const Eigen::Vector2d normal(1.0, -1.0);
    const double denom = mahalanobis_normal_norm(normal, cov2);
    const double excess = diff > geom.d_kj ? diff - geom.d_kj : diff + geom.d_kj;
    return std::abs(excess) / denom;
}

double aligned_distance(const Eigen::Vector2d& tau_pair, const PlanarTripleGeometry& geom,
                        const Eigen::Matrix2d& cov2) {
    if (geom.classification == TripleClass::General)
        throw std::invalid_argument("aligned distance requires an aligned triple");
    const double tau_ji = tau_pair.x();
    const double tau_ki = tau_pair.y();

    if (geom.classification == TripleClass::AlignedSharedBetween) {
        // Only the diagonal side of the triangle is new information here; the
        // axis-parallel sides coincide with the single-TDOA bounds.
        const Eigen::Vector2d normal(geom.c(+1, -1, -1), geom.c(-1, +1, -1));
        const double rhs = geom.d_kj * geom.c(+1, +1, -1);
        const double lhs = normal.x() * tau_ji + normal.y() * tau_ki;
        if (lhs <= rhs) return 0.0;
        return std::abs(lhs - rhs) / mahalanobis_normal_norm(normal, cov2);
    }

    const Eigen::Vector2d normal_ji(geom.c(-1, -1, +1), 2.0 * geom.d_ji);
    const double rhs_ji = geom.d_ji * geom.c(-1, +1, +1);
    const bool first_holds = normal_ji.x() * tau_ji + normal_ji.y() * tau_ki <= rhs_ji;

    const Eigen::Vector2d normal_ki(2.0 * geom.d_ki, geom.c(-1, -1, +1));
    const double rhs_ki = geom.d_ki * geom.c(+1, -1, +1);
    const bool second_holds = normal_ki.x() * tau_ji + normal_ki.y() * tau_ki <= rhs_ki;

    if (first_holds && !second_holds) {
        const double lhs = normal_ki.x() * tau_ji + normal_ki.y() * tau_ki;
        return std::abs(lhs - rhs_ki) / mahalanobis_normal_norm(normal_ki, cov2);
    }
    if (second_holds && !first_holds) {
        const double lhs = normal_ji.x() * tau_ji + normal_ji.y() * tau_ki;
        return std::abs(lhs - rhs_ji) / mahalanobis_normal_norm(normal_ji, cov2);
    }
    return 0.0;
}

double group_distance(const Eigen::Vector2d& tau_pair, const PlanarTripleGeometry& geom,
                      const Eigen::Matrix2d& cov2) {
    return geom.classification == TripleClass::General
               ? strip_distance_general(tau_pair, geom, cov2)
               : aligned_distance(tau_pair, geom, cov2);
}

double zsc_plane_distance(const Eigen::Vector3d& triple, const Eigen::Matrix3d& cov3) {
    const Eigen::Vector3d normal(1.0, -1.0, 1.0);
    const double denom = mahalanobis_normal_norm(normal, cov3);
    return std::abs(triple.x() - triple.y() + triple.z()) / denom;
}

int relation_space_dimension(const SensorArray& array, int num_sources, std::uint64_t rng_seed) {
    const int q = array.pair_count();
    if (num_sources < q)
        throw std::invalid_argument("relation-space sampling needs at least q sources");

    double diameter = 0.0;
    for (int j = 1; j <= array.last_index(); ++j)
        for (int i = 0; i < j; ++i) diameter = std::max(diameter, array.distance(j, i));
    const Eigen::Vector3d center = array.centroid();
    const double half_width = 2.0 * diameter;

    Rng rng(rng_seed);
    Eigen::MatrixXd stacked(num_sources, q);
    for (int s = 0; s < num_sources; ++s) {
        const Eigen::Vector3d x =
            center + Eigen::Vector3d(rng.uniform(-half_width, half_width),
                                     rng.uniform(-half_width, half_width),
                                     rng.uniform(-half_width, half_width));
        const TdoaSet set = tdoa_map(x, array);
        for (const auto& [pair, value] : set.entries())
            stacked(s, pair_linear_index(pair)) = value;
    }

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked);
    const auto& sv = svd.singularValues();
    const double sigma_max = sv(0);
    if (!(sigma_max > 0.0))
        throw std::runtime_error("degenerate sample: all TDOA vectors vanish");

    int rank = 0;
    for (Eigen::Index idx = 0; idx < sv.size(); ++idx) {
        const double ratio = sv(idx) / sigma_max;
        if (ratio > 1e-10 && ratio < 1e-6)
            throw std::runtime_error("relation-space rank is ambiguous: singular value in the gray band");
        if (ratio >= 1e-8) ++rank;
    }
    return q - rank;
}

}  // namespace tdoa
