// Sensor-array geometry and the range-difference (TDOA) feasible sets.
//
// Conventions used throughout the library:
//  * propagation speed is 1, so TDOAs are range differences in meters;
//  * a measurement tau_ji refers to the ordered sensor pair (j, i) and
//    equals ||x - m_j|| - ||x - m_i||; storage is canonical with j > i and
//    tau_ij = -tau_ji is materialized through sign flags;
//  * the complete measurement vector enumerates pairs (1,0), (2,0), (2,1),
//    (3,0), ... i.e. lexicographic in (j, i). Covariance matrices follow the
//    same ordering.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace tdoa {

/// Ordered sensor pair in canonical orientation, 0 <= i < j.
struct PairIndex {
    int j = 0;
    int i = 0;

    friend auto operator<=>(const PairIndex&, const PairIndex&) = default;
};

/// Canonical pair for two distinct sensor indices plus the sign that maps the
/// stored value onto the requested orientation (a, b) -> tau_ab.
struct OrientedPair {
    PairIndex pair;
    double sign = 1.0;  // tau_ab = sign * stored(pair)
};

OrientedPair orient_pair(int a, int b);

/// Position of a canonical pair in the q-vector enumeration (j,i) -> j(j-1)/2 + i.
inline int pair_linear_index(PairIndex p) noexcept { return p.j * (p.j - 1) / 2 + p.i; }

/// All q = n(n+1)/2 canonical pairs for sensors 0..n, in enumeration order.
std::vector<PairIndex> enumerate_pairs(int last_sensor);

/// Immutable set of n+1 distinct sensor positions with cached pairwise distances.
class SensorArray {
public:
    explicit SensorArray(std::vector<Eigen::Vector3d> positions);

    int last_index() const noexcept { return static_cast<int>(positions_.size()) - 1; }
    std::size_t size() const noexcept { return positions_.size(); }
    int pair_count() const noexcept {
        const int n = last_index();
        return n * (n + 1) / 2;
    }
    const Eigen::Vector3d& position(int s) const { return positions_.at(static_cast<std::size_t>(s)); }
    const std::vector<Eigen::Vector3d>& positions() const noexcept { return positions_; }

    /// d_ji = ||m_j - m_i||; symmetric, zero diagonal.
    double distance(int j, int i) const { return dist_(j, i); }
    double distance(PairIndex p) const { return dist_(p.j, p.i); }

    Eigen::Vector3d centroid() const;

private:
    std::vector<Eigen::Vector3d> positions_;
    Eigen::MatrixXd dist_;
};

/// Sparse map from canonical pairs to measured range differences (meters).
class TdoaSet {
public:
    TdoaSet() = default;

    /// Stores tau_ab for any orientation; flips sign into canonical storage.
    void set(int a, int b, double value);
    void set(PairIndex p, double value) { entries_[p] = value; }

    /// Signed accessor: get(a, b) returns tau_ab if the canonical pair is present.
    std::optional<double> get(int a, int b) const;
    std::optional<double> get(PairIndex p) const;

    bool contains(PairIndex p) const { return entries_.count(p) != 0; }
    void erase(PairIndex p) { entries_.erase(p); }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    const std::map<PairIndex, double>& entries() const noexcept { return entries_; }

    friend bool operator==(const TdoaSet&, const TdoaSet&) = default;

private:
    std::map<PairIndex, double> entries_;
};

/// A G=2 (shared-sensor pair) or G=3 (closed triple) measurement group.
/// Members are canonical pairs; signs map stored values onto the oriented
/// components (tau_ji, tau_ki[, tau_kj]) used by the statistical tests.
struct TripleGroup {
    enum class Kind { SharedPair, Triple };

    Kind kind = Kind::Triple;
    int i = 0, j = 0, k = 0;  // SharedPair: shared i, j < k. Triple: i < j < k.
    std::array<PairIndex, 3> members{};
    std::array<double, 3> signs{1.0, 1.0, 1.0};
    int member_count = 3;

    static TripleGroup shared_pair(int shared, int j, int k);
    static TripleGroup triple(int i, int j, int k);
};

enum class TripleClass {
    General,               // sensors span a nondegenerate triangle
    AlignedSharedBetween,  // collinear, shared sensor i between j and k
    AlignedSharedOutside,  // collinear, shared sensor i outside segment [j,k]
};

/// Geometry of a sensor triple (shared sensor i, others j, k) reduced to the
/// plane of the oriented TDOA pair (tau_ji, tau_ki).
///
/// The feasible set of a triple depends only on the pairwise distances, so
/// arbitrary 3D triples are handled through a distance-preserving planar
/// embedding: m_i at the origin, m_j on the positive x axis, m_k in the
/// upper half plane (counterclockwise orientation, W >= 0).
struct PlanarTripleGeometry {
    int i = 0, j = 0, k = 0;
    TripleClass classification = TripleClass::General;
    double d_ji = 0, d_ki = 0, d_kj = 0;

    Eigen::Vector2d disp_j{0, 0};  // planar embedding of m_j - m_i
    Eigen::Vector2d disp_k{0, 0};  // planar embedding of m_k - m_i
    double area_det = 0;           // W = det[disp_j disp_k]; 0 when aligned

    Eigen::Vector2d vertex_r0{0, 0};  // TDOA pair of a source at m_i
    Eigen::Vector2d vertex_r1{0, 0};  // ... at m_j
    Eigen::Vector2d vertex_r2{0, 0};  // ... at m_k

    /// c^{s1 s2 s3} = s1*d_ji + s2*d_ki + s3*d_kj (signs are +-1).
    double c(int s1, int s2, int s3) const noexcept {
        return s1 * d_ji + s2 * d_ki + s3 * d_kj;
    }
    double scale() const noexcept { return std::max({d_ji, d_ki, d_kj}); }

    /// Inscribed-ellipse polynomial a(tau); negative inside E. General case only.
    double ellipse_a(const Eigen::Vector2d& tau) const;
    /// Cubic polynomial b(tau); the feasible lobes of the hexagon lie in b > 0.
    double cubic_b(const Eigen::Vector2d& tau) const;
};

/// Default relative tolerance for deciding that three sensors are collinear.
inline constexpr double kDefaultAlignmentTol = 1e-6;

/// Membership tolerance: boundaries are treated as closed within
/// 1e-12 * (scale power matching the polynomial's degree).
inline constexpr double kMembershipTol = 1e-12;

/// Complete noiseless TDOA map: all q range differences of `array` for a
/// source at `x`. Defined for every x, including x at a sensor.
TdoaSet tdoa_map(const Eigen::Vector3d& x, const SensorArray& array);

/// Feasible interval of a single TDOA, [-d_ji, d_ji].
struct Interval {
    double lo = 0, hi = 0;
    bool contains(double v) const noexcept { return lo <= v && v <= hi; }
};
Interval theta1_interval(PairIndex pair, const SensorArray& array);

/// Classifies the triple with shared sensor i and computes the planar data
/// used by membership tests and simplified distances. Alignment is declared
/// when the largest pairwise distance equals the sum of the other two within
/// `alignment_tol` times the largest distance.
PlanarTripleGeometry classify_triple(int i, int j, int k, const SensorArray& array,
                                     double alignment_tol = kDefaultAlignmentTol);

/// Exact membership of the oriented pair (tau_ji, tau_ki) in the feasible set
/// of the triple. Boundaries count as inside (closed-set convention).
bool theta2_membership(const Eigen::Vector2d& tau_pair, const PlanarTripleGeometry& geom);

/// Simplified distance from an oriented pair to the feasible strip
/// |tau_ki - tau_ji| <= d_kj, in Mahalanobis units of cov2. Requires a
/// General-classified triple; cov2 must be symmetric positive definite.
double strip_distance_general(const Eigen::Vector2d& tau_pair, const PlanarTripleGeometry& geom,
                              const Eigen::Matrix2d& cov2);

/// Simplified distance for aligned triples: distance to the line supporting
/// the violated side of the feasible triangle, 0 if no side is violated.
/// Assumes the input already passed the single-TDOA acceptance test.
double aligned_distance(const Eigen::Vector2d& tau_pair, const PlanarTripleGeometry& geom,
                        const Eigen::Matrix2d& cov2);

/// Mahalanobis distance from the oriented triple (tau_ji, tau_ki, tau_kj) to
/// the zero-sum plane tau_ji - tau_ki + tau_kj = 0.
double zsc_plane_distance(const Eigen::Vector3d& triple, const Eigen::Matrix3d& cov3);

/// Simplified distance of a group's oriented measurements, dispatching on the
/// triple classification (strip for General, triangle sides for aligned).
double group_distance(const Eigen::Vector2d& tau_pair, const PlanarTripleGeometry& geom,
                      const Eigen::Matrix2d& cov2);

/// Numerically measures the dimension of the space of linear relations among
/// the q TDOA coordinates by sampling `num_sources` random sources and
/// computing q minus the rank of the stacked measurement matrix. Throws if
/// the singular-value spectrum has no clean gap.
int relation_space_dimension(const SensorArray& array, int num_sources, std::uint64_t rng_seed);

}  // namespace tdoa
