// Monte-Carlo experiment generator and metrics engine: array presets, noise
// and outlier injection, TPR/TNR/mean-error evaluation and campaign
// aggregation. Campaigns are reproducible: every trial derives its own RNG
// stream from (master_seed, position, run, Z) and aggregation is a
// deterministic fold over sorted trial keys.

#pragma once

#include "tdoa/removal.hpp"
#include "tdoa/rng.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tdoa {

enum class ArrayPresetKind { Linear7, Cross7 };

/// Seven collinear sensors on the x axis, 10 cm spacing, centered at the origin.
SensorArray linear7();
/// Seven sensors: origin plus +-30 cm along each coordinate axis.
SensorArray cross7();
SensorArray make_preset(ArrayPresetKind kind);

/// Region the trial sources are drawn from, uniformly. The linear preset
/// uses a disk in its z = 0 plane, the cross preset a ball.
struct SourceDomain {
    enum class Shape { PlanarDisk, Ball };
    Shape shape = Shape::Ball;
    Eigen::Vector3d center{0, 0, 0};
    double radius = 2.0;
};

SourceDomain preset_domain(ArrayPresetKind kind, const SensorArray& array);

/// Uniform draw from the domain; draws closer than 1 cm to a sensor are
/// rejected and resampled.
Eigen::Vector3d sample_source(const SourceDomain& domain, const SensorArray& array, Rng& rng);

/// Adds independent N(0, sigma^2) noise to every entry.
TdoaSet inject_noise(const TdoaSet& clean, double sigma, Rng& rng);

struct OutlierInjection {
    TdoaSet corrupted;
    std::vector<PairIndex> truth;  // pairs that were replaced, sorted
};

/// Replaces `num_outliers` distinct entries (chosen uniformly without
/// replacement among the present pairs) with draws that are uniform on the
/// single-TDOA acceptance interval minus the (1-alpha) noise band around the
/// clean value: outliers survive pre-processing but are detectably wrong.
OutlierInjection inject_outliers(const TdoaSet& noisy, const TdoaSet& clean,
                                 const SensorArray& array, int num_outliers, double sigma,
                                 double alpha, Rng& rng);

struct TrialResult {
    std::optional<double> tpr;          // undefined when Z = 0
    std::optional<double> tnr;          // undefined when Z = q
    double me_raw = 0.0;                // mean |corrupted - clean| over all pairs
    std::optional<double> me_filtered;  // over survivors; undefined if none survive
    int removed_count = 0;
};

/// Confusion metrics of one removal run against the injection ground truth.
TrialResult evaluate_trial(const RemovalReport& report, const std::vector<PairIndex>& truth,
                           const TdoaSet& clean, const TdoaSet& corrupted);

struct CampaignConfig {
    SensorArray array;
    SourceDomain domain;
    std::vector<int> outlier_counts;
    int positions = 20;
    int runs = 100;
    double sigma = 0.007;
    double alpha = 0.05;
    std::vector<ExplorationMode> modes;
    std::uint64_t master_seed = 1;
    int threads = 1;
};

struct CampaignRow {
    ExplorationMode mode = ExplorationMode::G2ThenG3;
    int z = 0;
    std::optional<double> mean_tpr, se_tpr;
    std::optional<double> mean_tnr, se_tnr;
    double mean_me_raw = 0.0;
    std::optional<double> mean_me_filtered;
    long trials = 0;
};

/// Runs positions x runs trials for every Z and scores them under every mode.
/// All modes see identical corrupted measurement sets. Thread count only
/// affects wall time, never results.
std::vector<CampaignRow> run_campaign(const CampaignConfig& config);

/// Frozen CSV schema:
/// mode,Z,mean_tpr,se_tpr,mean_tnr,se_tnr,mean_me_raw,mean_me_filtered,trials
/// Undefined statistics are written as NA.
std::string campaign_csv(const std::vector<CampaignRow>& rows);

}  // namespace tdoa
