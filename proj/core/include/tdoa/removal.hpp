// Iterative TDOA outlier identification: single-TDOA pre-processing, group
// tables for the G=2 / G=3 tests, and the removal loop that alternates
// Benjamini-Hochberg multiple testing (detection) with Fisher combination
// (identification) until no outliers remain.

#pragma once

#include "tdoa/geometry.hpp"
#include "tdoa/stattests.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tdoa {

enum class ExplorationMode { G2, G3, G2ThenG3, G3ThenG2 };
enum class StageKind { G2, G3 };

std::vector<StageKind> stages_of(ExplorationMode mode);
std::string to_string(ExplorationMode mode);
std::string to_string(StageKind stage);
std::optional<ExplorationMode> parse_mode(const std::string& text);

struct RemovalConfig {
    explicit RemovalConfig(CovarianceModel cov) : covariance(std::move(cov)) {}

    CovarianceModel covariance;
    double alpha = 0.05;
    ExplorationMode mode = ExplorationMode::G2ThenG3;
    // Stage-specific significance levels; alpha applies where unset.
    std::optional<double> alpha_g1;
    std::optional<double> alpha_g2;
    std::optional<double> alpha_g3;
    double fisher_floor = 1e-300;
    double alignment_tol = kDefaultAlignmentTol;
};

struct RemovalCounters {
    long outer_iterations = 0;   // while-loop passes, all stages combined
    long group_evaluations = 0;  // group distances + p-values computed
    long bh_sorted_elements = 0; // total elements fed to BH sorts
};

/// One group with its cached oriented distance and raw p-value. Group
/// statistics never change once built; only membership of the table shrinks.
struct GroupEntry {
    TripleGroup group;
    double distance = 0.0;
    double raw_pvalue = 1.0;
    bool alive = true;
};

class GroupTable {
public:
    static GroupTable build(StageKind kind, const TdoaSet& set, const SensorArray& array,
                            const CovarianceModel& covariance,
                            double alignment_tol = kDefaultAlignmentTol,
                            RemovalCounters* counters = nullptr);

    StageKind kind() const noexcept { return kind_; }
    const std::vector<GroupEntry>& groups() const noexcept { return groups_; }
    /// Remaining measurement pairs (the set U of the removal loop).
    const std::vector<PairIndex>& pairs() const noexcept { return pairs_; }
    std::size_t alive_group_count() const noexcept { return alive_groups_; }

    /// Raw p-values of the alive groups containing `pair` (the set W_ji).
    std::vector<double> alive_pvalues(PairIndex pair) const;

    /// Drops a removed pair and every group referencing it.
    void remove_pair(PairIndex pair);

private:
    StageKind kind_ = StageKind::G3;
    std::vector<GroupEntry> groups_;
    std::vector<PairIndex> pairs_;
    std::map<PairIndex, std::vector<std::size_t>> groups_by_pair_;
    std::size_t alive_groups_ = 0;
};

struct PreprocessedTdoa {
    PairIndex pair;
    double value = 0.0;
    double pvalue = 0.0;
};

struct IterationRecord {
    StageKind stage = StageKind::G3;
    std::map<PairIndex, double> min_adjusted;  // lambda-bar per tested pair
    std::map<PairIndex, double> fisher_t;
    std::vector<PairIndex> untestable;  // pairs with empty W_ji this pass
    std::vector<PairIndex> removed;     // empty on the stopping pass
    bool stopped = false;
    bool fisher_floor_hit = false;
};

struct RemovalReport {
    std::vector<PreprocessedTdoa> preprocessed_out;
    std::vector<IterationRecord> iterations;
    TdoaSet survivors;
    /// Survivors that had an empty W_ji when the final stage stopped.
    std::vector<PairIndex> untestable;
    RemovalCounters counters;
    bool fisher_floor_hit = false;

    /// Pairs removed by the group stages, in removal order.
    std::vector<PairIndex> removed_pairs() const;
    /// Group-stage removals plus the pre-processing removals.
    std::vector<PairIndex> all_removed_pairs() const;
};

/// Single-TDOA acceptance filter (the G=1 test applied to every entry).
/// Returns the surviving set and the removed entries with their p-values.
std::pair<TdoaSet, std::vector<PreprocessedTdoa>> preprocess_g1(const TdoaSet& set,
                                                                const SensorArray& array,
                                                                const CovarianceModel& covariance,
                                                                double alpha);

/// One pass of the removal loop: BH-adjusted detection followed by Fisher
/// identification. Does not mutate the table; the caller applies `removed`.
IterationRecord iterate_once(const GroupTable& table, double alpha, double fisher_floor = 1e-300,
                             RemovalCounters* counters = nullptr);

/// Full pipeline: pre-processing, then the mode's stage sequence, each stage
/// looping iterate_once and pruning its group table after every removal.
/// Deterministic: exact argmax ties are all removed in the same pass.
RemovalReport remove_outliers(const TdoaSet& set, const SensorArray& array,
                              const RemovalConfig& config);

struct ProbeResult {
    int last_sensor = 0;
    int pair_count = 0;
    int injected_outliers = 0;
    int removed_count = 0;
    RemovalCounters counters;
};

/// Instrumented removal run on a synthetic scenario: a random general-position
/// array of `last_sensor`+1 sensors, a noiseless source, and `num_outliers`
/// gross replacements, removed in G3 mode with a vanishing noise scale.
ProbeResult complexity_probe(int last_sensor, int num_outliers, std::uint64_t seed = 1);

}  // namespace tdoa
