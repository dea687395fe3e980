#include "tdoa/removal.hpp"

#include "tdoa/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tdoa {

std::vector<StageKind> stages_of(ExplorationMode mode) {
    switch (mode) {
        case ExplorationMode::G2: return {StageKind::G2};
        case ExplorationMode::G3: return {StageKind::G3};
        case ExplorationMode::G2ThenG3: return {StageKind::G2, StageKind::G3};
        case ExplorationMode::G3ThenG2: return {StageKind::G3, StageKind::G2};
    }
    return {};
}

std::string to_string(ExplorationMode mode) {
    switch (mode) {
        case ExplorationMode::G2: return "g2";
        case ExplorationMode::G3: return "g3";
        case ExplorationMode::G2ThenG3: return "g2g3";
        case ExplorationMode::G3ThenG2: return "g3g2";
    }
    return "?";
}

std::string to_string(StageKind stage) { return stage == StageKind::G2 ? "g2" : "g3"; }

std::optional<ExplorationMode> parse_mode(const std::string& text) {
    if (text == "g2") return ExplorationMode::G2;
    if (text == "g3") return ExplorationMode::G3;
    if (text == "g2g3") return ExplorationMode::G2ThenG3;
    if (text == "g3g2") return ExplorationMode::G3ThenG2;
    return std::nullopt;
}

GroupTable GroupTable::build(StageKind kind, const TdoaSet& set, const SensorArray& array,
                             const CovarianceModel& covariance, double alignment_tol,
                             RemovalCounters* counters) {
    GroupTable table;
    table.kind_ = kind;
    for (const auto& [pair, value] : set.entries()) table.pairs_.push_back(pair);

    const int n = array.last_index();
    const auto oriented_value = [&](PairIndex member, double sign) {
        return sign * *set.get(member);
    };

    const auto add_group = [&](TripleGroup group) {
        for (int m = 0; m < group.member_count; ++m)
            if (!set.contains(group.members[static_cast<std::size_t>(m)])) return;

        GroupEntry entry;
        entry.group = group;
        if (kind == StageKind::G2) {
            const PlanarTripleGeometry geom =
                classify_triple(group.i, group.j, group.k, array, alignment_tol);
            const Eigen::Vector2d tau(oriented_value(group.members[0], group.signs[0]),
                                      oriented_value(group.members[1], group.signs[1]));
            entry.distance = group_distance(tau, geom, covariance.pair_block(group, n));
            entry.raw_pvalue = g2_pvalue(entry.distance);
        } else {
            const Eigen::Vector3d tau(oriented_value(group.members[0], group.signs[0]),
                                      oriented_value(group.members[1], group.signs[1]),
                                      oriented_value(group.members[2], group.signs[2]));
            entry.distance = zsc_plane_distance(tau, covariance.triple_block(group, n));
            entry.raw_pvalue = g3_pvalue(entry.distance);
        }
        if (counters) ++counters->group_evaluations;

        const std::size_t id = table.groups_.size();
        table.groups_.push_back(entry);
        ++table.alive_groups_;
        for (int m = 0; m < group.member_count; ++m)
            table.groups_by_pair_[group.members[static_cast<std::size_t>(m)]].push_back(id);
    };

    if (kind == StageKind::G2) {
        for (int shared = 0; shared <= n; ++shared)
            for (int j = 0; j <= n; ++j) {
                if (j == shared) continue;
                for (int k = j + 1; k <= n; ++k) {
                    if (k == shared) continue;
                    add_group(TripleGroup::shared_pair(shared, j, k));
                }
            }
    } else {
        for (int i = 0; i <= n; ++i)
            for (int j = i + 1; j <= n; ++j)
                for (int k = j + 1; k <= n; ++k) add_group(TripleGroup::triple(i, j, k));
    }
    return table;
}

std::vector<double> GroupTable::alive_pvalues(PairIndex pair) const {
    std::vector<double> pvalues;
    const auto it = groups_by_pair_.find(pair);
    if (it == groups_by_pair_.end()) return pvalues;
    for (std::size_t id : it->second)
        if (groups_[id].alive) pvalues.push_back(groups_[id].raw_pvalue);
    return pvalues;
}

void GroupTable::remove_pair(PairIndex pair) {
    const auto pair_it = std::find(pairs_.begin(), pairs_.end(), pair);
    if (pair_it == pairs_.end()) return;
    pairs_.erase(pair_it);
    const auto it = groups_by_pair_.find(pair);
    if (it == groups_by_pair_.end()) return;
    for (std::size_t id : it->second) {
        if (groups_[id].alive) {
            groups_[id].alive = false;
            --alive_groups_;
        }
    }
}

std::pair<TdoaSet, std::vector<PreprocessedTdoa>> preprocess_g1(const TdoaSet& set,
                                                                const SensorArray& array,
                                                                const CovarianceModel& covariance,
                                                                double alpha) {
    const int n = array.last_index();
    TdoaSet kept;
    std::vector<PreprocessedTdoa> removed;
    for (const auto& [pair, value] : set.entries()) {
        if (pair.j > n)
            throw std::invalid_argument("measurement references a sensor outside the array");
        const double d = array.distance(pair);
        const double sigma = covariance.sigma(pair, n);
        const G1Result g1 = g1_test(value, d, sigma, alpha);
        if (g1.outcome.reject)
            removed.push_back(PreprocessedTdoa{pair, value, g1.outcome.pvalue});
        else
            kept.set(pair, value);
    }
    return {std::move(kept), std::move(removed)};
}

IterationRecord iterate_once(const GroupTable& table, double alpha, double fisher_floor,
                             RemovalCounters* counters) {
    IterationRecord record;
    record.stage = table.kind();

    for (const PairIndex& pair : table.pairs()) {
        const std::vector<double> raw = table.alive_pvalues(pair);
        if (raw.empty()) {
            record.untestable.push_back(pair);
            continue;
        }
        if (counters) counters->bh_sorted_elements += static_cast<long>(raw.size());
        record.min_adjusted[pair] = bh_adjust(raw).min_adjusted;
        const FisherResult fisher = fisher_combine(raw, fisher_floor);
        record.fisher_t[pair] = fisher.statistic;
        record.fisher_floor_hit = record.fisher_floor_hit || fisher.floored;
    }

    if (record.min_adjusted.empty()) {
        record.stopped = true;
        return record;
    }

    double min_lambda_bar = 1.0;
    for (const auto& [pair, lambda_bar] : record.min_adjusted)
        min_lambda_bar = std::min(min_lambda_bar, lambda_bar);
    if (min_lambda_bar > alpha) {
        record.stopped = true;
        return record;
    }

    double max_t = -std::numeric_limits<double>::infinity();
    for (const auto& [pair, t] : record.fisher_t) max_t = std::max(max_t, t);
    for (const auto& [pair, t] : record.fisher_t)
        if (t == max_t) record.removed.push_back(pair);
    return record;
}

std::vector<PairIndex> RemovalReport::removed_pairs() const {
    std::vector<PairIndex> removed;
    for (const IterationRecord& record : iterations)
        removed.insert(removed.end(), record.removed.begin(), record.removed.end());
    return removed;
}

std::vector<PairIndex> RemovalReport::all_removed_pairs() const {
    std::vector<PairIndex> removed;
    for (const PreprocessedTdoa& entry : preprocessed_out) removed.push_back(entry.pair);
    const std::vector<PairIndex> stage_removed = removed_pairs();
    removed.insert(removed.end(), stage_removed.begin(), stage_removed.end());
    return removed;
}

RemovalReport remove_outliers(const TdoaSet& set, const SensorArray& array,
                              const RemovalConfig& config) {
    if (!(config.alpha > 0.0 && config.alpha < 0.5))
        throw std::invalid_argument("removal requires alpha in (0, 1/2)");

    RemovalReport report;
    auto [current, removed_g1] = preprocess_g1(set, array, config.covariance,
                                               config.alpha_g1.value_or(config.alpha));
    report.preprocessed_out = std::move(removed_g1);

    for (const StageKind stage : stages_of(config.mode)) {
        const double stage_alpha = stage == StageKind::G2
                                       ? config.alpha_g2.value_or(config.alpha)
                                       : config.alpha_g3.value_or(config.alpha);
        GroupTable table = GroupTable::build(stage, current, array, config.covariance,
                                             config.alignment_tol, &report.counters);
        while (true) {
            ++report.counters.outer_iterations;
            IterationRecord record =
                iterate_once(table, stage_alpha, config.fisher_floor, &report.counters);
            report.fisher_floor_hit = report.fisher_floor_hit || record.fisher_floor_hit;
            const bool stopped = record.stopped;
            if (stopped) report.untestable = record.untestable;
            for (const PairIndex& pair : record.removed) {
                current.erase(pair);
                table.remove_pair(pair);
            }
            report.iterations.push_back(std::move(record));
            if (stopped) break;
        }
    }

    report.survivors = std::move(current);
    return report;
}

ProbeResult complexity_probe(int last_sensor, int num_outliers, std::uint64_t seed) {
    if (last_sensor < 2) throw std::invalid_argument("complexity probe needs at least 3 sensors");
    const int q = last_sensor * (last_sensor + 1) / 2;
    if (num_outliers < 0 || num_outliers > q)
        throw std::invalid_argument("outlier count outside [0, q]");

    Rng rng(derive_seed(seed, 0xC0FFEE));

    // Random general-position array in the unit cube; reject clustered draws.
    std::vector<Eigen::Vector3d> positions;
    while (static_cast<int>(positions.size()) <= last_sensor) {
        const Eigen::Vector3d candidate(rng.uniform(), rng.uniform(), rng.uniform());
        bool clear = true;
        for (const auto& p : positions)
            if ((candidate - p).norm() < 0.05) clear = false;
        if (clear) positions.push_back(candidate);
    }
    const SensorArray array(std::move(positions));

    const Eigen::Vector3d source(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                                 rng.uniform(-2.0, 2.0));
    TdoaSet measurements = tdoa_map(source, array);

    // Replace a random subset with gross values that still pass the
    // single-TDOA test (well inside the feasible interval, far from truth).
    std::vector<PairIndex> pool;
    for (const auto& [pair, value] : measurements.entries()) pool.push_back(pair);
    for (int z = 0; z < num_outliers; ++z) {
        const std::size_t slot =
            static_cast<std::size_t>(z) + rng.uniform_index(pool.size() - static_cast<std::size_t>(z));
        std::swap(pool[static_cast<std::size_t>(z)], pool[slot]);
        const PairIndex pair = pool[static_cast<std::size_t>(z)];
        const double d = array.distance(pair);
        const double truth = *measurements.get(pair);
        double replacement = truth;
        while (std::abs(replacement - truth) < 0.2 * d) replacement = rng.uniform(-d, d);
        measurements.set(pair, replacement);
    }

    RemovalConfig config(CovarianceModel::isotropic(1e-9));
    config.mode = ExplorationMode::G3;
    const RemovalReport report = remove_outliers(measurements, array, config);

    ProbeResult result;
    result.last_sensor = last_sensor;
    result.pair_count = q;
    result.injected_outliers = num_outliers;
    result.removed_count = static_cast<int>(report.all_removed_pairs().size());
    result.counters = report.counters;
    return result;
}

}  // namespace tdoa
