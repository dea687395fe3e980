#include "tdoa/simharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <stdexcept>
#include <thread>

namespace tdoa {

SensorArray linear7() {
    std::vector<Eigen::Vector3d> positions;
    for (int s = 0; s < 7; ++s)
        positions.emplace_back(0.1 * (static_cast<double>(s) - 3.0), 0.0, 0.0);
    return SensorArray(std::move(positions));
}

SensorArray cross7() {
    return SensorArray({{0, 0, 0},
                        {0.3, 0, 0},
                        {-0.3, 0, 0},
                        {0, 0.3, 0},
                        {0, -0.3, 0},
                        {0, 0, 0.3},
                        {0, 0, -0.3}});
}

SensorArray make_preset(ArrayPresetKind kind) {
    return kind == ArrayPresetKind::Linear7 ? linear7() : cross7();
}

SourceDomain preset_domain(ArrayPresetKind kind, const SensorArray& array) {
    SourceDomain domain;
    domain.center = array.centroid();
    domain.radius = 2.0;
    domain.shape = kind == ArrayPresetKind::Linear7 ? SourceDomain::Shape::PlanarDisk
                                                    : SourceDomain::Shape::Ball;
    return domain;
}

Eigen::Vector3d sample_source(const SourceDomain& domain, const SensorArray& array, Rng& rng) {
    while (true) {
        Eigen::Vector3d candidate;
        if (domain.shape == SourceDomain::Shape::PlanarDisk) {
            const double r = domain.radius * std::sqrt(rng.uniform());
            const double theta = 2.0 * std::numbers::pi * rng.uniform();
            candidate = domain.center + Eigen::Vector3d(r * std::cos(theta), r * std::sin(theta), 0.0);
        } else {
            const double r = domain.radius * std::cbrt(rng.uniform());
            const double z = rng.uniform(-1.0, 1.0);
            const double phi = 2.0 * std::numbers::pi * rng.uniform();
            const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
            candidate =
                domain.center + r * Eigen::Vector3d(s * std::cos(phi), s * std::sin(phi), z);
        }
        bool clear = true;
        for (const auto& p : array.positions())
            if ((candidate - p).norm() < 0.01) clear = false;
        if (clear) return candidate;
    }
}

TdoaSet inject_noise(const TdoaSet& clean, double sigma, Rng& rng) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("noise sigma must be nonnegative");
    TdoaSet noisy;
    for (const auto& [pair, value] : clean.entries()) noisy.set(pair, value + rng.normal(0.0, sigma));
    return noisy;
}

OutlierInjection inject_outliers(const TdoaSet& noisy, const TdoaSet& clean,
                                 const SensorArray& array, int num_outliers, double sigma,
                                 double alpha, Rng& rng) {
    const int present = static_cast<int>(noisy.size());
    if (num_outliers < 0 || num_outliers > present)
        throw std::invalid_argument("outlier count outside [0, number of measurements]");

    OutlierInjection result;
    result.corrupted = noisy;
    if (num_outliers == 0) return result;

    std::vector<PairIndex> pool;
    for (const auto& [pair, value] : noisy.entries()) pool.push_back(pair);
    for (int z = 0; z < num_outliers; ++z) {
        const std::size_t slot =
            static_cast<std::size_t>(z) + rng.uniform_index(pool.size() - static_cast<std::size_t>(z));
        std::swap(pool[static_cast<std::size_t>(z)], pool[slot]);
    }
    pool.resize(static_cast<std::size_t>(num_outliers));
    std::sort(pool.begin(), pool.end());

    const double gamma_accept = sigma * std::sqrt(chi2_quantile_1dof(1.0 - 2.0 * alpha));
    const double gamma_excl = sigma * std::sqrt(chi2_quantile_1dof(1.0 - alpha));

    for (const PairIndex& pair : pool) {
        const auto truth_value = clean.get(pair);
        if (!truth_value) throw std::invalid_argument("clean set lacks a measured pair");
        const double d = array.distance(pair);
        const double lo = -d - gamma_accept;
        const double hi = d + gamma_accept;
        const double left_len = std::max(0.0, (*truth_value - gamma_excl) - lo);
        const double right_len = std::max(0.0, hi - (*truth_value + gamma_excl));
        const double total = left_len + right_len;
        if (total <= 0.0)
            throw std::runtime_error("outlier replacement set is empty: sigma too large for d");
        double draw;
        if (rng.uniform() * total < left_len)
            draw = lo + rng.uniform() * left_len;
        else
            draw = (*truth_value + gamma_excl) + rng.uniform() * right_len;
        result.corrupted.set(pair, draw);
    }
    result.truth = std::move(pool);
    return result;
}

TrialResult evaluate_trial(const RemovalReport& report, const std::vector<PairIndex>& truth,
                           const TdoaSet& clean, const TdoaSet& corrupted) {
    TrialResult result;
    const int q = static_cast<int>(clean.size());
    const int z = static_cast<int>(truth.size());
    const std::set<PairIndex> truth_set(truth.begin(), truth.end());

    const std::vector<PairIndex> removed = report.all_removed_pairs();
    result.removed_count = static_cast<int>(removed.size());
    int true_removed = 0;
    for (const PairIndex& pair : removed)
        if (truth_set.count(pair)) ++true_removed;

    if (z > 0) result.tpr = static_cast<double>(true_removed) / static_cast<double>(z);
    if (z < q) {
        int inliers_kept = 0;
        for (const auto& [pair, value] : report.survivors.entries())
            if (!truth_set.count(pair)) ++inliers_kept;
        result.tnr = static_cast<double>(inliers_kept) / static_cast<double>(q - z);
    }

    double raw_sum = 0.0;
    for (const auto& [pair, value] : corrupted.entries()) raw_sum += std::abs(value - *clean.get(pair));
    result.me_raw = raw_sum / static_cast<double>(q);

    if (!report.survivors.empty()) {
        double filtered_sum = 0.0;
        for (const auto& [pair, value] : report.survivors.entries())
            filtered_sum += std::abs(value - *clean.get(pair));
        result.me_filtered = filtered_sum / static_cast<double>(report.survivors.size());
    }
    return result;
}

namespace {

struct Accumulator {
    long count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double value) {
        ++count;
        const double delta = value - mean;
        mean += delta / static_cast<double>(count);
        m2 += delta * (value - mean);
    }
    std::optional<double> standard_error() const {
        if (count < 2) return std::nullopt;
        const double variance = m2 / static_cast<double>(count - 1);
        return std::sqrt(variance / static_cast<double>(count));
    }
};

std::string format_cell(std::optional<double> value) {
    if (!value) return "NA";
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.9g", *value);
    return buffer;
}

}  // namespace

std::vector<CampaignRow> run_campaign(const CampaignConfig& config) {
    if (config.positions < 1 || config.runs < 1)
        throw std::invalid_argument("campaign needs at least one position and one run");
    if (config.modes.empty()) throw std::invalid_argument("campaign needs at least one mode");
    const int q = config.array.pair_count();
    for (int z : config.outlier_counts)
        if (z < 0 || z > q) throw std::invalid_argument("campaign Z outside [0, q]");

    std::vector<Eigen::Vector3d> sources;
    sources.reserve(static_cast<std::size_t>(config.positions));
    for (int p = 0; p < config.positions; ++p) {
        Rng rng(derive_seed(config.master_seed, 0xA001, static_cast<std::uint64_t>(p)));
        sources.push_back(sample_source(config.domain, config.array, rng));
    }

    struct TrialKey {
        int position, run, z;
    };
    std::vector<TrialKey> keys;
    for (int p = 0; p < config.positions; ++p)
        for (int r = 0; r < config.runs; ++r)
            for (int z : config.outlier_counts) keys.push_back({p, r, z});

    const std::size_t mode_count = config.modes.size();
    std::vector<TrialResult> results(keys.size() * mode_count);

    const auto run_trial = [&](std::size_t key_index) {
        const TrialKey key = keys[key_index];
        Rng rng(derive_seed(config.master_seed, static_cast<std::uint64_t>(key.position),
                            static_cast<std::uint64_t>(key.run), static_cast<std::uint64_t>(key.z)));
        const TdoaSet clean = tdoa_map(sources[static_cast<std::size_t>(key.position)], config.array);
        const TdoaSet noisy = inject_noise(clean, config.sigma, rng);
        const OutlierInjection injection =
            inject_outliers(noisy, clean, config.array, key.z, config.sigma, config.alpha, rng);
        for (std::size_t m = 0; m < mode_count; ++m) {
            RemovalConfig removal(CovarianceModel::isotropic(config.sigma));
            removal.alpha = config.alpha;
            removal.mode = config.modes[m];
            const RemovalReport report =
                remove_outliers(injection.corrupted, config.array, removal);
            results[key_index * mode_count + m] =
                evaluate_trial(report, injection.truth, clean, injection.corrupted);
        }
    };

    const int threads = std::max(1, config.threads);
    if (threads == 1) {
        for (std::size_t t = 0; t < keys.size(); ++t) run_trial(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(threads));
        for (int w = 0; w < threads; ++w)
            workers.emplace_back([&] {
                while (true) {
                    const std::size_t t = next.fetch_add(1);
                    if (t >= keys.size()) return;
                    run_trial(t);
                }
            });
        for (auto& worker : workers) worker.join();
    }

    std::vector<CampaignRow> rows;
    for (std::size_t m = 0; m < mode_count; ++m) {
        for (int z : config.outlier_counts) {
            Accumulator tpr, tnr, me_raw, me_filtered;
            long trials = 0;
            for (std::size_t t = 0; t < keys.size(); ++t) {
                if (keys[t].z != z) continue;
                const TrialResult& trial = results[t * mode_count + m];
                ++trials;
                if (trial.tpr) tpr.add(*trial.tpr);
                if (trial.tnr) tnr.add(*trial.tnr);
                me_raw.add(trial.me_raw);
                if (trial.me_filtered) me_filtered.add(*trial.me_filtered);
            }
            CampaignRow row;
            row.mode = config.modes[m];
            row.z = z;
            row.trials = trials;
            if (tpr.count > 0) {
                row.mean_tpr = tpr.mean;
                row.se_tpr = tpr.standard_error();
            }
            if (tnr.count > 0) {
                row.mean_tnr = tnr.mean;
                row.se_tnr = tnr.standard_error();
            }
            row.mean_me_raw = me_raw.mean;
            if (me_filtered.count > 0) row.mean_me_filtered = me_filtered.mean;
            rows.push_back(row);
        }
    }
    return rows;
}

std::string campaign_csv(const std::vector<CampaignRow>& rows) {
    std::string csv =
        "mode,Z,mean_tpr,se_tpr,mean_tnr,se_tnr,mean_me_raw,mean_me_filtered,trials\n";
    for (const CampaignRow& row : rows) {
        csv += to_string(row.mode);
        csv += ',';
        csv += std::to_string(row.z);
        csv += ',';
        csv += format_cell(row.mean_tpr);
        csv += ',';
        csv += format_cell(row.se_tpr);
        csv += ',';
        csv += format_cell(row.mean_tnr);
        csv += ',';
        csv += format_cell(row.se_tnr);
        csv += ',';
        csv += format_cell(row.mean_me_raw);
        csv += ',';
        csv += format_cell(row.mean_me_filtered);
        csv += ',';
        csv += std::to_string(row.trials);
        csv += '\n';
    }
    return csv;
}

}  // namespace tdoa
