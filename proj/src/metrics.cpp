#include "mabsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mabsim/rng.hpp"

namespace mabsim {

namespace {

struct Moments {
    double mean = 0.0;
    double se = 0.0;
};

Moments mean_and_se(const std::vector<double>& x) {
    Moments m;
    if (x.empty()) return m;
    double sum = 0.0;
    for (double v : x) sum += v;
    m.mean = sum / static_cast<double>(x.size());
    if (x.size() < 2) return m;
    double ss = 0.0;
    for (double v : x) ss += (v - m.mean) * (v - m.mean);
    m.se = std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
    return m;
}

// Unbiased sample covariance.
double covariance(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = x.size();
    if (n < 2) return 0.0;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (x[i] - mx) * (y[i] - my);
    return s / static_cast<double>(n - 1);
}

// Residual over the rows selected by `rows` (indices into count/estimate).
double residual(const std::vector<double>& count, const std::vector<double>& estimate,
                const std::vector<std::size_t>& rows, double p) {
    const auto n = rows.size();
    if (n < 2) return 0.0;
    double mc = 0.0, me = 0.0;
    for (auto r : rows) {
        mc += count[r];
        me += estimate[r];
    }
    mc /= static_cast<double>(n);
    me /= static_cast<double>(n);
    double s = 0.0;
    for (auto r : rows) s += (count[r] - mc) * (estimate[r] - me);
    const double cov = s / static_cast<double>(n - 1);
    if (mc == 0.0) return 0.0;
    return cov / mc - (p - me);
}

}  // namespace

AggregateReport aggregate(std::span<const TrialResult> results, const Scenario& scenario,
                          const AggregateOptions& options) {
    if (results.size() < 2) throw std::invalid_argument("aggregate needs at least two replications");
    const TrialConfig& config = results.front().config;
    if (!(config.scenario == scenario)) throw std::invalid_argument("aggregate: results were run on a different scenario");
    for (const auto& r : results) {
        if (!(r.config == config)) throw std::invalid_argument("aggregate: results mix configurations");
    }

    const auto replications = results.size();
    AggregateReport report;
    report.replications = static_cast<int>(replications);

    std::vector<double> pstar, ons, missing;
    pstar.reserve(replications);
    ons.reserve(replications);
    for (const auto& r : results) {
        pstar.push_back(r.pstar);
        ons.push_back(static_cast<double>(r.observed_successes_total()));
        missing.push_back(static_cast<double>(r.arms[0].missing_count + r.arms[1].missing_count));
    }
    const auto ps = mean_and_se(pstar);
    const auto os = mean_and_se(ons);
    report.mean_pstar = ps.mean;
    report.se_pstar = ps.se;
    report.mean_ons = os.mean;
    report.se_ons = os.se;
    report.mean_missing = mean_and_se(missing).mean;

    for (int k = 0; k < kArmCount; ++k) {
        ArmSummary& arm = report.arms[k];
        const double p = scenario.p(k);

        std::vector<double> assigned_all;
        std::vector<double> assigned, observed, estimate;
        for (const auto& r : results) {
            assigned_all.push_back(static_cast<double>(r.arms[k].assigned()));
            if (r.arms[k].observed() == 0) continue;
            assigned.push_back(static_cast<double>(r.arms[k].assigned()));
            observed.push_back(static_cast<double>(r.arms[k].observed()));
            estimate.push_back(r.final_estimates[k]);
        }
        arm.defined_count = static_cast<int>(estimate.size());
        arm.undefined_fraction = 1.0 - static_cast<double>(estimate.size()) / static_cast<double>(replications);
        arm.mean_assigned = mean_and_se(assigned_all).mean;

        const auto es = mean_and_se(estimate);
        arm.mean_estimate = es.mean;
        arm.bias = es.mean - p;
        arm.se_bias = es.se;
        arm.cov_assigned_estimate = covariance(assigned, estimate);
        const double mean_assigned_defined = mean_and_se(assigned).mean;
        arm.cov_over_mean_assigned = mean_assigned_defined > 0.0 ? arm.cov_assigned_estimate / mean_assigned_defined : 0.0;

        std::vector<std::size_t> rows(estimate.size());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        arm.identity_residual = residual(observed, estimate, rows, p);

        // Bootstrap over replications; resample b draws from its own
        // splitmix64 sequence so the result is independent of evaluation order.
        if (options.bootstrap_resamples >= 2 && rows.size() >= 2) {
            std::vector<double> reps;
            reps.reserve(static_cast<std::size_t>(options.bootstrap_resamples));
            std::vector<std::size_t> sample(rows.size());
            const auto size = static_cast<std::uint64_t>(rows.size());
            for (int b = 0; b < options.bootstrap_resamples; ++b) {
                std::uint64_t state = mix64(options.bootstrap_seed ^ mix64(static_cast<std::uint64_t>(k) << 32 |
                                                                           static_cast<std::uint32_t>(b)));
                for (auto& pick : sample) {
                    state += 0x9E3779B97F4A7C15ull;
                    const std::uint64_t x = mix64(state) >> 32;
                    pick = static_cast<std::size_t>((x * size) >> 32);
                }
                reps.push_back(residual(observed, estimate, sample, p));
            }
            // Standard deviation of the bootstrap replicates.
            arm.identity_residual_se = mean_and_se(reps).se * std::sqrt(static_cast<double>(reps.size()));
        }
    }
    return report;
}

ResidualEstimate bias_identity_residual(const AggregateReport& report, int arm, double max_undefined_fraction) {
    if (arm < 0 || arm >= kArmCount) throw std::out_of_range("arm index out of range");
    const ArmSummary& s = report.arms[arm];
    if (s.undefined_fraction > max_undefined_fraction) {
        throw UnusableEstimate("arm " + std::to_string(arm) + ": p_hat undefined in " +
                               std::to_string(s.undefined_fraction * 100.0) + "% of replications");
    }
    return ResidualEstimate{s.identity_residual, s.identity_residual_se};
}

}  // namespace mabsim
