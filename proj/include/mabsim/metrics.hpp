#pragma once

// Operating characteristics aggregated over replications of one configuration.

#include <array>
#include <span>
#include <stdexcept>

#include "mabsim/core.hpp"

namespace mabsim {

struct ArmSummary {
    /// Replications where the arm had at least one observed outcome.
    int defined_count = 0;
    double undefined_fraction = 0.0;
    double mean_estimate = 0.0;        // mean observed-only p_hat
    double bias = 0.0;                 // mean p_hat - p_k
    double se_bias = 0.0;
    double mean_assigned = 0.0;        // E[N_{k,n}], all replications
    double cov_assigned_estimate = 0.0;// Cov[N_{k,n}, p_hat]
    double cov_over_mean_assigned = 0.0;
    // Bias identity Cov[N, p_hat]/E[N] = p - E[p_hat], with N the number of
    // observed outcomes (so that N * p_hat = S holds exactly).
    double identity_residual = 0.0;
    double identity_residual_se = 0.0;  // bootstrap
};

struct AggregateReport {
    int replications = 0;
    double mean_pstar = 0.0;
    double se_pstar = 0.0;
    double mean_ons = 0.0;   // observed successes, imputed excluded
    double se_ons = 0.0;
    double mean_missing = 0.0;
    std::array<ArmSummary, kArmCount> arms{};
};

struct AggregateOptions {
    int bootstrap_resamples = 200;
    std::uint64_t bootstrap_seed = 0x5EEDB007ull;
};

/// Folds replications (in index order) into a report. Needs R >= 2 results
/// sharing one configuration whose scenario equals `scenario`; replications
/// without an observed outcome on an arm are left out of that arm's
/// estimate-based statistics and counted in undefined_fraction.
AggregateReport aggregate(std::span<const TrialResult> results, const Scenario& scenario,
                          const AggregateOptions& options = {});

class UnusableEstimate : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct ResidualEstimate {
    double value = 0.0;
    double bootstrap_se = 0.0;
};

/// Cov[N, p_hat]/E[N] - (p_k - E[p_hat]) for one arm. Throws UnusableEstimate
/// when more than `max_undefined_fraction` of replications left p_hat undefined.
ResidualEstimate bias_identity_residual(const AggregateReport& report, int arm,
                                        double max_undefined_fraction = 0.01);

}  // namespace mabsim
