#include "mabsim/trial.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mabsim/policies.hpp"

namespace mabsim {

std::optional<double> current_success_estimate(const ArmState& state, ImputationMode mode) {
    const auto observed = state.observed();
    if (observed > 0) {
        if (mode == ImputationMode::none) throw std::invalid_argument("no success estimate without imputation");
        return static_cast<double>(state.observed_successes) / static_cast<double>(observed);
    }
    switch (mode) {
        case ImputationMode::mean_default_half:
            return 0.5;
        case ImputationMode::mean_default_nine_tenths:
            return 0.9;
        case ImputationMode::mean_after_first_observation:
            return std::nullopt;
        case ImputationMode::none:
            break;
    }
    throw std::invalid_argument("no success estimate without imputation");
}

std::int64_t max_decision_level(const Scenario& scenario, const Prior& prior) {
    return static_cast<std::int64_t>(std::ceil(prior.successes + prior.failures)) + scenario.trial_size;
}

TrialResult run_trial(const Scenario& scenario, const MissingnessProfile& missingness, const PolicySpec& policy,
                      ImputationMode mode, const ReplicationRng& rng, const GittinsTable* gittins,
                      const Prior& prior) {
    if (scenario.trial_size < 0) throw std::invalid_argument("trial size must be non-negative");
    if (policy.needs_gittins()) {
        if (!gittins) throw std::invalid_argument(std::string(to_string(policy.algorithm)) + " needs a Gittins table");
        if (gittins->discount() != policy.discount) {
            throw std::invalid_argument("Gittins table discount does not match the policy's");
        }
        if (max_decision_level(scenario, prior) > gittins->max_level()) {
            throw std::invalid_argument("Gittins table (s + f <= " + std::to_string(gittins->max_level()) +
                                        ") too small for trial size " + std::to_string(scenario.trial_size));
        }
    }

    const int n = scenario.trial_size;
    TrialResult result;
    result.config = TrialConfig{scenario, missingness, policy, mode};
    for (auto& arm : result.arms) {
        arm.prior_successes = prior.successes;
        arm.prior_failures = prior.failures;
    }
    result.assignments.reserve(static_cast<std::size_t>(n));
    result.outcomes.reserve(static_cast<std::size_t>(n));

    DecisionContext ctx{&policy, &result.arms, 1, n, gittins};
    for (int t = 1; t <= n; ++t) {
        ctx.t = t;
        const PatientDraws draws(rng, static_cast<std::uint32_t>(t));
        const int k = select_arm(ctx, draws).chosen_arm;
        ArmState& arm = result.arms[k];
        Outcome outcome;
        if (draws.uniform(Substream::missingness) < missingness.p(k)) {
            outcome = Outcome::missing;
            ++arm.missing_count;
            if (mode != ImputationMode::none) {
                if (const auto estimate = current_success_estimate(arm, mode)) {
                    if (draws.uniform(Substream::imputation) < *estimate) {
                        ++arm.imputed_successes;
                    } else {
                        ++arm.imputed_failures;
                    }
                }
            }
        } else if (draws.uniform(Substream::outcome) < scenario.p(k)) {
            outcome = Outcome::success;
            ++arm.observed_successes;
        } else {
            outcome = Outcome::failure;
            ++arm.observed_failures;
        }
        result.assignments.push_back(static_cast<std::uint8_t>(k));
        result.outcomes.push_back(outcome);
    }

    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (int k = 0; k < kArmCount; ++k) {
        const auto& arm = result.arms[k];
        result.final_estimates[k] = arm.observed() > 0 ? static_cast<double>(arm.observed_successes) /
                                                             static_cast<double>(arm.observed())
                                                       : nan;
    }
    result.pstar = n > 0 ? static_cast<double>(result.arms[kExperimental].assigned()) / n : nan;
    return result;
}

}  // namespace mabsim
