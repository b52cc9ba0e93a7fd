#pragma once

#include <optional>

#include "mabsim/core.hpp"
#include "mabsim/gittins.hpp"
#include "mabsim/rng.hpp"

namespace mabsim {

/// Observed-only success rate used for mean imputation.
///
/// S/(S+F) once the arm has an observed outcome. Before that: 0.5 or 0.9 for
/// the default-value modes, and no estimate (nothing is imputed) for
/// mean_after_first_observation. Throws for ImputationMode::none.
std::optional<double> current_success_estimate(const ArmState& state, ImputationMode mode);

/// Largest s + f a trial can reach: n plus the prior mass.
std::int64_t max_decision_level(const Scenario& scenario, const Prior& prior);

/// Runs one trial of n patients.
///
/// For t = 1..n: the policy picks arm k from the decision state; the outcome is
/// missing iff u_miss < p_k^m, in which case imputation modes may add an
/// imputed success (u_imp < p_hat) or failure to the decision state; otherwise
/// the outcome is a success iff u_out < p_k. All draws are indexed by t, so
/// runs that differ only in imputation consume identical allocation, outcome
/// and missingness draws.
///
/// Throws std::invalid_argument when a Gittins-based policy has no table or
/// the table is too small for n plus the prior mass.
TrialResult run_trial(const Scenario& scenario, const MissingnessProfile& missingness, const PolicySpec& policy,
                      ImputationMode mode, const ReplicationRng& rng, const GittinsTable* gittins = nullptr,
                      const Prior& prior = {});

}  // namespace mabsim
