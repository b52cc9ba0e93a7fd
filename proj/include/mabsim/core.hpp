#pragma once

// Shared state, configuration and result types for two-armed Bernoulli
// allocation with missing-at-random outcomes.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mabsim {

inline constexpr int kArmCount = 2;
inline constexpr int kControl = 0;
inline constexpr int kExperimental = 1;

/// Beta pseudo-counts plus observed / missing / imputed counters for one arm.
///
/// Policies see the decision state (prior + observed + imputed); metrics read
/// the observed counters only.
struct ArmState {
    double prior_successes = 1.0;
    double prior_failures = 1.0;
    std::int64_t observed_successes = 0;
    std::int64_t observed_failures = 0;
    std::int64_t missing_count = 0;
    std::int64_t imputed_successes = 0;
    std::int64_t imputed_failures = 0;

    std::int64_t assigned() const { return observed_successes + observed_failures + missing_count; }
    std::int64_t observed() const { return observed_successes + observed_failures; }
    std::int64_t imputed() const { return imputed_successes + imputed_failures; }

    /// Beta parameters that drive allocation decisions.
    double decision_alpha() const {
        return prior_successes + static_cast<double>(observed_successes + imputed_successes);
    }
    double decision_beta() const {
        return prior_failures + static_cast<double>(observed_failures + imputed_failures);
    }

    bool operator==(const ArmState&) const = default;
};

using ArmPair = std::array<ArmState, kArmCount>;

/// (s0 + S) / (s0 + f0 + S + F), counting imputed outcomes when present.
double posterior_mean(const ArmState& state);

/// s0 + f0 + S + F: the pseudo-count mass behind every lambda_k(t) term.
double effective_observation_count(const ArmState& state);

/// True success probabilities and trial size.
struct Scenario {
    std::string label;
    double p_control = 0.5;
    double p_experimental = 0.5;
    int trial_size = 1;

    double p(int arm) const { return arm == kControl ? p_control : p_experimental; }
    /// Throws std::invalid_argument on out-of-range fields.
    void validate() const;

    bool operator==(const Scenario&) const = default;
};

struct MissingnessProfile {
    double p0_missing = 0.0;
    double p1_missing = 0.0;

    double p(int arm) const { return arm == kControl ? p0_missing : p1_missing; }
    /// Probabilities must lie in [0, max_probability]; max_probability <= 1.
    void validate(double max_probability = 0.5) const;

    bool operator==(const MissingnessProfile&) const = default;
};

enum class Algorithm { FR, TTS, RTS, RPW, CB, GI, UCB, RandUCB, RBI, RGI };

inline constexpr std::array<Algorithm, 10> kAllAlgorithms = {
    Algorithm::FR, Algorithm::TTS, Algorithm::RTS,     Algorithm::RPW, Algorithm::CB,
    Algorithm::GI, Algorithm::UCB, Algorithm::RandUCB, Algorithm::RBI, Algorithm::RGI};

std::string_view to_string(Algorithm algorithm);
/// Case-sensitive; throws std::invalid_argument listing the valid names.
Algorithm parse_algorithm(std::string_view name);

/// How the Thompson exponent c is chosen.
enum class ExponentMode { time_varying, fixed };

/// Which algorithm runs, plus the tuning parameters it reads.
struct PolicySpec {
    Algorithm algorithm = Algorithm::FR;
    ExponentMode exponent_mode = ExponentMode::fixed;
    double fixed_exponent = 0.0;
    double discount = 0.99;
    int randucb_points = 20;
    double randucb_lower = 0.0;
    double randucb_upper = 1.0;
    // Replace [L, U] by [beta_t, beta_t] at every decision (UCB recovery).
    bool randucb_tracks_ucb_beta = false;
    double perturbation_mean = static_cast<double>(kArmCount);

    /// Default tuning for the given algorithm.
    static PolicySpec defaults(Algorithm algorithm);

    bool needs_gittins() const { return algorithm == Algorithm::GI || algorithm == Algorithm::RGI; }
    void validate() const;

    bool operator==(const PolicySpec&) const = default;
};

enum class Outcome : std::uint8_t { success, failure, missing };

/// Priors shared by both arms.
struct Prior {
    double successes = 1.0;
    double failures = 1.0;

    bool operator==(const Prior&) const = default;
};

enum class ImputationMode { none, mean_default_half, mean_default_nine_tenths, mean_after_first_observation };

std::string_view to_string(ImputationMode mode);
ImputationMode parse_imputation_mode(std::string_view name);

/// Identifies the configuration a trial was run under.
struct TrialConfig {
    Scenario scenario;
    MissingnessProfile missingness;
    PolicySpec policy;
    ImputationMode mode = ImputationMode::none;

    bool operator==(const TrialConfig&) const = default;
};

struct TrialResult {
    TrialConfig config;
    ArmPair arms;
    std::vector<std::uint8_t> assignments;
    std::vector<Outcome> outcomes;
    /// Observed-only S/(S+F); NaN when the arm has no observed outcome.
    std::array<double, kArmCount> final_estimates{};
    /// N_1 / n; NaN when n = 0.
    double pstar = 0.0;

    std::int64_t trial_size() const { return static_cast<std::int64_t>(assignments.size()); }
    std::int64_t observed_successes_total() const {
        return arms[0].observed_successes + arms[1].observed_successes;
    }
};

}  // namespace mabsim
