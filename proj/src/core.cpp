#include "mabsim/core.hpp"

#include <cmath>
#include <stdexcept>

namespace mabsim {

namespace {

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

constexpr std::array<std::string_view, 10> kAlgorithmNames = {"FR", "TTS", "RTS", "RPW",     "CB",
                                                              "GI", "UCB", "RandUCB", "RBI", "RGI"};

constexpr std::array<std::string_view, 4> kModeNames = {
    "none", "mean_default_half", "mean_default_nine_tenths", "mean_after_first_observation"};

}  // namespace

double posterior_mean(const ArmState& state) {
    return state.decision_alpha() / (state.decision_alpha() + state.decision_beta());
}

double effective_observation_count(const ArmState& state) {
    return state.decision_alpha() + state.decision_beta();
}

void Scenario::validate() const {
    if (!is_probability(p_control) || !is_probability(p_experimental)) {
        throw std::invalid_argument("scenario '" + label + "': success probabilities must lie in [0, 1]");
    }
    if (trial_size < 1) {
        throw std::invalid_argument("scenario '" + label + "': trial size must be at least 1");
    }
}

void MissingnessProfile::validate(double max_probability) const {
    if (!(max_probability >= 0.0 && max_probability <= 1.0)) {
        throw std::invalid_argument("missingness cap must lie in [0, 1]");
    }
    for (double p : {p0_missing, p1_missing}) {
        if (!is_probability(p) || p > max_probability) {
            throw std::invalid_argument("missingness probability " + std::to_string(p) +
                                        " outside [0, " + std::to_string(max_probability) + "]");
        }
    }
}

std::string_view to_string(Algorithm algorithm) { return kAlgorithmNames[static_cast<std::size_t>(algorithm)]; }

Algorithm parse_algorithm(std::string_view name) {
    for (std::size_t i = 0; i < kAlgorithmNames.size(); ++i) {
        if (kAlgorithmNames[i] == name) return static_cast<Algorithm>(i);
    }
    std::string valid;
    for (auto n : kAlgorithmNames) {
        if (!valid.empty()) valid += ", ";
        valid += n;
    }
    throw std::invalid_argument("unknown algorithm '" + std::string(name) + "' (valid: " + valid + ")");
}

std::string_view to_string(ImputationMode mode) { return kModeNames[static_cast<std::size_t>(mode)]; }

ImputationMode parse_imputation_mode(std::string_view name) {
    for (std::size_t i = 0; i < kModeNames.size(); ++i) {
        if (kModeNames[i] == name) return static_cast<ImputationMode>(i);
    }
    throw std::invalid_argument("unknown imputation mode '" + std::string(name) + "'");
}

PolicySpec PolicySpec::defaults(Algorithm algorithm) {
    PolicySpec spec;
    spec.algorithm = algorithm;
    switch (algorithm) {
        case Algorithm::TTS:
            spec.exponent_mode = ExponentMode::time_varying;
            break;
        case Algorithm::RTS:
            spec.fixed_exponent = 1.0;
            break;
        default:
            break;
    }
    return spec;
}

void PolicySpec::validate() const {
    if (!(discount > 0.0 && discount < 1.0)) throw std::invalid_argument("discount must lie in (0, 1)");
    if (randucb_points < 1) throw std::invalid_argument("RandUCB needs at least one support point");
    if (!(randucb_lower <= randucb_upper)) throw std::invalid_argument("RandUCB range needs L <= U");
    if (!(perturbation_mean > 0.0)) throw std::invalid_argument("perturbation mean must be positive");
    if (!(fixed_exponent >= 0.0)) throw std::invalid_argument("Thompson exponent must be non-negative");
}

}  // namespace mabsim
