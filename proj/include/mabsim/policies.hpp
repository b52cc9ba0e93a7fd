#pragma once

// Allocation rules. Each maps the two arms' decision states (plus the patient
// index and that patient's random draws) to the next arm.

#include <array>
#include <vector>

#include "mabsim/core.hpp"
#include "mabsim/gittins.hpp"
#include "mabsim/rng.hpp"

namespace mabsim {

/// P(p_1 > p_0) under independent Beta posteriors of the two decision states.
/// Exact finite sum for integer parameters, quadrature otherwise.
double superiority_probability(const ArmState& control, const ArmState& experimental);

/// pi_1 = q^c / (q^c + (1-q)^c), with 0^0 = 1 so c = 0 gives 1/2.
double thompson_allocation(double q, double c);

/// Randomized play-the-winner urn, one ball per arm initially.
struct UrnState {
    std::array<std::int64_t, kArmCount> balls{1, 1};

    double probability(int arm) const {
        return static_cast<double>(balls[arm]) / static_cast<double>(balls[0] + balls[1]);
    }
    bool operator==(const UrnState&) const = default;
};

/// Success on arm a adds a ball of type a, failure adds one of the other type,
/// missing adds nothing.
void rpw_update(UrnState& urn, int arm, Outcome outcome);

/// Draw with replacement: arm 1 iff u < balls_1 / total.
int rpw_draw(const UrnState& urn, double u);

struct RpwStep {
    int arm = 0;
    UrnState urn;
};

/// Applies the previous patient's feedback, then draws the next arm.
RpwStep rpw_draw_and_update(UrnState urn, int feedback_arm, Outcome feedback, double u);

/// The urn implied by the two arms' decision counts.
UrnState urn_from_states(const ArmPair& arms);

/// posterior_mean + sqrt(2 ln t) / sqrt(s0 + f0 + S + F).
double ucb_index(const ArmState& state, int t);

/// sqrt(2 ln t), the UCB exploration multiplier.
double ucb_beta(int t);

/// M equally spaced points from L to U (just L when M = 1).
std::vector<double> randucb_support(int points, double lower, double upper);

/// Support point selected by a uniform draw u in [0, 1) (uniform weights).
double randucb_draw(int points, double lower, double upper, double u);

/// posterior_mean + z / sqrt(s0 + f0 + S + F).
double randucb_index(const ArmState& state, double z);

/// Z ~ exponential with the given mean, by inversion of u in [0, 1).
double exponential_draw(double mean, double u);

/// base + z * K / (s0 + f0 + S + F).
double perturbed_index(double base, const ArmState& state, double z, int arm_count = kArmCount);

/// G[s0 + S][f0 + F] for integer decision parameters.
double gittins_lookup(const GittinsTable& table, const ArmState& state);

/// Index argmax; exact ties go to arm 1 iff u < 1/2.
int choose_by_index(double index0, double index1, double u);

struct Decision {
    enum class Kind { randomized, indexed };
    Kind kind = Kind::randomized;
    int chosen_arm = 0;
    /// pi_{k,t} for randomized rules, I_{k,t} for index rules.
    std::array<double, kArmCount> values{};
};

struct DecisionContext {
    const PolicySpec* policy = nullptr;
    const ArmPair* arms = nullptr;
    int t = 1;                 // 1-based index of the patient being allocated
    int trial_size = 1;        // n, for the TTS exponent t / (2n)
    const GittinsTable* gittins = nullptr;
};

/// One allocation decision. Consumes the allocation draw (slot 0) always and
/// perturbation draws (slot = arm) for RandUCB / RBI / RGI.
Decision select_arm(const DecisionContext& ctx, const PatientDraws& draws);

}  // namespace mabsim
