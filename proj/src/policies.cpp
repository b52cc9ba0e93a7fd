#include "mabsim/policies.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mabsim {

namespace {

bool integral(double x) { return std::floor(x) == x; }

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// P(X > Y) with X ~ Beta(ax, bx), Y ~ Beta(ay, by), integer ax:
//   sum_{i<ax} B(ay+i, by+bx) / ((bx+i) B(1+i, bx) B(ay, by))
// evaluated through the term ratio
//   (ay+i)/(ay+by+bx+i) * (bx+i)/(i+1).
double exceed_probability_integer(double ax, double bx, double ay, double by) {
    const auto terms = static_cast<long>(ax);
    const double log_first = log_beta(ay, by + bx) - log_beta(ay, by);
    if (log_first > -600.0) {
        double term = std::exp(log_first);
        double sum = 0.0;
        for (long i = 0; i < terms; ++i) {
            sum += term;
            const double di = static_cast<double>(i);
            term *= (ay + di) / (ay + by + bx + di) * (bx + di) / (di + 1.0);
        }
        return sum;
    }
    // Streaming log-sum-exp for deep tails.
    double log_term = log_first;
    double ref = log_first;
    double acc = 0.0;
    for (long i = 0; i < terms; ++i) {
        if (log_term > ref) {
            acc = acc * std::exp(ref - log_term) + 1.0;
            ref = log_term;
        } else {
            acc += std::exp(log_term - ref);
        }
        const double di = static_cast<double>(i);
        log_term += std::log((ay + di) / (ay + by + bx + di) * (bx + di) / (di + 1.0));
    }
    return std::exp(ref) * acc;
}

double exceed_probability_quadrature(double ax, double bx, double ay, double by) {
    const boost::math::beta_distribution<double> x_dist(ax, bx);
    auto integrand = [&](double u) { return boost::math::pdf(x_dist, u) * boost::math::ibeta(ay, by, u); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 1.0, 15, 1e-12);
}

}  // namespace

double superiority_probability(const ArmState& control, const ArmState& experimental) {
    const double a1 = experimental.decision_alpha();
    const double b1 = experimental.decision_beta();
    const double a0 = control.decision_alpha();
    const double b0 = control.decision_beta();
    if (!(a0 > 0 && b0 > 0 && a1 > 0 && b1 > 0)) throw std::invalid_argument("Beta parameters must be positive");
    double q;
    if (integral(a0) && integral(b0) && integral(a1) && integral(b1)) {
        // Sum over whichever alpha is smaller; P(p0 > p1) = 1 - P(p1 > p0).
        q = a1 <= a0 ? exceed_probability_integer(a1, b1, a0, b0)
                     : 1.0 - exceed_probability_integer(a0, b0, a1, b1);
    } else {
        q = exceed_probability_quadrature(a1, b1, a0, b0);
    }
    return std::clamp(q, 0.0, 1.0);
}

double thompson_allocation(double q, double c) {
    if (c == 0.0) return 0.5;
    const double w1 = std::pow(q, c);
    const double w0 = std::pow(1.0 - q, c);
    return w1 / (w0 + w1);
}

void rpw_update(UrnState& urn, int arm, Outcome outcome) {
    switch (outcome) {
        case Outcome::success:
            ++urn.balls[arm];
            break;
        case Outcome::failure:
            ++urn.balls[1 - arm];
            break;
        case Outcome::missing:
            break;
    }
}

int rpw_draw(const UrnState& urn, double u) { return u < urn.probability(kExperimental) ? 1 : 0; }

RpwStep rpw_draw_and_update(UrnState urn, int feedback_arm, Outcome feedback, double u) {
    rpw_update(urn, feedback_arm, feedback);
    return RpwStep{rpw_draw(urn, u), urn};
}

UrnState urn_from_states(const ArmPair& arms) {
    auto successes = [](const ArmState& s) { return s.observed_successes + s.imputed_successes; };
    auto failures = [](const ArmState& s) { return s.observed_failures + s.imputed_failures; };
    UrnState urn;
    urn.balls[0] += successes(arms[0]) + failures(arms[1]);
    urn.balls[1] += successes(arms[1]) + failures(arms[0]);
    return urn;
}

double ucb_beta(int t) {
    if (t < 1) throw std::invalid_argument("patient index t must be >= 1");
    return std::sqrt(2.0 * std::log(static_cast<double>(t)));
}

double ucb_index(const ArmState& state, int t) {
    return posterior_mean(state) + ucb_beta(t) / std::sqrt(effective_observation_count(state));
}

std::vector<double> randucb_support(int points, double lower, double upper) {
    if (points < 1) throw std::invalid_argument("RandUCB needs at least one support point");
    std::vector<double> support(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        support[i] = points == 1 ? lower : lower + (upper - lower) * i / (points - 1);
    }
    return support;
}

double randucb_draw(int points, double lower, double upper, double u) {
    if (points == 1) return lower;
    const int i = std::min(points - 1, static_cast<int>(u * points));
    return lower + (upper - lower) * i / (points - 1);
}

double randucb_index(const ArmState& state, double z) {
    return posterior_mean(state) + z / std::sqrt(effective_observation_count(state));
}

double exponential_draw(double mean, double u) { return -mean * std::log1p(-u); }

double perturbed_index(double base, const ArmState& state, double z, int arm_count) {
    return base + z * static_cast<double>(arm_count) / effective_observation_count(state);
}

double gittins_lookup(const GittinsTable& table, const ArmState& state) {
    const double a = state.decision_alpha();
    const double b = state.decision_beta();
    if (!integral(a) || !integral(b)) throw std::invalid_argument("Gittins lookup needs integer Beta parameters");
    return table.lookup(static_cast<std::int64_t>(a), static_cast<std::int64_t>(b));
}

int choose_by_index(double index0, double index1, double u) {
    if (index1 > index0) return 1;
    if (index0 > index1) return 0;
    return u < 0.5 ? 1 : 0;
}

Decision select_arm(const DecisionContext& ctx, const PatientDraws& draws) {
    const PolicySpec& policy = *ctx.policy;
    const ArmPair& arms = *ctx.arms;
    const double u = draws.uniform(Substream::allocation, 0);
    Decision d;

    auto randomized = [&](double pi1) {
        d.kind = Decision::Kind::randomized;
        d.values = {1.0 - pi1, pi1};
        d.chosen_arm = u < pi1 ? 1 : 0;
        return d;
    };
    auto indexed = [&](double i0, double i1) {
        d.kind = Decision::Kind::indexed;
        d.values = {i0, i1};
        d.chosen_arm = choose_by_index(i0, i1, u);
        return d;
    };
    auto need_table = [&]() -> const GittinsTable& {
        if (!ctx.gittins) throw std::invalid_argument(std::string(to_string(policy.algorithm)) + " needs a Gittins table");
        return *ctx.gittins;
    };

    switch (policy.algorithm) {
        case Algorithm::FR:
        case Algorithm::TTS:
        case Algorithm::RTS: {
            const double c = policy.exponent_mode == ExponentMode::time_varying
                                 ? static_cast<double>(ctx.t) / (2.0 * ctx.trial_size)
                                 : policy.fixed_exponent;
            if (c == 0.0) return randomized(0.5);
            return randomized(thompson_allocation(superiority_probability(arms[0], arms[1]), c));
        }
        case Algorithm::RPW:
            return randomized(urn_from_states(arms).probability(kExperimental));
        case Algorithm::CB:
            return indexed(posterior_mean(arms[0]), posterior_mean(arms[1]));
        case Algorithm::GI: {
            const auto& table = need_table();
            return indexed(gittins_lookup(table, arms[0]), gittins_lookup(table, arms[1]));
        }
        case Algorithm::UCB:
            return indexed(ucb_index(arms[0], ctx.t), ucb_index(arms[1], ctx.t));
        case Algorithm::RandUCB: {
            double lower = policy.randucb_lower;
            double upper = policy.randucb_upper;
            int points = policy.randucb_points;
            if (policy.randucb_tracks_ucb_beta) {
                lower = upper = ucb_beta(ctx.t);
                points = 1;
            }
            std::array<double, kArmCount> idx{};
            for (int k = 0; k < kArmCount; ++k) {
                const double z = randucb_draw(points, lower, upper, draws.uniform(Substream::perturbation, k));
                idx[k] = randucb_index(arms[k], z);
            }
            return indexed(idx[0], idx[1]);
        }
        case Algorithm::RBI:
        case Algorithm::RGI: {
            std::array<double, kArmCount> idx{};
            for (int k = 0; k < kArmCount; ++k) {
                const double base =
                    policy.algorithm == Algorithm::RBI ? posterior_mean(arms[k]) : gittins_lookup(need_table(), arms[k]);
                const double z = exponential_draw(policy.perturbation_mean, draws.uniform(Substream::perturbation, k));
                idx[k] = perturbed_index(base, arms[k], z);
            }
            return indexed(idx[0], idx[1]);
        }
    }
    throw std::logic_error("select_arm: unhandled algorithm");
}

}  // namespace mabsim
