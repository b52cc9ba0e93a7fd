#include <cmath>

#include "doctest.h"
#include "mabsim/policies.hpp"
#include "mabsim/trial.hpp"

using namespace mabsim;

namespace {

ReplicationRng rng_for(std::uint32_t rep, std::uint64_t seed = 99) { return ReplicationRng(StreamKey::from(seed, 1), rep); }

const GittinsTable& table() {
    static const GittinsTable t = build_table(0.99, 40);
    return t;
}

const Scenario kSmall{"small", 0.4, 0.6, 38};

constexpr ImputationMode kModes[] = {ImputationMode::none, ImputationMode::mean_default_half,
                                     ImputationMode::mean_default_nine_tenths,
                                     ImputationMode::mean_after_first_observation};

}  // namespace

TEST_CASE("current success estimate") {
    ArmState a;
    CHECK(*current_success_estimate(a, ImputationMode::mean_default_half) == 0.5);
    CHECK(*current_success_estimate(a, ImputationMode::mean_default_nine_tenths) == 0.9);
    CHECK_FALSE(current_success_estimate(a, ImputationMode::mean_after_first_observation).has_value());
    CHECK_THROWS_AS(current_success_estimate(a, ImputationMode::none), std::invalid_argument);
    a.observed_successes = 3;
    a.observed_failures = 1;
    a.imputed_failures = 5;
    for (auto m : {ImputationMode::mean_default_half, ImputationMode::mean_default_nine_tenths,
                   ImputationMode::mean_after_first_observation}) {
        CHECK(*current_success_estimate(a, m) == 0.75);
    }
}

TEST_CASE("empty trial") {
    const auto r = run_trial(Scenario{"empty", 0.5, 0.5, 0}, {}, PolicySpec::defaults(Algorithm::CB),
                             ImputationMode::none, rng_for(0));
    CHECK(std::isnan(r.pstar));
    CHECK(r.assignments.empty());
    CHECK(r.arms[0].assigned() + r.arms[1].assigned() == 0);
    CHECK(std::isnan(r.final_estimates[0]));
}

TEST_CASE("current belief with certain success locks onto the first arm") {
    const Scenario sure{"sure", 1.0, 1.0, 4};
    int first_one = 0;
    for (std::uint32_t rep = 0; rep < 64; ++rep) {
        const auto r = run_trial(sure, {}, PolicySpec::defaults(Algorithm::CB), ImputationMode::none, rng_for(rep));
        const int a = r.assignments.front();
        first_one += a;
        CHECK(r.arms[a].assigned() == 4);
        CHECK(r.arms[a].observed_successes == 4);
        CHECK(r.arms[1 - a].assigned() == 0);
        CHECK(r.pstar == (a == 1 ? 1.0 : 0.0));
    }
    CHECK(first_one > 0);
    CHECK(first_one < 64);
}

TEST_CASE("counting invariants for every policy and mode") {
    for (auto algo : kAllAlgorithms) {
        for (auto mode : kModes) {
            for (std::uint32_t rep = 0; rep < 8; ++rep) {
                const auto r = run_trial(kSmall, {0.3, 0.2}, PolicySpec::defaults(algo), mode, rng_for(rep), &table());
                CAPTURE(to_string(algo));
                CAPTURE(to_string(mode));
                REQUIRE(r.assignments.size() == static_cast<std::size_t>(kSmall.trial_size));
                REQUIRE(r.outcomes.size() == r.assignments.size());
                CHECK(r.arms[0].assigned() + r.arms[1].assigned() == kSmall.trial_size);
                CHECK(r.pstar == static_cast<double>(r.arms[1].assigned()) / kSmall.trial_size);
                ArmPair replay{};
                for (std::size_t t = 0; t < r.outcomes.size(); ++t) {
                    auto& a = replay[r.assignments[t]];
                    switch (r.outcomes[t]) {
                        case Outcome::success: ++a.observed_successes; break;
                        case Outcome::failure: ++a.observed_failures; break;
                        case Outcome::missing: ++a.missing_count; break;
                    }
                }
                for (int k = 0; k < 2; ++k) {
                    const auto& arm = r.arms[k];
                    CHECK(arm.observed_successes == replay[k].observed_successes);
                    CHECK(arm.observed_failures == replay[k].observed_failures);
                    CHECK(arm.missing_count == replay[k].missing_count);
                    if (mode == ImputationMode::none) {
                        CHECK(arm.imputed() == 0);
                    } else if (mode == ImputationMode::mean_after_first_observation) {
                        CHECK(arm.imputed() <= arm.missing_count);
                    } else {
                        CHECK(arm.imputed() == arm.missing_count);
                    }
                    if (arm.observed() > 0) {
                        CHECK(r.final_estimates[k] ==
                              static_cast<double>(arm.observed_successes) / static_cast<double>(arm.observed()));
                    } else {
                        CHECK(std::isnan(r.final_estimates[k]));
                    }
                }
            }
        }
    }
}

TEST_CASE("no missingness: no missing counts and imputation modes reduce to plain runs") {
    for (auto algo : kAllAlgorithms) {
        for (std::uint32_t rep = 0; rep < 8; ++rep) {
            const auto plain = run_trial(kSmall, {}, PolicySpec::defaults(algo), ImputationMode::none, rng_for(rep), &table());
            CHECK(plain.arms[0].missing_count + plain.arms[1].missing_count == 0);
            for (auto mode : kModes) {
                const auto r = run_trial(kSmall, {}, PolicySpec::defaults(algo), mode, rng_for(rep), &table());
                CHECK(r.assignments == plain.assignments);
                CHECK(r.outcomes == plain.outcomes);
                CHECK(r.arms == plain.arms);
            }
        }
    }
}

TEST_CASE("reproducible for identical inputs") {
    for (auto algo : kAllAlgorithms) {
        const auto a = run_trial(kSmall, {0.2, 0.4}, PolicySpec::defaults(algo), ImputationMode::mean_default_half,
                                 rng_for(5), &table());
        const auto b = run_trial(kSmall, {0.2, 0.4}, PolicySpec::defaults(algo), ImputationMode::mean_default_half,
                                 rng_for(5), &table());
        CHECK(a.assignments == b.assignments);
        CHECK(a.outcomes == b.outcomes);
        CHECK(a.arms == b.arms);
        CHECK(a.pstar == b.pstar);
        const auto c = run_trial(kSmall, {0.2, 0.4}, PolicySpec::defaults(algo), ImputationMode::mean_default_half,
                                 rng_for(6), &table());
        if (algo != Algorithm::CB) CHECK(c.outcomes != a.outcomes);
    }
}

TEST_CASE("missing fraction per arm tracks p_missing") {
    const MissingnessProfile m{0.2, 0.45};
    std::array<double, 2> missing{}, assigned{};
    for (std::uint32_t rep = 0; rep < 2000; ++rep) {
        const auto r = run_trial(Scenario{"x", 0.5, 0.5, 50}, m, PolicySpec::defaults(Algorithm::FR),
                                 ImputationMode::none, rng_for(rep));
        for (int k = 0; k < 2; ++k) {
            missing[k] += static_cast<double>(r.arms[k].missing_count);
            assigned[k] += static_cast<double>(r.arms[k].assigned());
        }
    }
    for (int k = 0; k < 2; ++k) {
        const double frac = missing[k] / assigned[k];
        const double se = std::sqrt(m.p(k) * (1 - m.p(k)) / assigned[k]);
        CHECK(std::abs(frac - m.p(k)) <= 3 * se);
    }
}

TEST_CASE("RandUCB with a one-point support at beta_t replays UCB") {
    auto tracked = PolicySpec::defaults(Algorithm::RandUCB);
    tracked.randucb_tracks_ucb_beta = true;
    for (std::uint32_t rep = 0; rep < 50; ++rep) {
        const auto ucb = run_trial(kSmall, {0.1, 0.3}, PolicySpec::defaults(Algorithm::UCB), ImputationMode::none, rng_for(rep));
        const auto ru = run_trial(kSmall, {0.1, 0.3}, tracked, ImputationMode::none, rng_for(rep));
        CHECK(ru.assignments == ucb.assignments);
        CHECK(ru.outcomes == ucb.outcomes);
    }
}

TEST_CASE("RPW allocation equals the sequentially updated urn") {
    const auto policy = PolicySpec::defaults(Algorithm::RPW);
    for (std::uint32_t rep = 0; rep < 50; ++rep) {
        const auto r = run_trial(kSmall, {0.25, 0.1}, policy, ImputationMode::none, rng_for(rep));
        UrnState urn;
        ArmPair arms{};
        const auto draws_rng = rng_for(rep);
        for (std::size_t t = 0; t < r.assignments.size(); ++t) {
            REQUIRE(urn_from_states(arms) == urn);
            const double u = draws_rng.uniform(Substream::allocation, static_cast<std::uint32_t>(t + 1));
            CHECK(rpw_draw(urn, u) == r.assignments[t]);
            const int k = r.assignments[t];
            rpw_update(urn, k, r.outcomes[t]);
            if (r.outcomes[t] == Outcome::success) ++arms[k].observed_successes;
            if (r.outcomes[t] == Outcome::failure) ++arms[k].observed_failures;
        }
    }
}

TEST_CASE("missing outcomes leave the next decision unchanged") {
    const ArmPair before{ArmState{}, ArmState{}};
    ArmPair after = before;
    after[1].missing_count = 1;
    const ReplicationRng rng = rng_for(3);
    for (auto algo : kAllAlgorithms) {
        const auto p = PolicySpec::defaults(algo);
        const auto d0 = select_arm(DecisionContext{&p, &before, 2, 10, &table()}, PatientDraws(rng, 2));
        const auto d1 = select_arm(DecisionContext{&p, &after, 2, 10, &table()}, PatientDraws(rng, 2));
        CHECK(d0.values == d1.values);
        CHECK(d0.chosen_arm == d1.chosen_arm);
    }
}

TEST_CASE("Gittins policies need a large enough table with the right discount") {
    const auto gi = PolicySpec::defaults(Algorithm::GI);
    CHECK_THROWS_AS(run_trial(kSmall, {}, gi, ImputationMode::none, rng_for(0), nullptr), std::invalid_argument);
    const Scenario big{"big", 0.5, 0.5, 41};
    CHECK_THROWS_AS(run_trial(big, {}, gi, ImputationMode::none, rng_for(0), &table()), std::invalid_argument);
    CHECK_NOTHROW(run_trial(Scenario{"fits", 0.5, 0.5, 40}, {}, gi, ImputationMode::none, rng_for(0), &table()));
    auto other = gi;
    other.discount = 0.9;
    CHECK_THROWS_AS(run_trial(kSmall, {}, other, ImputationMode::none, rng_for(0), &table()), std::invalid_argument);
}
