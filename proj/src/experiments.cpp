#include "mabsim/experiments.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mabsim/trial.hpp"

namespace mabsim {

const std::vector<Scenario>& builtin_scenarios() {
    static const std::vector<Scenario> catalog = {
        {"S1", 0.10, 0.10, 200}, {"S2", 0.30, 0.30, 200}, {"S3", 0.50, 0.50, 200},  {"S4", 0.70, 0.70, 200},
        {"S5", 0.90, 0.90, 200}, {"S6", 0.10, 0.20, 526}, {"S7", 0.10, 0.30, 162},  {"S8", 0.10, 0.40, 82},
        {"S9", 0.40, 0.60, 254}, {"S10", 0.60, 0.90, 82}, {"S11", 0.70, 0.90, 162}, {"S12", 0.80, 0.90, 526},
    };
    return catalog;
}

const Scenario& find_scenario(std::string_view label) {
    for (const auto& s : builtin_scenarios()) {
        if (s.label == label) return s;
    }
    throw std::out_of_range("unknown scenario '" + std::string(label) + "' (catalog has S1..S12)");
}

const std::vector<double>& missingness_levels() {
    static const std::vector<double> levels = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    return levels;
}

std::vector<MissingnessProfile> grid36() {
    std::vector<MissingnessProfile> out;
    for (double p0 : missingness_levels()) {
        for (double p1 : missingness_levels()) out.push_back({p0, p1});
    }
    return out;
}

std::vector<MissingnessProfile> equal_missingness() {
    std::vector<MissingnessProfile> out;
    for (double p : missingness_levels()) out.push_back({p, p});
    return out;
}

std::vector<MissingnessProfile> control_only_missingness() {
    std::vector<MissingnessProfile> out;
    for (double p : missingness_levels()) out.push_back({p, 0.0});
    return out;
}

std::vector<MissingnessProfile> experimental_only_missingness() {
    std::vector<MissingnessProfile> out;
    for (double p : missingness_levels()) out.push_back({0.0, p});
    return out;
}

void append_unique(std::vector<MissingnessProfile>& into, const std::vector<MissingnessProfile>& more) {
    for (const auto& m : more) {
        if (std::find(into.begin(), into.end(), m) == into.end()) into.push_back(m);
    }
}

std::vector<MissingnessProfile> null16() {
    std::vector<MissingnessProfile> out = equal_missingness();
    append_unique(out, control_only_missingness());
    append_unique(out, experimental_only_missingness());
    return out;
}

std::vector<MissingnessProfile> missingness_set(std::string_view name) {
    if (name == "grid36") return grid36();
    if (name == "equal") return equal_missingness();
    if (name == "control_only") return control_only_missingness();
    if (name == "experimental_only") return experimental_only_missingness();
    if (name == "null16") return null16();
    throw std::invalid_argument("unknown missingness set '" + std::string(name) +
                                "' (valid: grid36, equal, control_only, experimental_only, null16)");
}

void ExperimentPlan::scale_replications(double factor) {
    if (!(factor > 0.0)) throw std::invalid_argument("scale factor must be positive");
    auto scaled = [factor](int r) { return std::max(2, static_cast<int>(std::llround(r * factor))); };
    replications = scaled(replications);
    tts_replications = scaled(tts_replications);
}

std::int64_t ExperimentPlan::max_decision_level() const {
    std::int64_t level = 0;
    for (const auto& s : scenarios) level = std::max(level, mabsim::max_decision_level(s, prior));
    return level;
}

bool ExperimentPlan::needs_gittins() const {
    return std::any_of(policies.begin(), policies.end(), [](const PolicySpec& p) { return p.needs_gittins(); });
}

std::string Cell::key() const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%s|p0=%.17g|p1=%.17g|n=%d|m0=%.17g|m1=%.17g|%s|c=%d:%.17g|d=%.17g|M=%d|L=%.17g|U=%.17g|ucbL=%d|"
                  "z=%.17g|%s|R=%d",
                  scenario.label.c_str(), scenario.p_control, scenario.p_experimental, scenario.trial_size,
                  missingness.p0_missing, missingness.p1_missing, std::string(to_string(policy.algorithm)).c_str(),
                  static_cast<int>(policy.exponent_mode), policy.fixed_exponent, policy.discount,
                  policy.randucb_points, policy.randucb_lower, policy.randucb_upper,
                  policy.randucb_tracks_ucb_beta ? 1 : 0, policy.perturbation_mean,
                  std::string(to_string(mode)).c_str(), replications);
    return buf;
}

std::uint64_t Cell::id() const { return fnv1a64(key()); }

std::vector<Cell> expand_cells(const ExperimentPlan& plan) {
    std::vector<Cell> cells;
    for (const auto& scenario : plan.scenarios) {
        for (const auto& missing : plan.missingness) {
            for (const auto& policy : plan.policies) {
                for (const auto mode : plan.modes) {
                    const int r = policy.algorithm == Algorithm::TTS ? plan.tts_replications : plan.replications;
                    cells.push_back(Cell{scenario, missing, policy, mode, r});
                }
            }
        }
    }
    return cells;
}

TrialResult run_replication(const Cell& cell, std::uint64_t master_seed, std::uint32_t replication,
                            const GittinsTable* gittins, const Prior& prior) {
    const ReplicationRng rng(StreamKey::from(master_seed, cell.id()), replication);
    return run_trial(cell.scenario, cell.missingness, cell.policy, cell.mode, rng, gittins, prior);
}

std::vector<TrialResult> simulate_cell_serial(const Cell& cell, std::uint64_t master_seed,
                                              const GittinsTable* gittins, const Prior& prior) {
    std::vector<TrialResult> results;
    results.reserve(static_cast<std::size_t>(cell.replications));
    for (int r = 0; r < cell.replications; ++r) {
        results.push_back(run_replication(cell, master_seed, static_cast<std::uint32_t>(r), gittins, prior));
    }
    return results;
}

std::vector<TrialResult> simulate_cell_parallel(const Cell& cell, std::uint64_t master_seed,
                                                const GittinsTable* gittins, const Prior& prior, int threads) {
    // Validate up front so failures surface as exceptions, not inside the
    // parallel region.
    (void)run_replication(Cell{cell.scenario, cell.missingness, cell.policy, cell.mode, 0}, master_seed, 0,
                          gittins, prior);
    std::vector<TrialResult> results(static_cast<std::size_t>(cell.replications));
    const int count = cell.replications;
    const int team = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(team)
    for (int r = 0; r < count; ++r) {
        results[static_cast<std::size_t>(r)] =
            run_replication(cell, master_seed, static_cast<std::uint32_t>(r), gittins, prior);
    }
    return results;
}

CellResult run_cell(const Cell& cell, std::uint64_t master_seed, const GittinsTable* gittins,
                    const RunOptions& options, const Prior& prior) {
    CellResult out{cell, std::nullopt, {}};
    try {
        cell.scenario.validate();
        cell.policy.validate();
        const auto results = options.parallel
                                 ? simulate_cell_parallel(cell, master_seed, gittins, prior, options.threads)
                                 : simulate_cell_serial(cell, master_seed, gittins, prior);
        out.report = aggregate(results, cell.scenario);
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

std::vector<CellResult> run_plan(const ExperimentPlan& plan, const GittinsTable* gittins, const RunOptions& options) {
    for (const auto& m : plan.missingness) m.validate(plan.max_missingness);
    const auto cells = expand_cells(plan);
    std::vector<CellResult> out;
    out.reserve(cells.size());
    std::int64_t done_reps = 0;
    for (const auto& cell : cells) {
        out.push_back(run_cell(cell, plan.seed, gittins, options, plan.prior));
        done_reps += cell.replications;
        if (options.progress) options.progress(out.size(), cells.size(), done_reps);
    }
    return out;
}

}  // namespace mabsim
