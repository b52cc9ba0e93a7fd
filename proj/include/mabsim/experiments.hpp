#pragma once

// Scenario catalog, missingness grids and the replication driver.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mabsim/core.hpp"
#include "mabsim/gittins.hpp"
#include "mabsim/metrics.hpp"

namespace mabsim {

/// S1..S12 in catalog order.
const std::vector<Scenario>& builtin_scenarios();

/// Throws std::out_of_range for unknown labels.
const Scenario& find_scenario(std::string_view label);

/// {0, 0.1, ..., 0.5}.
const std::vector<double>& missingness_levels();

std::vector<MissingnessProfile> grid36();
std::vector<MissingnessProfile> equal_missingness();
std::vector<MissingnessProfile> control_only_missingness();
std::vector<MissingnessProfile> experimental_only_missingness();
/// equal, then control-only, then experimental-only, (0, 0) kept once: 16.
std::vector<MissingnessProfile> null16();

/// Resolves "grid36", "equal", "control_only", "experimental_only", "null16".
std::vector<MissingnessProfile> missingness_set(std::string_view name);

/// Appends profiles not already present, keeping first-seen order.
void append_unique(std::vector<MissingnessProfile>& into, const std::vector<MissingnessProfile>& more);

inline constexpr int kDefaultReplications = 10000;
inline constexpr int kDefaultTtsReplications = 1000;

struct ExperimentPlan {
    std::vector<Scenario> scenarios;
    std::vector<MissingnessProfile> missingness;
    std::vector<PolicySpec> policies;
    std::vector<ImputationMode> modes{ImputationMode::none};
    int replications = kDefaultReplications;
    int tts_replications = kDefaultTtsReplications;
    std::uint64_t seed = 20240101;
    double max_missingness = 0.5;
    Prior prior{};

    /// Scales both replication counts, never below 2.
    void scale_replications(double factor);
    /// Largest s + f any trial in the plan reaches.
    std::int64_t max_decision_level() const;
    bool needs_gittins() const;
};

struct Cell {
    Scenario scenario;
    MissingnessProfile missingness;
    PolicySpec policy;
    ImputationMode mode = ImputationMode::none;
    int replications = 0;

    /// Canonical text naming the configuration; independent of plan order.
    std::string key() const;
    std::uint64_t id() const;
};

/// scenario x missingness x policy x mode, in that nesting order.
std::vector<Cell> expand_cells(const ExperimentPlan& plan);

/// One replication's trial, seeded from (master seed, cell id, replication).
TrialResult run_replication(const Cell& cell, std::uint64_t master_seed, std::uint32_t replication,
                            const GittinsTable* gittins, const Prior& prior = {});

/// Replications 0..R-1 in a plain loop. Reference for the parallel kernel.
std::vector<TrialResult> simulate_cell_serial(const Cell& cell, std::uint64_t master_seed,
                                              const GittinsTable* gittins, const Prior& prior = {});

/// Same results, replications spread over OpenMP threads (`threads` <= 0:
/// OpenMP default). Each result lands at its replication index.
std::vector<TrialResult> simulate_cell_parallel(const Cell& cell, std::uint64_t master_seed,
                                                const GittinsTable* gittins, const Prior& prior = {},
                                                int threads = 0);

struct CellResult {
    Cell cell;
    std::optional<AggregateReport> report;
    std::string error;  // set when the cell failed

    bool ok() const { return report.has_value(); }
};

struct RunOptions {
    int threads = 0;        // <= 0: OpenMP default
    bool parallel = true;   // false: serial reference kernel
    /// Called after each cell with (cells done, cells total, replications done).
    std::function<void(std::size_t, std::size_t, std::int64_t)> progress;
};

/// Runs every cell. A cell that throws is recorded with its error and the
/// plan continues.
std::vector<CellResult> run_plan(const ExperimentPlan& plan, const GittinsTable* gittins,
                                 const RunOptions& options = {});

/// Runs a single cell exactly as run_plan would.
CellResult run_cell(const Cell& cell, std::uint64_t master_seed, const GittinsTable* gittins,
                    const RunOptions& options = {}, const Prior& prior = {});

}  // namespace mabsim
