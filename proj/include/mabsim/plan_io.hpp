#pragma once

// Plan files (JSON), result CSV and the named figure plans.
//
// Plan schema, every key optional:
//   {
//     "scenarios":   ["S1", {"label": "X", "p0": 0.7, "p1": 0.9, "n": 200}],
//     "missingness": "grid36" | ["equal", [0.1, 0.3], {"p0": 0.2, "p1": 0}],
//     "policies":    ["CB", {"algorithm": "RTS", "c": 1}, {"algorithm": "TTS", "c": "t/2n"}],
//     "imputation":  "none" | ["none", "mean_default_half"],
//     "replications": 10000, "tts_replications": 1000, "seed": 1,
//     "allow_high_missingness": false
//   }
// Policy objects also accept "discount", "randucb_points", "randucb_lower",
// "randucb_upper", "randucb_tracks_ucb_beta" and "perturbation_mean".

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mabsim/experiments.hpp"

namespace mabsim {

class PlanError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws PlanError naming the line (syntax errors) or the field path.
ExperimentPlan parse_plan(std::string_view text);
ExperimentPlan load_plan(const std::filesystem::path& path);

inline constexpr std::string_view kNa = "NA";

/// One CSV line per plan cell. Metric fields hold NA when the cell failed or
/// the statistic is undefined.
struct OutputRow {
    std::string scenario;
    double p0 = 0.0, p1 = 0.0;
    int n = 0;
    std::string algorithm;
    double p0_missing = 0.0, p1_missing = 0.0;
    std::string imputation_mode;
    int replications = 0;
    std::uint64_t seed = 0;
    std::optional<double> mean_pstar, se_pstar, mean_ons, se_ons;
    std::optional<double> bias_arm0, bias_arm1, se_bias_arm0, se_bias_arm1;
    std::optional<double> cov_over_EN_arm0, cov_over_EN_arm1;
    std::optional<double> undefined_fraction_arm0, undefined_fraction_arm1;

    bool operator==(const OutputRow&) const = default;
};

const std::vector<std::string>& csv_header();

OutputRow make_row(const CellResult& result, std::uint64_t seed);

/// %.6g for reals, NA for missing or non-finite values.
std::string format_number(std::optional<double> value);
std::string format_row(const OutputRow& row);
std::string format_csv(const std::vector<OutputRow>& rows);

/// Splits one CSV record, undoing RFC-4180 quoting.
std::vector<std::string> split_csv_record(std::string_view line);
OutputRow parse_row(std::string_view line);
/// Header line is checked and skipped.
std::vector<OutputRow> parse_csv(std::string_view text);

/// Writes via a sibling temporary file and rename; on failure nothing is
/// left at `path`. Throws std::runtime_error.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

struct FigurePlan {
    std::string id;
    std::string description;
    std::string x_axis;
    std::string series;
    std::string facets;
    ExperimentPlan plan;
};

const std::vector<std::string>& figure_ids();
/// Unknown ids throw std::invalid_argument listing the valid ones. `scale`
/// multiplies R (minimum 2 per cell).
FigurePlan figure_plan(std::string_view id, double scale = 1.0, std::uint64_t seed = 20240101);

/// JSON manifest naming the CSV, axes and series of a figure.
std::string figure_manifest(const FigurePlan& figure, std::string_view csv_name);

}  // namespace mabsim
