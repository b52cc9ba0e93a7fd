// mabsim: run simulation plans, build Gittins tables, reproduce figure data.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mabsim/experiments.hpp"
#include "mabsim/gittins.hpp"
#include "mabsim/plan_io.hpp"

namespace fs = std::filesystem;
using namespace mabsim;

namespace {

constexpr int kCatalogMaxState = 530;

fs::path cache_dir() {
    if (const char* env = std::getenv("MABSIM_CACHE_DIR"); env && *env) return env;
    if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "mabsim";
    return ".mabsim-cache";
}

// Smallest cached max_state >= need for these parameters, if any.
std::optional<int> cached_max_state(double discount, int need) {
    const auto probe = table_file_name(discount, 0, kDefaultGittinsTolerance, kDefaultGittinsHorizon);
    const auto cut = probe.find("_B0_");
    const auto prefix = probe.substr(0, cut + 2);
    const auto suffix = probe.substr(cut + 3);
    std::optional<int> best;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(cache_dir(), ec)) {
        const auto file = entry.path().filename().string();
        if (file.size() <= prefix.size() + suffix.size() || file.rfind(prefix, 0) != 0 ||
            file.compare(file.size() - suffix.size(), suffix.size(), suffix) != 0) {
            continue;
        }
        const auto digits = file.substr(prefix.size(), file.size() - prefix.size() - suffix.size());
        if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) continue;
        const int b = std::stoi(digits);
        if (b >= need && (!best || b < *best)) best = b;
    }
    return best;
}

// One table per plan, at the discount of the first Gittins policy.
std::optional<GittinsTable> table_for(const ExperimentPlan& plan) {
    if (!plan.needs_gittins()) return std::nullopt;
    double discount = 0.99;
    for (const auto& p : plan.policies) {
        if (p.needs_gittins()) {
            discount = p.discount;
            break;
        }
    }
    const int need = static_cast<int>(std::max<std::int64_t>(plan.max_decision_level() - 2, 0));
    const int max_state = cached_max_state(discount, need).value_or(need);
    bool built = false;
    const auto t0 = std::chrono::steady_clock::now();
    auto table = load_or_build_table(cache_dir(), discount, max_state, kDefaultGittinsTolerance,
                                     kDefaultGittinsHorizon, &built);
    if (built) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "built Gittins table (d=%g, max_state=%d) in %.1f s\n", discount, max_state, secs);
    }
    return table;
}

// Runs `plan` and writes its CSV. Returns the number of failed cells.
std::size_t execute(const ExperimentPlan& plan, const fs::path& out, int threads, bool quiet) {
    const auto table = table_for(plan);
    RunOptions opts;
    opts.threads = threads;
    const auto start = std::chrono::steady_clock::now();
    if (!quiet) {
        opts.progress = [start](std::size_t done, std::size_t total, std::int64_t reps) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::fprintf(stderr, "\r[%zu/%zu cells, %lld replications, %.0f s]", done, total,
                         static_cast<long long>(reps), secs);
            if (done == total) std::fprintf(stderr, "\n");
        };
    }
    const auto results = run_plan(plan, table ? &*table : nullptr, opts);
    std::vector<OutputRow> rows;
    std::size_t failed = 0;
    for (const auto& r : results) {
        rows.push_back(make_row(r, plan.seed));
        if (!r.ok()) {
            ++failed;
            std::fprintf(stderr, "cell failed: %s: %s\n", r.cell.key().c_str(), r.error.c_str());
        }
    }
    write_file_atomic(out, format_csv(rows));
    if (failed) std::fprintf(stderr, "%zu of %zu cells failed\n", failed, results.size());
    return failed;
}

// Fails early when the output directory is missing, before any simulation.
void check_output_dir(const fs::path& out) {
    const auto dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
    if (!fs::is_directory(dir)) throw std::runtime_error("output directory does not exist: " + dir.string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-armed bandit allocation under missing outcomes"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a plan file and write one CSV row per cell");
    std::string plan_path, out_path;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    double scale = 1.0;
    bool quiet = false;
    run->add_option("--plan", plan_path, "JSON plan file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_path, "Output CSV path")->required();
    run->add_option("--seed", seed, "Override the plan's master seed");
    run->add_option("--threads", threads, "OpenMP threads (0: default)")->check(CLI::NonNegativeNumber);
    run->add_option("--scale", scale, "Multiply replications per cell")->check(CLI::PositiveNumber);
    run->add_flag("--quiet", quiet, "No progress output");

    auto* git = app.add_subcommand("gittins-table", "Build or load the cached Gittins table");
    double discount = 0.99, tol = kDefaultGittinsTolerance;
    int max_state = kCatalogMaxState, horizon = kDefaultGittinsHorizon;
    std::string table_out;
    git->add_option("--discount", discount, "Discount factor d")->capture_default_str();
    git->add_option("--max-state", max_state, "Cover s + f <= max_state + 2")->capture_default_str();
    git->add_option("--tol", tol, "Index tolerance")->capture_default_str();
    git->add_option("--horizon", horizon, "Lookahead in pulls")->capture_default_str();
    git->add_option("--out", table_out, "Also copy the table to this path");
    git->add_option("--threads", threads, "OpenMP threads (0: default)")->check(CLI::NonNegativeNumber);

    auto* rep = app.add_subcommand("reproduce", "Write the CSV and manifest behind a figure");
    std::string figure_id, out_dir = ".";
    rep->add_option("id", figure_id, "Figure id")->required();
    rep->add_option("--scale", scale, "Multiply replications per cell")->check(CLI::PositiveNumber);
    rep->add_option("--out-dir", out_dir, "Output directory");
    rep->add_option("--seed", seed, "Master seed");
    rep->add_option("--threads", threads, "OpenMP threads (0: default)")->check(CLI::NonNegativeNumber);
    rep->add_flag("--quiet", quiet, "No progress output");

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (*run) {
            ExperimentPlan plan = load_plan(plan_path);
            if (seed) plan.seed = *seed;
            if (scale != 1.0) plan.scale_replications(scale);
            check_output_dir(out_path);
            return execute(plan, out_path, threads, quiet) == 0 ? 0 : 1;
        }
        if (*git) {
            if (!(tol > 0.0)) {
                std::cerr << "gittins-table: --tol must be positive\n";
                return 2;
            }
            if (max_state < 0 || horizon < 1) {
                std::cerr << "gittins-table: --max-state must be >= 0 and --horizon >= 1\n";
                return 2;
            }
            bool built = false;
            const auto t0 = std::chrono::steady_clock::now();
            const auto table = load_or_build_table(cache_dir(), discount, max_state, tol, horizon, &built);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const auto path = cache_dir() / table_file_name(discount, max_state, tol, horizon);
            std::printf("%s %s (%.1f s)\n", built ? "built" : "cache hit", path.string().c_str(), secs);
            std::printf("G(1,1) = %.6f\n", table.lookup(1, 1));
            if (!table_out.empty()) save_table(table, table_out);
            return 0;
        }
        if (*rep) {
            const auto figure = figure_plan(figure_id, scale, seed.value_or(ExperimentPlan{}.seed));
            const fs::path dir(out_dir);
            fs::create_directories(dir);
            const auto csv = figure.id + ".csv";
            write_file_atomic(dir / (figure.id + ".manifest.json"), figure_manifest(figure, csv));
            return execute(figure.plan, dir / csv, threads, quiet) == 0 ? 0 : 1;
        }
    } catch (const PlanError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
