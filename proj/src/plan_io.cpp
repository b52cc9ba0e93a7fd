#include "mabsim/plan_io.hpp"

#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mabsim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
    throw PlanError("plan field '" + field + "': " + what);
}

double get_number(const json& j, const std::string& field) {
    if (!j.is_number()) fail(field, "expected a number, got " + std::string(j.type_name()));
    return j.get<double>();
}

int get_int(const json& j, const std::string& field) {
    if (!j.is_number_integer()) fail(field, "expected an integer, got " + std::string(j.type_name()));
    const auto v = j.get<std::int64_t>();
    if (v < 0 || v > 1'000'000'000) fail(field, "out of range");
    return static_cast<int>(v);
}

std::string get_string(const json& j, const std::string& field) {
    if (!j.is_string()) fail(field, "expected a string, got " + std::string(j.type_name()));
    return j.get<std::string>();
}

void check_keys(const json& obj, const std::string& field, std::initializer_list<std::string_view> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            fail(field + "/" + it.key(), "unknown key");
        }
    }
}

// Runs f, rewrapping library exceptions as PlanError for `field`.
template <class F>
auto guarded(const std::string& field, F&& f) {
    try {
        return f();
    } catch (const PlanError&) {
        throw;
    } catch (const std::exception& e) {
        fail(field, e.what());
    }
}

Scenario parse_scenario(const json& j, const std::string& field) {
    if (j.is_string()) {
        const auto label = j.get<std::string>();
        return guarded(field, [&] { return find_scenario(label); });
    }
    if (!j.is_object()) fail(field, "expected a scenario label or object");
    check_keys(j, field, {"label", "p0", "p1", "n"});
    Scenario s;
    s.label = j.contains("label") ? get_string(j["label"], field + "/label") : "custom";
    if (!j.contains("p0") || !j.contains("p1") || !j.contains("n")) fail(field, "custom scenario needs p0, p1 and n");
    s.p_control = get_number(j["p0"], field + "/p0");
    s.p_experimental = get_number(j["p1"], field + "/p1");
    s.trial_size = get_int(j["n"], field + "/n");
    guarded(field, [&] { s.validate(); return 0; });
    return s;
}

void parse_missingness_item(const json& j, const std::string& field, std::vector<MissingnessProfile>& out) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        append_unique(out, guarded(field, [&] { return missingness_set(name); }));
        return;
    }
    MissingnessProfile m;
    if (j.is_array()) {
        if (j.size() != 2) fail(field, "expected [p0_missing, p1_missing]");
        m.p0_missing = get_number(j[0], field + "/0");
        m.p1_missing = get_number(j[1], field + "/1");
    } else if (j.is_object()) {
        check_keys(j, field, {"p0", "p1"});
        m.p0_missing = j.contains("p0") ? get_number(j["p0"], field + "/p0") : 0.0;
        m.p1_missing = j.contains("p1") ? get_number(j["p1"], field + "/p1") : 0.0;
    } else {
        fail(field, "expected a set name, [p0, p1] pair or object");
    }
    append_unique(out, {m});
}

PolicySpec parse_policy(const json& j, const std::string& field) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        return PolicySpec::defaults(guarded(field, [&] { return parse_algorithm(name); }));
    }
    if (!j.is_object()) fail(field, "expected an algorithm name or object");
    check_keys(j, field,
               {"algorithm", "c", "discount", "randucb_points", "randucb_lower", "randucb_upper",
                "randucb_tracks_ucb_beta", "perturbation_mean"});
    if (!j.contains("algorithm")) fail(field, "missing 'algorithm'");
    const auto name = get_string(j["algorithm"], field + "/algorithm");
    PolicySpec p = PolicySpec::defaults(guarded(field + "/algorithm", [&] { return parse_algorithm(name); }));
    if (j.contains("c")) {
        const auto& c = j["c"];
        if (c.is_string()) {
            if (c.get<std::string>() != "t/2n") fail(field + "/c", "expected a number or \"t/2n\"");
            p.exponent_mode = ExponentMode::time_varying;
        } else {
            p.exponent_mode = ExponentMode::fixed;
            p.fixed_exponent = get_number(c, field + "/c");
        }
    }
    if (j.contains("discount")) p.discount = get_number(j["discount"], field + "/discount");
    if (j.contains("randucb_points")) p.randucb_points = get_int(j["randucb_points"], field + "/randucb_points");
    if (j.contains("randucb_lower")) p.randucb_lower = get_number(j["randucb_lower"], field + "/randucb_lower");
    if (j.contains("randucb_upper")) p.randucb_upper = get_number(j["randucb_upper"], field + "/randucb_upper");
    if (j.contains("randucb_tracks_ucb_beta")) {
        if (!j["randucb_tracks_ucb_beta"].is_boolean()) fail(field + "/randucb_tracks_ucb_beta", "expected a boolean");
        p.randucb_tracks_ucb_beta = j["randucb_tracks_ucb_beta"].get<bool>();
    }
    if (j.contains("perturbation_mean")) {
        p.perturbation_mean = get_number(j["perturbation_mean"], field + "/perturbation_mean");
    }
    guarded(field, [&] { p.validate(); return 0; });
    return p;
}

template <class F>
void for_each_item(const json& j, const std::string& field, F&& f) {
    if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) f(j[i], field + "/" + std::to_string(i));
    } else {
        f(j, field);
    }
}

std::optional<double> finite_or_none(double v) {
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::optional<double> parse_optional(const std::string& s, const std::string& column) {
    if (s == kNa) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
        throw std::invalid_argument("CSV column " + column + ": bad number '" + s + "'");
    }
    return v;
}

template <class T>
T parse_integer(const std::string& s, const std::string& column) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::invalid_argument("CSV column " + column + ": bad integer '" + s + "'");
    }
    return v;
}

}  // namespace

ExperimentPlan parse_plan(std::string_view text) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const auto upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw PlanError("plan syntax error at line " + std::to_string(line) + ": " + e.what());
    }
    if (!root.is_object()) fail("/", "plan must be a JSON object");
    check_keys(root, "", {"scenarios", "missingness", "policies", "imputation", "replications", "tts_replications",
                          "seed", "allow_high_missingness"});

    ExperimentPlan plan;
    plan.missingness = {MissingnessProfile{}};
    if (root.contains("scenarios")) {
        for_each_item(root["scenarios"], "/scenarios",
                      [&](const json& j, const std::string& f) { plan.scenarios.push_back(parse_scenario(j, f)); });
    }
    if (root.contains("missingness")) {
        plan.missingness.clear();
        for_each_item(root["missingness"], "/missingness",
                      [&](const json& j, const std::string& f) { parse_missingness_item(j, f, plan.missingness); });
    }
    if (root.contains("policies")) {
        for_each_item(root["policies"], "/policies",
                      [&](const json& j, const std::string& f) { plan.policies.push_back(parse_policy(j, f)); });
    }
    if (root.contains("imputation")) {
        plan.modes.clear();
        for_each_item(root["imputation"], "/imputation", [&](const json& j, const std::string& f) {
            const auto name = get_string(j, f);
            const auto mode = guarded(f, [&] { return parse_imputation_mode(name); });
            if (std::find(plan.modes.begin(), plan.modes.end(), mode) == plan.modes.end()) plan.modes.push_back(mode);
        });
    }
    if (root.contains("replications")) plan.replications = get_int(root["replications"], "/replications");
    if (root.contains("tts_replications")) {
        plan.tts_replications = get_int(root["tts_replications"], "/tts_replications");
    }
    if (plan.replications < 2 || plan.tts_replications < 2) fail("/replications", "need at least 2 per cell");
    if (root.contains("seed")) {
        const auto& s = root["seed"];
        if (!s.is_number_unsigned()) fail("/seed", "expected a non-negative integer");
        plan.seed = s.get<std::uint64_t>();
    }
    if (root.contains("allow_high_missingness")) {
        if (!root["allow_high_missingness"].is_boolean()) fail("/allow_high_missingness", "expected a boolean");
        if (root["allow_high_missingness"].get<bool>()) plan.max_missingness = 1.0;
    }
    for (std::size_t i = 0; i < plan.missingness.size(); ++i) {
        guarded("/missingness/" + std::to_string(i), [&] {
            plan.missingness[i].validate(plan.max_missingness);
            return 0;
        });
    }
    return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PlanError("cannot read plan file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_plan(buf.str());
}

const std::vector<std::string>& csv_header() {
    static const std::vector<std::string> header = {
        "scenario",         "p0",               "p1",
        "n",                "algorithm",        "p0_missing",
        "p1_missing",       "imputation_mode",  "replications",
        "seed",             "mean_pstar",       "se_pstar",
        "mean_ons",         "se_ons",           "bias_arm0",
        "bias_arm1",        "se_bias_arm0",     "se_bias_arm1",
        "cov_over_EN_arm0", "cov_over_EN_arm1", "undefined_fraction_arm0",
        "undefined_fraction_arm1"};
    return header;
}

OutputRow make_row(const CellResult& result, std::uint64_t seed) {
    const Cell& c = result.cell;
    OutputRow row;
    row.scenario = c.scenario.label;
    row.p0 = c.scenario.p_control;
    row.p1 = c.scenario.p_experimental;
    row.n = c.scenario.trial_size;
    row.algorithm = std::string(to_string(c.policy.algorithm));
    row.p0_missing = c.missingness.p0_missing;
    row.p1_missing = c.missingness.p1_missing;
    row.imputation_mode = std::string(to_string(c.mode));
    row.replications = c.replications;
    row.seed = seed;
    if (!result.report) return row;
    const auto& r = *result.report;
    row.mean_pstar = finite_or_none(r.mean_pstar);
    row.se_pstar = finite_or_none(r.se_pstar);
    row.mean_ons = finite_or_none(r.mean_ons);
    row.se_ons = finite_or_none(r.se_ons);
    auto arm_stat = [&](int k, double v) { return r.arms[k].defined_count > 0 ? finite_or_none(v) : std::nullopt; };
    row.bias_arm0 = arm_stat(0, r.arms[0].bias);
    row.bias_arm1 = arm_stat(1, r.arms[1].bias);
    row.se_bias_arm0 = arm_stat(0, r.arms[0].se_bias);
    row.se_bias_arm1 = arm_stat(1, r.arms[1].se_bias);
    row.cov_over_EN_arm0 = arm_stat(0, r.arms[0].cov_over_mean_assigned);
    row.cov_over_EN_arm1 = arm_stat(1, r.arms[1].cov_over_mean_assigned);
    row.undefined_fraction_arm0 = finite_or_none(r.arms[0].undefined_fraction);
    row.undefined_fraction_arm1 = finite_or_none(r.arms[1].undefined_fraction);
    return row;
}

std::string format_number(std::optional<double> value) {
    if (!value || !std::isfinite(*value)) return std::string(kNa);
    char buf[32];
    // Normalise -0 so that equal values print identically.
    const double v = *value == 0.0 ? 0.0 : *value;
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string format_row(const OutputRow& row) {
    const std::vector<std::string> fields = {
        quote(row.scenario),
        format_number(row.p0),
        format_number(row.p1),
        std::to_string(row.n),
        quote(row.algorithm),
        format_number(row.p0_missing),
        format_number(row.p1_missing),
        quote(row.imputation_mode),
        std::to_string(row.replications),
        std::to_string(row.seed),
        format_number(row.mean_pstar),
        format_number(row.se_pstar),
        format_number(row.mean_ons),
        format_number(row.se_ons),
        format_number(row.bias_arm0),
        format_number(row.bias_arm1),
        format_number(row.se_bias_arm0),
        format_number(row.se_bias_arm1),
        format_number(row.cov_over_EN_arm0),
        format_number(row.cov_over_EN_arm1),
        format_number(row.undefined_fraction_arm0),
        format_number(row.undefined_fraction_arm1)};
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += fields[i];
    }
    return line;
}

std::string format_csv(const std::vector<OutputRow>& rows) {
    std::string out;
    const auto& header = csv_header();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += "\r\n";
    for (const auto& row : rows) {
        out += format_row(row);
        out += "\r\n";
    }
    return out;
}

std::vector<std::string> split_csv_record(std::string_view line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    fields.back() += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r' && c != '\n') {
            fields.back() += c;
        }
    }
    if (quoted) throw std::invalid_argument("CSV record has an unterminated quote");
    return fields;
}

OutputRow parse_row(std::string_view line) {
    const auto f = split_csv_record(line);
    const auto& h = csv_header();
    if (f.size() != h.size()) {
        throw std::invalid_argument("CSV record has " + std::to_string(f.size()) + " fields, expected " +
                                    std::to_string(h.size()));
    }
    auto num = [&](std::size_t i) { return parse_optional(f[i], h[i]); };
    auto req = [&](std::size_t i) {
        const auto v = num(i);
        if (!v) throw std::invalid_argument("CSV column " + h[i] + " may not be NA");
        return *v;
    };
    OutputRow row;
    row.scenario = f[0];
    row.p0 = req(1);
    row.p1 = req(2);
    row.n = parse_integer<int>(f[3], h[3]);
    row.algorithm = f[4];
    row.p0_missing = req(5);
    row.p1_missing = req(6);
    row.imputation_mode = f[7];
    row.replications = parse_integer<int>(f[8], h[8]);
    row.seed = parse_integer<std::uint64_t>(f[9], h[9]);
    row.mean_pstar = num(10);
    row.se_pstar = num(11);
    row.mean_ons = num(12);
    row.se_ons = num(13);
    row.bias_arm0 = num(14);
    row.bias_arm1 = num(15);
    row.se_bias_arm0 = num(16);
    row.se_bias_arm1 = num(17);
    row.cov_over_EN_arm0 = num(18);
    row.cov_over_EN_arm1 = num(19);
    row.undefined_fraction_arm0 = num(20);
    row.undefined_fraction_arm1 = num(21);
    return row;
}

std::vector<OutputRow> parse_csv(std::string_view text) {
    std::vector<OutputRow> rows;
    bool header_seen = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty() || line == "\r") continue;
        if (!header_seen) {
            if (split_csv_record(line) != csv_header()) throw std::invalid_argument("CSV header does not match");
            header_seen = true;
            continue;
        }
        rows.push_back(parse_row(line));
    }
    return rows;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing: " + std::strerror(errno));
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw std::runtime_error("write to " + tmp.string() + " failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignored;
        std::filesystem::remove(tmp, ignored);
        throw std::runtime_error("cannot move output into place at " + path.string() + ": " + ec.message());
    }
}

// ---------------------------------------------------------------------------
// Figure plans

namespace {

std::vector<Scenario> scenario_range(int first, int last) {
    std::vector<Scenario> out;
    for (int i = first; i <= last; ++i) out.push_back(find_scenario("S" + std::to_string(i)));
    return out;
}

std::vector<PolicySpec> all_policies() {
    std::vector<PolicySpec> out;
    for (auto a : kAllAlgorithms) out.push_back(PolicySpec::defaults(a));
    return out;
}

std::vector<PolicySpec> grid_policies() {
    return {PolicySpec::defaults(Algorithm::TTS), PolicySpec::defaults(Algorithm::CB),
            PolicySpec::defaults(Algorithm::UCB)};
}

constexpr std::string_view kNullSeries =
    "three profile families over p_missing: equal (p0_missing = p1_missing), control only, experimental only";

}  // namespace

const std::vector<std::string>& figure_ids() {
    static const std::vector<std::string> ids = {"fig2", "fig3", "fig4", "fig5", "fig6", "s3",  "s4", "s6",
                                                 "s7",   "s8",   "s9",   "s10",  "s11",  "s12", "s13"};
    return ids;
}

FigurePlan figure_plan(std::string_view id, double scale, std::uint64_t seed) {
    FigurePlan f;
    f.id = std::string(id);
    ExperimentPlan& p = f.plan;
    p.seed = seed;

    auto grid = [&](const Scenario& s, std::string what) {
        p.scenarios = {s};
        p.missingness = grid36();
        p.policies = grid_policies();
        f.description = std::move(what);
        f.x_axis = "p1_missing";
        f.series = "p0_missing";
        f.facets = "algorithm";
    };
    auto suite = [&](int first, int last, std::vector<ImputationMode> modes, std::string what, std::string x) {
        p.scenarios = scenario_range(first, last);
        p.missingness = null16();
        p.policies = all_policies();
        p.modes = std::move(modes);
        f.description = std::move(what);
        f.x_axis = std::move(x);
        f.series = std::string(kNullSeries) + (p.modes.size() > 1 ? "; line style by imputation_mode" : "");
        f.facets = "algorithm x scenario";
    };
    using M = ImputationMode;

    if (id == "fig2") {
        grid(find_scenario("S5"), "mean p* under the null, p0 = p1 = 0.9, n = 200, full missingness grid");
    } else if (id == "s3") {
        grid(find_scenario("S4"), "mean p* under the null, p0 = p1 = 0.7, n = 200, full missingness grid");
    } else if (id == "s4") {
        grid(Scenario{"custom_0.7_0.9", 0.7, 0.9, 200},
             "mean p* under the alternative, p0 = 0.7, p1 = 0.9, n = 200, full missingness grid");
    } else if (id == "fig3") {
        suite(1, 5, {M::none}, "mean p* under the null (S1-S5)", "p_missing; y = mean_pstar");
    } else if (id == "fig4") {
        suite(6, 12, {M::none}, "mean p* under the alternative (S6-S12)", "p_missing; y = mean_pstar");
    } else if (id == "s6") {
        suite(1, 5, {M::none}, "observed number of successes under the null", "p_missing; y = mean_ons");
    } else if (id == "s7") {
        suite(6, 12, {M::none}, "observed number of successes under the alternative", "p_missing; y = mean_ons");
    } else if (id == "fig5") {
        suite(1, 5, {M::none, M::mean_default_half}, "mean imputation (default 0.5) under the null",
              "p_missing; y = mean_pstar");
    } else if (id == "fig6") {
        suite(6, 12, {M::none, M::mean_default_half}, "mean imputation (default 0.5) under the alternative",
              "p_missing; y = mean_pstar");
    } else if (id == "s8") {
        suite(1, 5, {M::none, M::mean_default_nine_tenths}, "mean imputation (default 0.9) under the null",
              "p_missing; y = mean_pstar");
    } else if (id == "s9") {
        suite(6, 12, {M::none, M::mean_default_nine_tenths}, "mean imputation (default 0.9) under the alternative",
              "p_missing; y = mean_pstar");
    } else if (id == "s10") {
        suite(1, 5, {M::none, M::mean_after_first_observation},
              "mean imputation starting after the first observation, null", "p_missing; y = mean_pstar");
    } else if (id == "s11") {
        suite(6, 12, {M::none, M::mean_after_first_observation},
              "mean imputation starting after the first observation, alternative", "p_missing; y = mean_pstar");
    } else if (id == "s12") {
        suite(1, 5, {M::none}, "bias of p_hat under the null", "p_missing; y = bias_arm0, bias_arm1");
    } else if (id == "s13") {
        suite(6, 12, {M::none}, "bias of p_hat under the alternative", "p_missing; y = bias_arm1 (solid), bias_arm0 (dashed)");
    } else {
        std::string valid;
        for (const auto& v : figure_ids()) valid += (valid.empty() ? "" : ", ") + v;
        throw std::invalid_argument("unknown figure id '" + std::string(id) + "' (valid: " + valid + ")");
    }
    if (scale != 1.0) p.scale_replications(scale);
    return f;
}

std::string figure_manifest(const FigurePlan& figure, std::string_view csv_name) {
    const auto& p = figure.plan;
    json j;
    j["id"] = figure.id;
    j["csv"] = std::string(csv_name);
    j["description"] = figure.description;
    j["x_axis"] = figure.x_axis;
    j["series"] = figure.series;
    j["facets"] = figure.facets;
    j["seed"] = p.seed;
    j["replications"] = p.replications;
    j["tts_replications"] = p.tts_replications;
    j["cells"] = expand_cells(p).size();
    auto& sc = j["scenarios"] = json::array();
    for (const auto& s : p.scenarios) {
        sc.push_back({{"label", s.label}, {"p0", s.p_control}, {"p1", s.p_experimental}, {"n", s.trial_size}});
    }
    auto& pol = j["algorithms"] = json::array();
    for (const auto& x : p.policies) pol.push_back(std::string(to_string(x.algorithm)));
    auto& modes = j["imputation_modes"] = json::array();
    for (const auto m : p.modes) modes.push_back(std::string(to_string(m)));
    auto& miss = j["missingness"] = json::array();
    for (const auto& m : p.missingness) miss.push_back({m.p0_missing, m.p1_missing});
    return j.dump(2) + "\n";
}

}  // namespace mabsim
