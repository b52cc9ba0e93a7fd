#include "mabsim/gittins.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace mabsim {

namespace {

void check_discount(double discount) {
    if (!(discount > 0.0 && discount < 1.0)) throw std::invalid_argument("discount must lie in (0, 1)");
}

void check_horizon(double discount, int horizon, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    const double bound = truncation_bound(discount, horizon);
    if (!(bound < tol)) {
        throw std::invalid_argument("horizon " + std::to_string(horizon) + " too short: truncation bound " +
                                    std::to_string(bound) + " is not below tolerance " + std::to_string(tol));
    }
}

// Bracket endpoint: Q and dQ/dlambda observed at lambda.
struct Sample {
    double lambda = 0.0;
    double q = 0.0;
    double slope = 0.0;
};

struct Bracket {
    Sample lo{0.0, std::numeric_limits<double>::infinity(), 0.0};  // Q >= 0
    Sample hi{1.0, -std::numeric_limits<double>::infinity(), 0.0}; // Q < 0
    bool has_lo = false;
    bool has_hi = false;

    void merge(const Sample& s) {
        if (s.q >= 0.0) {
            if (!has_lo || s.lambda > lo.lambda) {
                lo = s;
                has_lo = true;
            }
        } else if (!has_hi || s.lambda < hi.lambda) {
            hi = s;
            has_hi = true;
        }
    }

    void merge(const Bracket& other) {
        if (other.has_lo) merge(other.lo);
        if (other.has_hi) merge(other.hi);
    }

    // [lower, upper] containing the root of the convex decreasing Q.
    std::pair<double, double> bounds() const {
        double lower = lo.lambda;
        double upper = hi.lambda;
        if (has_lo && lo.slope < 0.0) lower = std::max(lower, lo.lambda - lo.q / lo.slope);
        if (has_hi && hi.slope < 0.0) lower = std::max(lower, hi.lambda - hi.q / hi.slope);
        if (has_lo && has_hi && lo.q - hi.q > 0.0) {
            const double secant = lo.lambda + lo.q * (hi.lambda - lo.lambda) / (lo.q - hi.q);
            upper = std::min(upper, secant);
        }
        lower = std::min(lower, upper);
        return {lower, upper};
    }
};

// Per-thread scratch for one lattice sweep.
struct SweepBuffers {
    std::vector<double> value;
    std::vector<double> slope;
};

// Backward induction over every state with s + f <= top_level at a fixed
// lambda. States at levels [min_level, table_level] are merged into brackets.
void sweep(double lambda, double discount, int table_level, int top_level, int min_level, SweepBuffers& buf,
           std::vector<Bracket>& brackets) {
    const double inv = 1.0 / (1.0 - discount);
    const double retire = lambda * inv;
    buf.value.assign(static_cast<std::size_t>(top_level) + 1, 0.0);
    buf.slope.assign(static_cast<std::size_t>(top_level) + 1, 0.0);
    double* v = buf.value.data();
    double* w = buf.slope.data();

    // Leaves at level top_level, indexed by successes a = 1..top_level-1.
    for (int a = 1; a < top_level; ++a) {
        const double mean = static_cast<double>(a) / top_level;
        v[a] = std::max(lambda, mean) * inv;
        w[a] = lambda >= mean ? inv : 0.0;
    }
    for (int m = top_level - 1; m >= min_level; --m) {
        const double inv_m = 1.0 / m;
        const bool record = m <= table_level;
        // offset of (1, m-1) in the triangular table
        const std::size_t base = static_cast<std::size_t>(m - 2) * static_cast<std::size_t>(m - 1) / 2;
        for (int a = 1; a < m; ++a) {
            const double mean = a * inv_m;
            const double cont = mean + discount * (mean * v[a + 1] + (1.0 - mean) * v[a]);
            const double cont_slope = discount * (mean * w[a + 1] + (1.0 - mean) * w[a]);
            if (record) brackets[base + static_cast<std::size_t>(a - 1)].merge(Sample{lambda, cont - retire, cont_slope - inv});
            const bool go_on = cont > retire;
            v[a] = go_on ? cont : retire;
            w[a] = go_on ? cont_slope : inv;
        }
    }
}

}  // namespace

double truncation_bound(double discount, int horizon) {
    check_discount(discount);
    return std::pow(discount, horizon) / (1.0 - discount);
}

RetirementValues retirement_values(int s, int f, double lambda, double discount, int horizon, double tol) {
    if (s < 1 || f < 1) throw std::invalid_argument("retirement problem needs s, f >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
    check_discount(discount);
    check_horizon(discount, horizon, tol);

    const double inv = 1.0 / (1.0 - discount);
    const double retire = lambda * inv;
    // v[i]: value after j further pulls with i successes among them.
    std::vector<double> v(static_cast<std::size_t>(horizon) + 2);
    const int root = s + f;
    for (int i = 0; i <= horizon; ++i) {
        const double mean = static_cast<double>(s + i) / (root + horizon);
        v[i] = std::max(lambda, mean) * inv;
    }
    double cont = 0.0;
    for (int j = horizon - 1; j >= 0; --j) {
        const double inv_m = 1.0 / (root + j);
        for (int i = 0; i <= j; ++i) {
            const double mean = (s + i) * inv_m;
            cont = mean + discount * (mean * v[i + 1] + (1.0 - mean) * v[i]);
            v[i] = std::max(cont, retire);
        }
    }
    return RetirementValues{retire, cont};
}

double retirement_value(int s, int f, double lambda, double discount, int horizon, double tol) {
    return retirement_values(s, f, lambda, discount, horizon, tol).value();
}

double gittins_index(int s, int f, double discount, double tol, int horizon) {
    auto advantage = [&](double lambda) {
        const auto rv = retirement_values(s, f, lambda, discount, horizon, tol);
        return rv.continue_ - rv.retire;
    };
    double lo = static_cast<double>(s) / (s + f);
    double hi = 1.0;
    if (advantage(lo) < 0.0 || advantage(hi) > 0.0) {
        throw std::logic_error("gittins_index: bisection failed to bracket the indifference point");
    }
    const int max_iter = static_cast<int>(std::ceil(std::log2(1.0 / tol))) + 1;
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (advantage(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (hi - lo > tol) throw std::logic_error("gittins_index: bisection did not converge");
    return 0.5 * (lo + hi);
}

GittinsTable::GittinsTable(double discount, int max_state, double tol, int horizon)
    : discount_(discount), max_state_(max_state), tol_(tol), horizon_(horizon) {
    check_discount(discount);
    if (max_state < 0) throw std::invalid_argument("max_state must be non-negative");
    const auto levels = static_cast<std::size_t>(max_level() - 1);
    values_.assign(levels * (levels + 1) / 2, std::numeric_limits<double>::quiet_NaN());
}

std::size_t GittinsTable::offset(std::int64_t s, std::int64_t f) const {
    const std::int64_t m = s + f;
    return static_cast<std::size_t>((m - 2) * (m - 1) / 2 + (s - 1));
}

double GittinsTable::lookup(std::int64_t s, std::int64_t f) const {
    if (!covers(s, f)) {
        throw GittinsTableMiss("Gittins table miss at (" + std::to_string(s) + ", " + std::to_string(f) +
                               "); table covers s + f <= " + std::to_string(max_level()));
    }
    return values_[offset(s, f)];
}

GittinsTable build_table(double discount, int max_state, double tol, int horizon, TableBuildStats* stats) {
    check_discount(discount);
    check_horizon(discount, horizon, tol);
    GittinsTable table(discount, max_state, tol, horizon);
    const int table_level = table.max_level();
    const int top_level = table_level + horizon;
    const std::size_t cells = table.size();

    std::vector<Bracket> brackets(cells);
    TableBuildStats local;

    auto run_round = [&](const std::vector<double>& lambdas, const std::vector<int>& min_levels) {
        const int count = static_cast<int>(lambdas.size());
#pragma omp parallel
        {
            std::vector<Bracket> mine(cells);
            SweepBuffers buf;
#pragma omp for schedule(dynamic, 1)
            for (int i = 0; i < count; ++i) {
                sweep(lambdas[i], discount, table_level, top_level, min_levels[i], buf, mine);
            }
            // Merging keeps the extreme lambdas on each side, so the result
            // does not depend on which thread swept which lambda.
#pragma omp critical(gittins_merge)
            for (std::size_t c = 0; c < cells; ++c) brackets[c].merge(mine[c]);
        }
        local.passes += count;
        ++local.rounds;
    };

    constexpr int kInitialGrid = 64;
    std::vector<double> lambdas;
    for (int j = 0; j <= kInitialGrid; ++j) lambdas.push_back(static_cast<double>(j) / kInitialGrid);
    run_round(lambdas, std::vector<int>(lambdas.size(), 2));

    for (;;) {
        // Per interval [lo, hi] needing refinement: lowest level touched.
        std::map<std::pair<double, double>, int> pending;
        double widest = 0.0;
        for (int m = 2; m <= table_level; ++m) {
            for (int s = 1; s < m; ++s) {
                const std::size_t idx = static_cast<std::size_t>(m - 2) * (m - 1) / 2 + (s - 1);
                const auto& b = brackets[idx];
                if (!b.has_lo || !b.has_hi) throw std::logic_error("build_table: root not bracketed");
                const auto [lower, upper] = b.bounds();
                widest = std::max(widest, upper - lower);
                if (upper - lower > tol) {
                    auto key = std::make_pair(b.lo.lambda, b.hi.lambda);
                    auto it = pending.find(key);
                    if (it == pending.end()) {
                        pending.emplace(key, m);
                    } else {
                        it->second = std::min(it->second, m);
                    }
                }
            }
        }
        local.widest_bracket = widest;
        if (pending.empty()) break;
        std::vector<double> next;
        std::vector<int> levels;
        for (const auto& [interval, level] : pending) {
            const double mid = 0.5 * (interval.first + interval.second);
            if (!(mid > interval.first && mid < interval.second)) {
                throw std::logic_error("build_table: refinement interval collapsed");
            }
            next.push_back(mid);
            levels.push_back(level);
        }
        run_round(next, levels);
    }

    for (int m = 2; m <= table_level; ++m) {
        for (int s = 1; s < m; ++s) {
            const std::size_t idx = static_cast<std::size_t>(m - 2) * (m - 1) / 2 + (s - 1);
            const auto [lower, upper] = brackets[idx].bounds();
            table.set(s, m - s, 0.5 * (lower + upper));
        }
    }
    if (stats) *stats = local;
    return table;
}

GittinsTable build_table_reference(double discount, int max_state, double tol, int horizon) {
    GittinsTable table(discount, max_state, tol, horizon);
    for (int m = 2; m <= table.max_level(); ++m) {
        for (int s = 1; s < m; ++s) table.set(s, m - s, gittins_index(s, m - s, discount, tol, horizon));
    }
    return table;
}

std::string table_file_name(double discount, int max_state, double tol, int horizon) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "gittins_d%.6g_B%d_tol%.3g_H%d.csv", discount, max_state, tol, horizon);
    return buf;
}

void save_table(const GittinsTable& table, const std::filesystem::path& path) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << "s,f,G\n";
        char buf[64];
        for (int m = 2; m <= table.max_level(); ++m) {
            for (int s = 1; s < m; ++s) {
                std::snprintf(buf, sizeof buf, "%.17g", table.lookup(s, m - s));
                out << s << ',' << (m - s) << ',' << buf << '\n';
            }
        }
        if (!out.flush()) throw std::runtime_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

GittinsTable load_table(const std::filesystem::path& path, double discount, int max_state, double tol,
                        int horizon) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    GittinsTable table(discount, max_state, tol, horizon);
    std::string line;
    if (!std::getline(in, line) || line != "s,f,G") {
        throw std::runtime_error(path.string() + ": missing 's,f,G' header");
    }
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int s = 0, f = 0;
        double g = 0.0;
        char c1 = 0, c2 = 0;
        std::istringstream row(line);
        if (!(row >> s >> c1 >> f >> c2 >> g) || c1 != ',' || c2 != ',') {
            throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
        }
        if (!table.covers(s, f)) throw std::runtime_error(path.string() + ": cell outside table bounds");
        table.set(s, f, g);
        ++rows;
    }
    if (rows != table.size()) {
        throw std::runtime_error(path.string() + ": expected " + std::to_string(table.size()) + " rows, found " +
                                 std::to_string(rows));
    }
    return table;
}

GittinsTable load_or_build_table(const std::filesystem::path& dir, double discount, int max_state, double tol,
                                 int horizon, bool* built) {
    const auto path = dir / table_file_name(discount, max_state, tol, horizon);
    if (std::filesystem::exists(path)) {
        if (built) *built = false;
        return load_table(path, discount, max_state, tol, horizon);
    }
    auto table = build_table(discount, max_state, tol, horizon);
    std::filesystem::create_directories(dir);
    save_table(table, path);
    if (built) *built = true;
    return table;
}

}  // namespace mabsim
