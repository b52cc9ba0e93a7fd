#pragma once

// Gittins indices for Beta-Bernoulli arms under geometric discounting.
//
// The index of state (s, f) is the retirement rate lambda at which an agent is
// indifferent between retiring for lambda/(1-d) and playing the arm optimally
// (with the option to retire later). Values come from backward induction over
// the (successes, failures) lattice, truncated after a fixed number of pulls.
//
// Truncation: leaves are valued at max(lambda, mean)/(1-d), a lower bound on
// the true value whose error is at most (1 - lambda)/(1-d). Discounting shrinks
// that error by d^horizon at the root, so the root value is within
// d^horizon/(1-d) of the untruncated one. Functions refuse any horizon where
// that bound is not below the requested tolerance.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mabsim {

inline constexpr int kDefaultGittinsHorizon = 2000;
inline constexpr double kDefaultGittinsTolerance = 1e-5;

class GittinsTableMiss : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// d^horizon / (1 - d).
double truncation_bound(double discount, int horizon);

struct RetirementValues {
    double retire = 0.0;    // lambda / (1 - d)
    double continue_ = 0.0; // play once, then act optimally
    double value() const { return retire > continue_ ? retire : continue_; }
};

/// Both sides of the continue-vs-retire comparison at the root (s, f).
RetirementValues retirement_values(int s, int f, double lambda, double discount, int horizon,
                                   double tol = kDefaultGittinsTolerance);

/// Optimal value of the retirement problem at (s, f).
double retirement_value(int s, int f, double lambda, double discount, int horizon,
                        double tol = kDefaultGittinsTolerance);

/// Index by bisection on lambda over [s/(s+f), 1]. Serial reference; costs
/// O(horizon^2) per bisection step.
double gittins_index(int s, int f, double discount, double tol = kDefaultGittinsTolerance,
                     int horizon = kDefaultGittinsHorizon);

/// Dense table G[s][f] for s, f >= 1 and s + f <= max_state + 2.
class GittinsTable {
public:
    GittinsTable(double discount, int max_state, double tol, int horizon);

    double discount() const { return discount_; }
    int max_state() const { return max_state_; }
    double tolerance() const { return tol_; }
    int horizon() const { return horizon_; }
    /// Largest s + f stored.
    int max_level() const { return max_state_ + 2; }

    bool covers(std::int64_t s, std::int64_t f) const {
        return s >= 1 && f >= 1 && s + f <= max_level();
    }
    /// Throws GittinsTableMiss outside the stored triangle.
    double lookup(std::int64_t s, std::int64_t f) const;
    void set(int s, int f, double value) { values_[offset(s, f)] = value; }

    std::size_t size() const { return values_.size(); }

private:
    std::size_t offset(std::int64_t s, std::int64_t f) const;

    double discount_;
    int max_state_;
    double tol_;
    int horizon_;
    std::vector<double> values_;
};

struct TableBuildStats {
    int passes = 0;   // global backward-induction sweeps
    int rounds = 0;   // refinement rounds
    double widest_bracket = 0.0;
};

/// Fills every cell with s + f <= max_state + 2.
///
/// One sweep over the lattice at a fixed lambda yields, for every state at
/// once, Q(lambda) = continue - retire and its slope. Q is convex and strictly
/// decreasing in lambda, so a tangent zero bounds the root from below and the
/// secant through a sign change bounds it from above. Sweeps on a coarse grid
/// are refined where any bracket is still wider than tol; each stored value is
/// the bracket midpoint. Sweeps run in parallel with OpenMP; the result does
/// not depend on the thread count.
GittinsTable build_table(double discount, int max_state, double tol = kDefaultGittinsTolerance,
                         int horizon = kDefaultGittinsHorizon, TableBuildStats* stats = nullptr);

/// Same table, cell by cell through gittins_index. Serial; for tests.
GittinsTable build_table_reference(double discount, int max_state, double tol = kDefaultGittinsTolerance,
                                   int horizon = kDefaultGittinsHorizon);

// Cache files are CSV with header "s,f,G" and one row per cell, G printed
// with 17 significant digits. The parameters are encoded in the file name.
std::string table_file_name(double discount, int max_state, double tol, int horizon);
void save_table(const GittinsTable& table, const std::filesystem::path& path);
GittinsTable load_table(const std::filesystem::path& path, double discount, int max_state, double tol,
                        int horizon);

/// Loads `dir/table_file_name(...)` if present, otherwise builds and saves it.
/// `built` reports which happened.
GittinsTable load_or_build_table(const std::filesystem::path& dir, double discount, int max_state,
                                 double tol = kDefaultGittinsTolerance, int horizon = kDefaultGittinsHorizon,
                                 bool* built = nullptr);

}  // namespace mabsim
