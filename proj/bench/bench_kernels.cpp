// Serial reference vs OpenMP kernels: replication loop and Gittins table build.
//
//   mabsim_bench [replications] [max_state]

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "mabsim/experiments.hpp"
#include "mabsim/gittins.hpp"

using namespace mabsim;

template <class F>
static double seconds(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 4000;
    const int max_state = argc > 2 ? std::atoi(argv[2]) : 40;
    std::printf("threads available: %d\n", omp_get_max_threads());

    for (auto algo : {Algorithm::FR, Algorithm::RTS, Algorithm::CB, Algorithm::UCB, Algorithm::RBI}) {
        const Cell cell{find_scenario("S3"), {0.2, 0.2}, PolicySpec::defaults(algo), ImputationMode::none, reps};
        std::vector<TrialResult> a, b;
        const double ts = seconds([&] { a = simulate_cell_serial(cell, 7, nullptr); });
        const double tp = seconds([&] { b = simulate_cell_parallel(cell, 7, nullptr); });
        bool same = a.size() == b.size();
        for (std::size_t i = 0; same && i < a.size(); ++i) same = a[i].assignments == b[i].assignments;
        std::printf("%-8s R=%d n=200  serial %.3f s  parallel %.3f s  speedup %.2fx  %.0f ns/patient  %s\n",
                    std::string(to_string(algo)).c_str(), reps, ts, tp, ts / tp, 1e9 * ts / (reps * 200.0),
                    same ? "identical" : "MISMATCH");
    }

    GittinsTable ref(0.99, 0, 1e-5, kDefaultGittinsHorizon), fast = ref;
    const double tr = seconds([&] { ref = build_table_reference(0.99, max_state); });
    TableBuildStats stats;
    const double tf = seconds([&] { fast = build_table(0.99, max_state, kDefaultGittinsTolerance,
                                                       kDefaultGittinsHorizon, &stats); });
    double worst = 0.0;
    for (int m = 2; m <= fast.max_level(); ++m) {
        for (int s = 1; s < m; ++s) worst = std::max(worst, std::abs(ref.lookup(s, m - s) - fast.lookup(s, m - s)));
    }
    std::printf("gittins max_state=%d  bisection %.2f s  sweep %.2f s (%d passes)  max |diff| %.2e\n", max_state, tr,
                tf, stats.passes, worst);
    return 0;
}
