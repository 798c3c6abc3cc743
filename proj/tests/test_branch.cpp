#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cavtomo/branch.hpp"
#include "cavtomo/config.hpp"

using namespace cavtomo;

namespace {

const CavityParams kPaperParams{0.0, 63.0, 105.0, 86.0, 0.53};
const std::vector<double> kGrid = linspace(-400.0, 400.0, 1601);

ScanDataset synthetic_scan(double eta_in) {
    ScanConfig sc;
    sc.omega_grid = kGrid;
    return simulate_scan(kPaperParams, {eta_in, jones::diagonal()}, sc);
}

double measured_min_purity(const ScanDataset& data) {
    double lowest = 2.0;
    for (const auto& p : reconstruct_scan(data))
        lowest = std::min(lowest, p.purity);
    return lowest;
}

} // namespace

TEST_CASE("branch_candidates: near-unity purity pushes the candidates to 0 and 1") {
    double prev_lo = 1.0, prev_hi = 0.0;
    for (const double eps : {1e-2, 1e-3, 1e-4}) {
        const auto [lo, hi] =
            branch_candidates(kPaperParams, jones::diagonal(), 1.0 - eps, kGrid);
        CHECK(lo < prev_lo);
        CHECK(hi > prev_hi);
        prev_lo = lo;
        prev_hi = hi;
    }
    CHECK(prev_lo < 1e-3);
    CHECK(prev_hi > 1.0 - 1e-3);
}

TEST_CASE("branch_candidates: at the curve minimum both candidates coincide") {
    // locate the interior minimum of the coupling curve on a fine eta grid
    double eta_star = 0.5, curve_min = 2.0;
    for (int i = 0; i <= 400; ++i) {
        const double eta = i / 400.0;
        const double v = min_purity_over_grid(kPaperParams, jones::diagonal(), eta, kGrid);
        if (v < curve_min) {
            curve_min = v;
            eta_star = eta;
        }
    }
    const auto [lo, hi] =
        branch_candidates(kPaperParams, jones::diagonal(), curve_min + 1e-9, kGrid);
    CHECK(lo == Catch::Approx(eta_star).margin(0.01));
    CHECK(hi == Catch::Approx(eta_star).margin(0.01));

    CHECK_THROWS_AS(
        branch_candidates(kPaperParams, jones::diagonal(), curve_min - 1e-3, kGrid),
        NoSolutionError);
    CHECK_THROWS_AS(branch_candidates(kPaperParams, jones::diagonal(), 1.0, kGrid),
                    TrivialSolutionError);
}

TEST_CASE("branch_candidates inverts a synthetic high-coupling scan") {
    const double measured = measured_min_purity(synthetic_scan(0.96));
    const auto [lo, hi] = branch_candidates(kPaperParams, jones::diagonal(), measured, kGrid);
    CHECK(hi == Catch::Approx(0.96).margin(1e-6));
    CHECK(lo < 0.5); // the impostor lives on the weak-coupling side
}

TEST_CASE("resolve_branch picks the branch with the matching rotation amplitude") {
    // high-coupling data: wide Poincare excursion
    const ScanDataset high = synthetic_scan(0.96);
    const auto cand_high = branch_candidates(kPaperParams, jones::diagonal(),
                                             measured_min_purity(high), kGrid);
    const BranchDiagnostics dh =
        resolve_branch(high, kPaperParams, jones::diagonal(), cand_high);
    CHECK(dh.chosen == BranchChoice::high);
    CHECK_FALSE(dh.ambiguous);
    CHECK(dh.rotation_measured == Catch::Approx(dh.rotation_high).margin(1e-6));
    CHECK(dh.rotation_high > dh.rotation_low);

    // low-coupling data: little rotation, matched against its impostor
    const ScanDataset low = synthetic_scan(0.10);
    const auto cand_low = branch_candidates(kPaperParams, jones::diagonal(),
                                            measured_min_purity(low), kGrid);
    CHECK(cand_low.first == Catch::Approx(0.10).margin(1e-6));
    const BranchDiagnostics dl =
        resolve_branch(low, kPaperParams, jones::diagonal(), cand_low);
    CHECK(dl.chosen == BranchChoice::low);
    CHECK_FALSE(dl.ambiguous);
}

TEST_CASE("resolve_branch: zero coupling means zero rotation, low branch") {
    const ScanDataset none = synthetic_scan(0.0);
    const BranchDiagnostics diag =
        resolve_branch(none, kPaperParams, jones::diagonal(), {0.0, 1.0});
    CHECK(diag.rotation_measured == Catch::Approx(0.0).margin(1e-9));
    CHECK(diag.rotation_low == Catch::Approx(0.0).margin(1e-9));
    CHECK(diag.rotation_high > 0.1);
    CHECK(diag.chosen == BranchChoice::low);
}

TEST_CASE("resolve_branch flags coinciding candidates as ambiguous") {
    const ScanDataset data = synthetic_scan(0.7);
    const BranchDiagnostics diag =
        resolve_branch(data, kPaperParams, jones::diagonal(), {0.7, 0.7}, 1e-9);
    CHECK(diag.ambiguous);
}
