// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure.  All randomness is seeded, so every run checks the same instances.

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "sqlab/experiment.hpp"

using namespace sqlab;

namespace {

int failures = 0;

void report(int criterion, const std::string& what, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion,
                what.c_str(), detail.c_str());
    if (!ok) ++failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

Weight lognormal(const GridSpec& g, std::uint64_t seed, double s = 1.0) {
    std::mt19937_64 rng(seed);
    std::lognormal_distribution<double> dist(0.0, s);
    std::vector<double> v(g.cell_count());
    for (auto& x : v) x = dist(rng);
    return Weight(GridFunction(g, std::move(v)));
}

GridFunction gaussian(const GridSpec& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(g.cell_count());
    for (auto& x : v) x = dist(rng);
    return GridFunction(g, std::move(v));
}

// full-union brute-force sparsity over cell bitmasks
bool brute_is_sparse(const GridSpec& g, const std::vector<DyadicCube>& cubes) {
    for (const auto& q : cubes) {
        std::unordered_set<std::uint64_t> covered;
        for (const auto& c : cubes)
            if (c.level > q.level && contains(q, c, g.n))
                for (auto cell : cells(g, c)) covered.insert(cell);
        if (double(covered.size()) / double(cells(g, q).size()) > 0.5 + 1e-12) return false;
    }
    return true;
}

void criterion_1() {
    GridSpec g{1, 3};
    auto family = all_cubes(g);  // 15 cubes
    std::mt19937_64 rng(20240817);
    int disagreements = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const std::uint64_t mask = rng() & 0x7fff;
        std::vector<DyadicCube> subset;
        for (std::size_t i = 0; i < family.size(); ++i)
            if (mask & (std::uint64_t(1) << i)) subset.push_back(family[i]);
        if (is_sparse(g, subset).sparse != brute_is_sparse(g, subset)) ++disagreements;
    }
    report(1, "sparsity oracle equivalence", disagreements == 0,
           "10000 sampled subsets, " + std::to_string(disagreements) + " disagreements");
}

void criteria_2_3() {
    int corona_violations = 0, partition_violations = 0;
    for (int i = 0; i < 500; ++i) {
        const std::uint64_t seed = 1000 + std::uint64_t(i);
        GridSpec g{1, 4 + i % 5};  // L in 4..8
        const double r = 1.0 + double(i % 3);
        const double p = r + 1.0;  // keeps slice_entropy in scope (p > r)
        Weight w = lognormal(g, seed), sigma = lognormal(g, seed + 7000);
        GridFunction f = lognormal(g, seed + 14000).fn, gg = lognormal(g, seed + 21000).fn;
        auto s = generate_random(g, 0.4, seed);

        auto corona = parallel_projection(s, principal_cubes(f, sigma, s),
                                          principal_cubes(gg, w, s));
        auto [I, II] = corona_I_II(s, f, gg, sigma, w, r, corona);
        if (bilinear_form(s, f, gg, sigma, w, r) >
            std::pow(2.0, r + 1.0) * (I + II) * (1.0 + 1e-12))
            ++corona_violations;

        BumpFunction eps(2.0), eta(7.0);
        bool ok = check_fiber_partition(s, corona);
        ok = ok && check_slice_ap_partition(s, w, sigma, p, slice_ap(s, w, sigma, p));
        ok = ok && check_slice_entropy_partition(
                       s, w, sigma, slice_entropy(s, w, sigma, p, r, eps, eta));
        if (!ok) ++partition_violations;
    }
    report(2, "corona inequality, 500 instances", corona_violations == 0,
           std::to_string(corona_violations) + " violations");
    report(3, "partition invariants, 500 instances", partition_violations == 0,
           std::to_string(partition_violations) + " violations");
}

void criterion_4() {
    GridSpec g1{1, 1};
    Weight one(GridFunction::constant(g1, 1.0));
    const double chain_exact = exact_norm_22(generate_chain(g1, 1), one, one);
    const double closed_form = std::sqrt(1.0 + std::sqrt(2.0) / 2.0);
    bool ok = std::fabs(chain_exact - closed_form) <= 1e-9;

    double worst_gap = 0;
    for (int i = 0; i < 50; ++i) {
        const std::uint64_t seed = 3000 + std::uint64_t(i);
        GridSpec g{1, 4 + i % 3};  // L in 4..6
        Weight w = lognormal(g, seed), sigma = lognormal(g, seed + 50);
        auto s = generate_random(g, 0.4, seed);
        const double oracle = exact_norm_22(s, w, sigma);
        auto est = op_norm_lower(s, w, sigma, 2.0, 2.0);
        worst_gap = std::max(worst_gap, (oracle - est.value) / oracle);
        if (est.value > oracle + 1e-9) ok = false;
    }
    ok = ok && worst_gap <= 0.02;
    report(4, "exact oracle match", ok,
           "worst relative gap " + fmt(worst_gap) + ", chain defect " +
               fmt(std::fabs(chain_exact - closed_form)));
}

double sup_ratio_at(int L, double p, double r, std::uint64_t seed_base, int instances) {
    GridSpec g{1, L};
    BumpFunction eps(2.0), eta(7.0);
    OptimizerOptions opts;
    opts.restarts = 6;
    opts.iters = 200;
    double sup = 0;
    for (int i = 0; i < instances; ++i) {
        const std::uint64_t seed = seed_base + std::uint64_t(i);
        Weight w = lognormal(g, seed, 0.8), sigma = lognormal(g, seed + 400, 0.8);
        auto s = generate_random(g, 0.4, seed);
        auto tb = theorem_rhs(w, sigma, p, r, s, eps, eta);
        auto est = op_norm_lower(s, w, sigma, p, r, opts);
        sup = std::max(sup, est.value / (p > r ? *tb.B_p : *tb.B_r));
    }
    return sup;
}

void criterion_5() {
    const std::vector<double> ls{4, 6, 8};
    bool ok = true;
    std::string detail;
    for (auto [p, r] : {std::pair{3.0, 2.0}, std::pair{2.0, 2.0}}) {
        std::vector<double> logc;
        for (double L : ls)
            logc.push_back(std::log(sup_ratio_at(int(L), p, r, 5000, 80)));
        const double slope = fit_slope(ls, logc);
        if (std::fabs(slope) > 0.05) ok = false;
        detail += "p=" + fmt(p) + " slope " + fmt(slope) + "  ";
    }
    report(5, "end-to-end bound shape across L", ok, detail);
}

void criterion_6() {
    // the gate decides exactly by beta*gamma > 1
    bool gate_ok = true;
    for (double beta : {0.5, 1.0, 1.5, 2.0, 3.0, 4.0})
        for (double gamma : {1.0 / 3.0, 0.5, 1.0, 2.0})
            if (bump_integral_converges(beta, gamma) != (beta * gamma > 1.0)) gate_ok = false;

    // rejected bump raises the named hypothesis error
    GridSpec g1{1, 1};
    Weight one(GridFunction::constant(g1, 1.0));
    bool rejected = false;
    try {
        carleson_ratio(GridFunction::constant(g1, 1.0), one,
                       SparseCollection::create(g1, {DyadicCube{0, 0}}), 3.0,
                       BumpFunction(1.0));
    } catch (const grid_error& e) {
        rejected = std::string(e.what()).find("Carleson embedding hypothesis") !=
                   std::string::npos;
    }

    // accepted bump (beta = 4, p = 3): ensemble sup stable across L
    BumpFunction eps(4.0);
    std::vector<double> sups;
    for (int L : {6, 8, 10}) {
        GridSpec g{1, L};
        double sup = 0;
        for (int i = 0; i < 50; ++i) {
            const std::uint64_t seed = 8000 + std::uint64_t(i);
            Weight sigma = lognormal(g, seed);
            GridFunction f = lognormal(g, seed + 90).fn;
            auto s = generate_random(g, 0.4, seed);
            sup = std::max(sup, carleson_ratio(f, sigma, s, 3.0, eps));
        }
        sups.push_back(sup);
    }
    const bool stable = sups[1] / sups[0] <= 2.0 && sups[2] / sups[1] <= 2.0 &&
                        sups[0] / sups[1] <= 2.0 && sups[1] / sups[2] <= 2.0;
    report(6, "Carleson embedding gate and stability", gate_ok && rejected && stable,
           "sups " + fmt(sups[0]) + ", " + fmt(sups[1]) + ", " + fmt(sups[2]));
}

void criterion_7() {
    ExperimentConfig cfg;
    cfg.grid = {1, 12};
    cfg.sharpness = {-8, -1};
    Report rep = run_sharpness(cfg);
    const double slope = rep.summary[0].second;
    report(7, "sharpness probe slope", slope >= 0.5 && slope <= 1.05,
           "empirical sharpness slope " + fmt(slope));
}

void criterion_8() {
    // threshold fixed from the seeded calibration run of this same ensemble
    const double threshold = 2.70;
    GridSpec g{1, 8};
    double worst = 0;
    for (int i = 0; i < 200; ++i)
        worst = std::max(worst, sparse_dominate(gaussian(g, 9000 + std::uint64_t(i))).constant);
    report(8, "sparse domination constant", worst <= threshold,
           "observed " + fmt(worst) + ", committed threshold " + fmt(threshold));
}

void criterion_9() {
    GridSpec g{1, 5};
    Weight w = lognormal(g, 42), sigma = lognormal(g, 43);
    auto s = generate_random(g, 0.4, 44);
    BumpFunction eps(2.0), eta(7.0);
    const double c = 3.7;
    auto scale = [&](const Weight& u, double k) {
        std::vector<double> v = u.values();
        for (auto& x : v) x *= k;
        return Weight(GridFunction(g, std::move(v)));
    };

    const double base = exact_norm_22(s, w, sigma);
    const double d1 =
        std::fabs(exact_norm_22(s, scale(w, c), sigma) / (std::sqrt(c) * base) - 1.0);
    const double d2 =
        std::fabs(exact_norm_22(s, w, scale(sigma, c)) / (std::sqrt(c) * base) - 1.0);
    const double bp = *theorem_rhs(w, sigma, 3.0, 2.0, s, eps, eta).B_p;
    const double d3 = std::fabs(*theorem_rhs(scale(w, c), sigma, 3.0, 2.0, s, eps, eta).B_p /
                                    (std::pow(c, 1.0 / 3.0) * bp) -
                                1.0);
    const double ap = ap_constant(w, sigma, 3.0, s.cubes()).value;
    const double d4 =
        std::fabs(ap_constant(w, scale(sigma, c), 3.0, s.cubes()).value /
                      (std::pow(c, 2.0) * ap) -
                  1.0);
    const bool ok = d1 <= 1e-10 && d2 <= 1e-10 && d3 <= 1e-10 && d4 <= 1e-10;
    report(9, "scaling covariances", ok,
           "relative defects " + fmt(d1) + ", " + fmt(d2) + ", " + fmt(d3) + ", " + fmt(d4));
}

}  // namespace

int main() {
    criterion_1();
    criteria_2_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    if (failures) std::printf("%d criteria FAILED\n", failures);
    else std::printf("all criteria passed\n");
    return failures == 0 ? 0 : 1;
}
