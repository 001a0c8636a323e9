#pragma once

// Principal (stopping) cubes, parallel corona projections, the I/II
// decomposition of the bilinear form, and the slicing partitions used by
// the pigeon-hole arguments.

#include <cmath>
#include <map>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sqlab/constants.hpp"
#include "sqlab/grid.hpp"
#include "sqlab/sparse.hpp"

namespace sqlab {

/// Principal cubes for a pair (f, sigma) over a sparse collection:
/// generation 0 is the S-maximal cubes; each next generation consists of
/// the maximal S-cubes where the sigma-average of f more than doubles.
struct PrincipalCubes {
    std::vector<std::vector<DyadicCube>> generations;
    std::vector<DyadicCube> all;  // sorted by (level, index)
    std::unordered_set<std::uint64_t> keys;

    bool contains_cube(const DyadicCube& q) const { return keys.count(q.key()) != 0; }
};

namespace detail {

/// S-containment forest: children lists keyed by the nearest strict
/// S-ancestor; roots are the S-maximal cubes.
struct SparseForest {
    std::vector<DyadicCube> roots;
    std::unordered_map<std::uint64_t, std::vector<DyadicCube>> children;

    explicit SparseForest(const SparseCollection& s) {
        for (const auto& q : s.cubes()) {
            if (auto p = s.nearest_ancestor(q))
                children[p->key()].push_back(q);
            else
                roots.push_back(q);
        }
    }
};

/// sigma-weighted averages of f on every S-cube; 0 where sigma(Q) = 0.
inline std::unordered_map<std::uint64_t, double> wavgs_on(
    const SparseCollection& s, const GridFunction& f, const Weight& sigma) {
    std::vector<double> prod(f.values.size());
    for (std::size_t i = 0; i < prod.size(); ++i)
        prod[i] = f.values[i] * sigma.values()[i];
    SumTree num(GridFunction(f.spec, std::move(prod)));
    SumTree den(sigma.fn);
    std::unordered_map<std::uint64_t, double> out;
    for (const auto& q : s.cubes()) {
        const double d = den.sum(q);
        out[q.key()] = d > 0 ? num.sum(q) / d : 0.0;
    }
    return out;
}

}  // namespace detail

inline PrincipalCubes principal_cubes(const GridFunction& f, const Weight& sigma,
                                      const SparseCollection& s,
                                      double stopping_factor = 2.0) {
    check_same_grid(f.spec, sigma.spec());
    check_same_grid(f.spec, s.spec());
    for (double x : f.values)
        if (x < 0) throw grid_error("principal_cubes: f must be nonnegative");

    const auto wa = detail::wavgs_on(s, f, sigma);
    detail::SparseForest forest(s);

    PrincipalCubes pc;
    pc.generations.push_back(forest.roots);
    for (std::size_t gen = 0; gen < pc.generations.size(); ++gen) {
        std::vector<DyadicCube> next;
        for (const auto& F : pc.generations[gen]) {
            const double threshold = stopping_factor * wa.at(F.key());
            // maximal S-descendants of F whose weighted average exceeds the
            // threshold; descendants of a selected cube are left for its own
            // recursion step
            std::vector<DyadicCube> scan;
            auto it = forest.children.find(F.key());
            if (it != forest.children.end()) scan = it->second;
            while (!scan.empty()) {
                DyadicCube q = scan.back();
                scan.pop_back();
                if (wa.at(q.key()) > threshold) {
                    next.push_back(q);
                } else {
                    auto jt = forest.children.find(q.key());
                    if (jt != forest.children.end())
                        scan.insert(scan.end(), jt->second.begin(), jt->second.end());
                }
            }
        }
        if (!next.empty()) {
            std::sort(next.begin(), next.end());
            pc.generations.push_back(std::move(next));
        }
    }
    for (const auto& gen : pc.generations)
        for (const auto& F : gen) {
            pc.all.push_back(F);
            pc.keys.insert(F.key());
        }
    std::sort(pc.all.begin(), pc.all.end());
    return pc;
}

/// The parallel corona: joint projection pi(Q) = (pi_F(Q), pi_G(Q)) and its
/// fibers, which partition S.
struct Corona {
    PrincipalCubes f_cubes;  // principal cubes for (f, sigma)
    PrincipalCubes g_cubes;  // principal cubes for (g, w)
    std::unordered_map<std::uint64_t, DyadicCube> pi_f;  // Q key -> F
    std::unordered_map<std::uint64_t, DyadicCube> pi_g;  // Q key -> G
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::vector<DyadicCube>> fibers;
};

/// Minimal member of `pc` containing q (q itself counts).
inline DyadicCube project(const PrincipalCubes& pc, const DyadicCube& q, int n) {
    for (int k = q.level; k >= 0; --k) {
        DyadicCube a = ancestor(q, n, k);
        if (pc.contains_cube(a)) return a;
    }
    throw grid_error("project: cube outside every principal cube");
}

inline Corona parallel_projection(const SparseCollection& s, PrincipalCubes f_cubes,
                                  PrincipalCubes g_cubes) {
    Corona c;
    c.f_cubes = std::move(f_cubes);
    c.g_cubes = std::move(g_cubes);
    for (const auto& q : s.cubes()) {
        DyadicCube F = project(c.f_cubes, q, s.spec().n);
        DyadicCube G = project(c.g_cubes, q, s.spec().n);
        c.pi_f.emplace(q.key(), F);
        c.pi_g.emplace(q.key(), G);
        c.fibers[{F.key(), G.key()}].push_back(q);
    }
    return c;
}

/// sum_F (<f>_F^sigma)^p sigma(F) / ||f||_{L^p(sigma)}^p.
inline double quasi_orthogonality_ratio(const GridFunction& f, const Weight& sigma,
                                        const PrincipalCubes& pc, double p) {
    check_same_grid(f.spec, sigma.spec());
    if (!(p > 1)) throw grid_error("quasi_orthogonality_ratio: p must be > 1");
    const double vol = f.spec.cell_volume();
    double norm_p = 0;
    bool nonzero = false;
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        if (f.values[i] < 0)
            throw grid_error("quasi_orthogonality_ratio: f must be nonnegative");
        if (f.values[i] * sigma.values()[i] > 0) nonzero = true;
        norm_p += std::pow(f.values[i], p) * sigma.values()[i] * vol;
    }
    if (!nonzero) throw grid_error("quasi_orthogonality_ratio: f vanishes sigma-a.e.");

    std::vector<double> prod(f.values.size());
    for (std::size_t i = 0; i < prod.size(); ++i)
        prod[i] = f.values[i] * sigma.values()[i];
    SumTree num(GridFunction(f.spec, std::move(prod)));
    SumTree den(sigma.fn);
    double lhs = 0;
    for (const auto& F : pc.all) {
        const double d = den.sum(F);
        if (d <= 0) continue;
        lhs += std::pow(num.sum(F) / d, p) * den.integral(F);
    }
    return lhs / norm_p;
}

/// <(A_S^r f sigma)^r, g w> = sum_{Q in S} <f sigma>_Q^r int_Q g w.
inline double bilinear_form(const SparseCollection& s, const GridFunction& f,
                            const GridFunction& g, const Weight& sigma, const Weight& w,
                            double r) {
    const GridSpec& spec = s.spec();
    check_same_grid(spec, f.spec);
    check_same_grid(spec, g.spec);
    check_same_grid(spec, sigma.spec());
    check_same_grid(spec, w.spec());
    for (double x : f.values)
        if (x < 0) throw grid_error("bilinear_form: f must be nonnegative");
    for (double x : g.values)
        if (x < 0) throw grid_error("bilinear_form: g must be nonnegative");

    std::vector<double> fs(f.values.size()), gw(g.values.size());
    for (std::size_t i = 0; i < fs.size(); ++i) {
        fs[i] = f.values[i] * sigma.values()[i];
        gw[i] = g.values[i] * w.values()[i];
    }
    SumTree fst(GridFunction(spec, std::move(fs)));
    SumTree gwt(GridFunction(spec, std::move(gw)));
    double acc = 0;
    for (const auto& q : s.cubes())
        acc += std::pow(fst.avg(q), r) * gwt.integral(q);
    return acc;
}

/// The two halves of the corona decomposition of the bilinear form.
/// I collects fibers with pi_F(G) = F, II those with pi_G(F) = G; together
/// they bound the bilinear form by 2^{r+1} (I + II).
inline std::pair<double, double> corona_I_II(const SparseCollection& s,
                                             const GridFunction& f, const GridFunction& g,
                                             const Weight& sigma, const Weight& w, double r,
                                             const Corona& corona) {
    const GridSpec& spec = s.spec();
    const auto wa_f = detail::wavgs_on(s, f, sigma);
    const auto wa_g = detail::wavgs_on(s, g, w);
    SumTree sigt(sigma.fn);
    SumTree wt(w.fn);

    double I = 0, II = 0;
    for (const auto& [fg, qs] : corona.fibers) {
        const auto [fkey, gkey] = fg;
        double fiber_sum = 0;
        for (const auto& q : qs)
            fiber_sum += std::pow(sigt.avg(q), r) * wt.integral(q);
        if (!corona.f_cubes.keys.count(fkey) || !corona.g_cubes.keys.count(gkey))
            throw grid_error("corona_I_II: corona/S mismatch");
        DyadicCube F{int(fkey >> 32), fkey & 0xffffffffu};
        DyadicCube G{int(gkey >> 32), gkey & 0xffffffffu};
        const double term =
            std::pow(wa_f.at(fkey), r) * wa_g.at(gkey) * fiber_sum;
        // containment dichotomy: at least one of the two projections matches
        bool in_I = project(corona.f_cubes, G, spec.n) == F;
        bool in_II = project(corona.g_cubes, F, spec.n) == G;
        if (!in_I && !in_II)
            throw grid_error("corona_I_II: fiber violates containment dichotomy");
        if (in_I) I += term;
        if (in_II) II += term;
    }
    return {I, II};
}

/// Integer a with 2^{a-1} < v <= 2^a; values within 1e-12 relative of a
/// power of two snap to that power so the half-open convention is stable.
inline int log2_bucket_ceil(double v) {
    if (!(v > 0)) throw grid_error("log2_bucket_ceil: v must be > 0");
    const int m = int(std::lround(std::log2(v)));
    if (std::fabs(v - std::ldexp(1.0, m)) <= 1e-12 * std::ldexp(1.0, m)) return m;
    int a = int(std::ceil(std::log2(v)));
    while (v > std::ldexp(1.0, a)) ++a;
    while (v <= std::ldexp(1.0, a - 1)) --a;
    return a;
}

/// Integer b with 2^b <= v < 2^{b+1}, with the same snapping rule.
inline int log2_bucket_floor(double v) {
    if (!(v > 0)) throw grid_error("log2_bucket_floor: v must be > 0");
    const int m = int(std::lround(std::log2(v)));
    if (std::fabs(v - std::ldexp(1.0, m)) <= 1e-12 * std::ldexp(1.0, m)) return m;
    int b = int(std::floor(std::log2(v)));
    while (v < std::ldexp(1.0, b)) --b;
    while (v >= std::ldexp(1.0, b + 1)) ++b;
    return b;
}

struct SliceFamily {
    enum class Kind { ApBucket, Entropy, EntropyPrime };
    Kind kind = Kind::ApBucket;
    int a = 0;
    int b = 0;  // unused for ApBucket
    std::vector<DyadicCube> members;
};

/// Buckets of S by the A_p product: 2^{a-1} < <sigma>_Q^{p-1} <w>_Q <= 2^a.
/// Cubes with a vanishing product are skipped.
inline std::vector<SliceFamily> slice_ap(const SparseCollection& s, const Weight& w,
                                         const Weight& sigma, double p) {
    if (!(p > 1)) throw grid_error("slice_ap: p must be > 1");
    SumTree wt(w.fn), st(sigma.fn);
    std::map<int, std::vector<DyadicCube>> buckets;
    for (const auto& q : s.cubes()) {
        const double v = std::pow(st.avg(q), p - 1.0) * wt.avg(q);
        if (v <= 0) continue;
        buckets[log2_bucket_ceil(v)].push_back(q);
    }
    std::vector<SliceFamily> out;
    for (auto& [a, members] : buckets)
        out.push_back(SliceFamily{SliceFamily::Kind::ApBucket, a, 0, std::move(members)});
    return out;
}

/// The entropy slicing: S_{a,b} when rho_sigma^{1/p} >= rho_w^{1/r-1/p}
/// (a-bucket of <w>^{1/p} <sigma>^{1/p'} rho_{sigma,eps}^{1/p}, b-bucket of
/// rho_sigma), and the mirrored S'_{a,b} with eta and rho_w otherwise.
/// Every positive-mass cube lands in exactly one family, with b >= 0.
inline std::vector<SliceFamily> slice_entropy(const SparseCollection& s, const Weight& w,
                                              const Weight& sigma, double p, double r,
                                              const BumpFunction& eps,
                                              const BumpFunction& eta) {
    if (!(p > r)) throw grid_error("slice_entropy: requires p > r");
    ExponentSet ex(p, r);
    SumTree wt(w.fn), st(sigma.fn);
    std::map<std::pair<int, int>, std::vector<DyadicCube>> plain, primed;
    for (const auto& q : s.cubes()) {
        const double aw = wt.avg(q), as = st.avg(q);
        if (aw <= 0 || as <= 0) continue;
        const double rho_s = rho(st, q), rho_w = rho(wt, q);
        const double base = std::pow(aw, 1.0 / p) * std::pow(as, 1.0 / ex.pprime());
        if (std::pow(rho_s, 1.0 / p) >= std::pow(rho_w, 1.0 / r - 1.0 / p)) {
            const double v = base * std::pow(rho_s * eps(rho_s), 1.0 / p);
            plain[{log2_bucket_floor(v), std::max(0, log2_bucket_floor(rho_s))}].push_back(q);
        } else {
            const double v = base * std::pow(rho_w * eta(rho_w), 1.0 / r - 1.0 / p);
            primed[{log2_bucket_floor(v), std::max(0, log2_bucket_floor(rho_w))}].push_back(q);
        }
    }
    std::vector<SliceFamily> out;
    for (auto& [ab, members] : plain)
        out.push_back(
            SliceFamily{SliceFamily::Kind::Entropy, ab.first, ab.second, std::move(members)});
    for (auto& [ab, members] : primed)
        out.push_back(SliceFamily{SliceFamily::Kind::EntropyPrime, ab.first, ab.second,
                                  std::move(members)});
    return out;
}

}  // namespace sqlab
