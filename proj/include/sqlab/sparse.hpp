#pragma once

// Sparse collections of dyadic cubes: the 1/2-sparsity certificate,
// exceptional sets, generators (chain / random / stopping), the sparse
// operators A_S^r, the dyadic martingale square function, and the empirical
// single-grid sparse domination check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sqlab/grid.hpp"

namespace sqlab {

struct SparsityCheck {
    bool sparse = true;
    double worst_ratio = 0.0;
    DyadicCube worst_cube;
};

namespace detail {

inline std::vector<DyadicCube> sorted_unique(std::vector<DyadicCube> cubes) {
    std::sort(cubes.begin(), cubes.end());
    cubes.erase(std::unique(cubes.begin(), cubes.end()), cubes.end());
    return cubes;
}

}  // namespace detail

/// Maximal cubes of `keys` strictly inside q: members of the set contained
/// in q with no set member strictly between them and q.  They are pairwise
/// disjoint, so their measures sum to the measure of the full union.
inline std::vector<DyadicCube> maximal_strict_subcubes(
    const GridSpec& g, const DyadicCube& q,
    const std::vector<DyadicCube>& cubes,
    const std::unordered_set<std::uint64_t>& keys) {
    std::vector<DyadicCube> out;
    for (const auto& c : cubes) {
        if (c.level <= q.level || !contains(q, c, g.n)) continue;
        bool maximal = true;
        for (int k = c.level - 1; k > q.level; --k) {
            if (keys.count(ancestor(c, g.n, k).key())) {
                maximal = false;
                break;
            }
        }
        if (maximal) out.push_back(c);
    }
    return out;
}

/// Sparsity certificate: per cube, the fraction of Q covered by strictly
/// smaller cubes of the collection must be <= 1/2.
inline SparsityCheck is_sparse(const GridSpec& g, const std::vector<DyadicCube>& raw) {
    auto cubes = detail::sorted_unique(raw);
    std::unordered_set<std::uint64_t> keys;
    for (const auto& c : cubes) {
        check_cube(g, c);
        keys.insert(c.key());
    }
    SparsityCheck res;
    for (const auto& q : cubes) {
        double covered = 0;
        for (const auto& m : maximal_strict_subcubes(g, q, cubes, keys))
            covered += cube_measure(g, m);
        const double ratio = covered / cube_measure(g, q);
        if (ratio > res.worst_ratio) {
            res.worst_ratio = ratio;
            res.worst_cube = q;
        }
    }
    res.sparse = res.worst_ratio <= 0.5 + 1e-12;
    return res;
}

/// A verified 1/2-sparse collection of dyadic cubes within the root.
class SparseCollection {
public:
    SparseCollection() = default;

    static SparseCollection create(const GridSpec& g, std::vector<DyadicCube> cubes) {
        auto check = is_sparse(g, cubes);
        if (!check.sparse)
            throw grid_error("SparseCollection: collection is not 1/2-sparse");
        SparseCollection s;
        s.spec_ = g;
        s.cubes_ = detail::sorted_unique(std::move(cubes));
        for (const auto& c : s.cubes_) s.keys_.insert(c.key());
        return s;
    }

    const GridSpec& spec() const { return spec_; }
    const std::vector<DyadicCube>& cubes() const { return cubes_; }
    bool contains_cube(const DyadicCube& q) const { return keys_.count(q.key()) != 0; }
    const std::unordered_set<std::uint64_t>& keys() const { return keys_; }
    std::size_t size() const { return cubes_.size(); }

    /// Nearest strict ancestor of q inside the collection, if any.
    std::optional<DyadicCube> nearest_ancestor(const DyadicCube& q) const {
        for (int k = q.level - 1; k >= 0; --k) {
            DyadicCube a = ancestor(q, spec_.n, k);
            if (keys_.count(a.key())) return a;
        }
        return std::nullopt;
    }

    /// Maximal cubes of the collection (no strict ancestor in it).
    std::vector<DyadicCube> maximal_cubes() const {
        std::vector<DyadicCube> out;
        for (const auto& c : cubes_)
            if (!nearest_ancestor(c)) out.push_back(c);
        return out;
    }

private:
    GridSpec spec_;
    std::vector<DyadicCube> cubes_;
    std::unordered_set<std::uint64_t> keys_;
};

/// E(Q) = Q minus the union of maximal S-cubes strictly inside Q.
/// |E(Q)| >= |Q|/2 by sparsity, and the E(Q) are pairwise disjoint.
struct ExceptionalSets {
    GridSpec spec;
    std::map<std::uint64_t, std::vector<std::uint64_t>> cells_of;  // cube key -> cells

    double measure(const DyadicCube& q) const {
        auto it = cells_of.find(q.key());
        if (it == cells_of.end()) throw grid_error("ExceptionalSets: unknown cube");
        return std::ldexp(double(it->second.size()), -spec.n * spec.L);
    }
};

inline ExceptionalSets exceptional_sets(const SparseCollection& s) {
    const GridSpec& g = s.spec();
    ExceptionalSets es;
    es.spec = g;
    for (const auto& q : s.cubes()) {
        std::unordered_set<std::uint64_t> removed;
        for (const auto& m : maximal_strict_subcubes(g, q, s.cubes(), s.keys()))
            for_each_cell(g, m, [&](std::uint64_t c) { removed.insert(c); });
        std::vector<std::uint64_t> kept;
        for_each_cell(g, q, [&](std::uint64_t c) {
            if (!removed.count(c)) kept.push_back(c);
        });
        es.cells_of.emplace(q.key(), std::move(kept));
    }
    return es;
}

/// Nested left-halves [0,2^{-j})^... down to depth d; every cover ratio is
/// exactly 1/2.
inline SparseCollection generate_chain(const GridSpec& g, int depth) {
    if (depth > g.L) throw grid_error("generate_chain: depth exceeds grid depth");
    std::vector<DyadicCube> cubes;
    for (int k = 0; k <= depth; ++k) cubes.push_back(DyadicCube{k, 0});
    return SparseCollection::create(g, std::move(cubes));
}

/// Top-down level sweep, lexicographic within a level; each cube is drawn
/// with probability q and rejected if it would push its nearest already
/// accepted ancestor past the 1/2 cover budget.  A seed fully determines
/// the collection.  Falls back to {root} when the sweep accepts nothing.
inline SparseCollection generate_random(const GridSpec& g, double q, std::uint64_t seed) {
    if (!(q >= 0.0 && q <= 1.0)) throw grid_error("generate_random: q outside [0,1]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<DyadicCube> accepted;
    std::unordered_set<std::uint64_t> keys;
    std::unordered_map<std::uint64_t, double> covered;  // accepted cube -> union measure
    for (int k = 0; k <= g.L; ++k) {
        for (std::uint64_t f = 0; f < (std::uint64_t(1) << (g.n * k)); ++f) {
            DyadicCube c{k, f};
            if (unif(rng) >= q) continue;
            // nearest accepted strict ancestor pays for c
            std::optional<DyadicCube> parent;
            for (int kk = k - 1; kk >= 0; --kk) {
                DyadicCube a = ancestor(c, g.n, kk);
                if (keys.count(a.key())) {
                    parent = a;
                    break;
                }
            }
            if (parent) {
                const double budget = 0.5 * cube_measure(g, *parent);
                double& cov = covered[parent->key()];
                // dyadic measures are exact in binary, so this is exact
                if (cov + cube_measure(g, c) > budget) continue;
                cov += cube_measure(g, c);
            }
            accepted.push_back(c);
            keys.insert(c.key());
        }
    }
    if (accepted.empty()) accepted.push_back(DyadicCube{0, 0});
    return SparseCollection::create(g, std::move(accepted));
}

/// Calderon-Zygmund stopping cubes of |f|: starting from the root, take
/// the maximal dyadic subcubes where the average of |f| more than
/// `factor`-folds, and recurse.  Sparse by the Chebyshev budget when
/// factor >= 2.
inline SparseCollection generate_stopping(const GridFunction& f, double factor = 2.0) {
    const GridSpec& g = f.spec;
    std::vector<double> absf(f.values.size());
    bool nonzero = false;
    for (std::size_t i = 0; i < absf.size(); ++i) {
        absf[i] = std::fabs(f.values[i]);
        if (absf[i] > 0) nonzero = true;
    }
    if (!nonzero) throw grid_error("generate_stopping: f identically 0");
    SumTree tree(GridFunction(g, std::move(absf)));

    std::vector<DyadicCube> out;
    std::vector<DyadicCube> work{DyadicCube{0, 0}};
    while (!work.empty()) {
        DyadicCube q = work.back();
        work.pop_back();
        out.push_back(q);
        const double threshold = factor * tree.avg(q);
        // maximal subcubes whose average strictly exceeds the threshold
        std::vector<DyadicCube> scan{q};
        while (!scan.empty()) {
            DyadicCube c = scan.back();
            scan.pop_back();
            if (c.level == g.L) continue;
            for (std::uint64_t bits = 0; bits < (std::uint64_t(1) << g.n); ++bits) {
                DyadicCube ch = child(c, g.n, bits);
                if (tree.avg(ch) > threshold)
                    work.push_back(ch);
                else
                    scan.push_back(ch);
            }
        }
    }
    return SparseCollection::create(g, std::move(out));
}

/// A_S^r applied to f sigma: per cell, (sum over S-cubes containing the
/// cell of <f sigma>_Q^r)^{1/r}.  Rejects signed f; norms of A_S^r are
/// attained on nonnegative inputs, so callers pass |f|.
inline GridFunction apply(const SparseCollection& s, const GridFunction& f,
                          const Weight& sigma, double r) {
    const GridSpec& g = s.spec();
    check_same_grid(g, f.spec);
    check_same_grid(g, sigma.spec());
    if (!(r >= 1)) throw grid_error("apply: r must be >= 1");
    for (double x : f.values)
        if (x < 0) throw grid_error("apply: f must be nonnegative");

    std::vector<double> prod(f.values.size());
    for (std::size_t i = 0; i < prod.size(); ++i)
        prod[i] = f.values[i] * sigma.values()[i];
    SumTree tree(GridFunction(g, std::move(prod)));

    std::vector<double> out(g.cell_count(), 0.0);
    for (std::uint64_t cell = 0; cell < g.cell_count(); ++cell) {
        DyadicCube leaf{g.L, cell};
        double acc = 0;
        for (int k = g.L; k >= 0; --k) {
            DyadicCube a = ancestor(leaf, g.n, k);
            if (s.contains_cube(a)) acc += std::pow(tree.avg(a), r);
        }
        out[cell] = std::pow(acc, 1.0 / r);
    }
    return GridFunction(g, std::move(out));
}

/// Dyadic martingale square function: S_d f = (sum_k (E_k f - E_{k-1} f)^2)^{1/2}
/// with E_k the level-k conditional expectation.
inline GridFunction dyadic_square_function(const GridFunction& f) {
    const GridSpec& g = f.spec;
    SumTree tree(f);
    std::vector<double> out(g.cell_count(), 0.0);
    for (std::uint64_t cell = 0; cell < g.cell_count(); ++cell) {
        DyadicCube leaf{g.L, cell};
        double acc = 0;
        double prev = tree.avg(ancestor(leaf, g.n, 0));
        for (int k = 1; k <= g.L; ++k) {
            const double cur = tree.avg(ancestor(leaf, g.n, k));
            acc += (cur - prev) * (cur - prev);
            prev = cur;
        }
        out[cell] = std::sqrt(acc);
    }
    return GridFunction(g, std::move(out));
}

struct DominationResult {
    SparseCollection collection;
    double constant = 0.0;  // max over cells of S_d f / A_S^2(|f|), 0/0 := 0
};

/// Empirical single-grid analogue of the pointwise sparse domination of the
/// square function: S from the stopping-cube construction on |f|, and the
/// measured constant c with S_d f <= c * A_S^2(|f|) pointwise.
inline DominationResult sparse_dominate(const GridFunction& f) {
    const GridSpec& g = f.spec;
    std::vector<double> absf(f.values.size());
    for (std::size_t i = 0; i < absf.size(); ++i) absf[i] = std::fabs(f.values[i]);
    GridFunction af(g, std::move(absf));

    DominationResult res;
    res.collection = generate_stopping(af);
    GridFunction sd = dyadic_square_function(f);
    GridFunction as = apply(res.collection, af, Weight(GridFunction::constant(g, 1.0)), 2.0);
    for (std::uint64_t cell = 0; cell < g.cell_count(); ++cell) {
        const double num = sd.values[cell], den = as.values[cell];
        if (num == 0) continue;
        if (den == 0) throw grid_error("sparse_dominate: A_S vanished where S_d did not");
        res.constant = std::max(res.constant, num / den);
    }
    return res;
}

}  // namespace sqlab
