#pragma once

// Finite dyadic grids over the root cube [0,1)^n: cubes, cell ranges,
// integrals, plain and weighted averages.  All data is piecewise constant
// on the finest cells; dyadic measures 2^{-nk} are exact in binary.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sqlab {

class grid_error : public std::runtime_error {
public:
    explicit grid_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dimension n and depth L of the finite dyadic tree.  Cell count 2^{nL}
/// is capped at 2^26 so everything stays desk-scale.
struct GridSpec {
    int n = 1;
    int L = 0;

    void validate() const {
        if (n < 1) throw grid_error("GridSpec: dimension must be >= 1");
        if (L < 0) throw grid_error("GridSpec: depth must be >= 0");
        if (n * L > 26) throw grid_error("GridSpec: n*L must be <= 26");
    }

    std::size_t cell_count() const { return std::size_t(1) << (n * L); }
    double cell_volume() const { return std::ldexp(1.0, -n * L); }

    friend bool operator==(const GridSpec& a, const GridSpec& b) {
        return a.n == b.n && a.L == b.L;
    }
    friend bool operator!=(const GridSpec& a, const GridSpec& b) { return !(a == b); }
};

/// A dyadic cube 2^{-k}([0,1)^n + i).  The index vector (i_1..i_n) is packed
/// into `flat` as n bit fields of width `level`, i_1 most significant; this
/// matches the lexicographic cell order of the file format.
struct DyadicCube {
    int level = 0;
    std::uint64_t flat = 0;

    std::uint64_t key() const { return (std::uint64_t(level) << 32) | flat; }

    friend bool operator==(const DyadicCube& a, const DyadicCube& b) {
        return a.level == b.level && a.flat == b.flat;
    }
    friend bool operator<(const DyadicCube& a, const DyadicCube& b) {
        return a.level != b.level ? a.level < b.level : a.flat < b.flat;
    }
};

inline std::vector<std::uint32_t> cube_coords(const DyadicCube& q, int n) {
    std::vector<std::uint32_t> out(static_cast<std::size_t>(n), 0u);
    const std::uint64_t mask = (q.level == 0) ? 0 : ((std::uint64_t(1) << q.level) - 1);
    for (int j = 0; j < n; ++j)
        out[std::size_t(j)] = std::uint32_t((q.flat >> (q.level * (n - 1 - j))) & mask);
    return out;
}

inline DyadicCube cube_from_coords(int level, const std::vector<std::uint32_t>& coords) {
    DyadicCube q;
    q.level = level;
    const int n = int(coords.size());
    for (int j = 0; j < n; ++j) {
        if (level < 32 && coords[std::size_t(j)] >= (std::uint32_t(1) << level))
            throw grid_error("DyadicCube: index out of range for level");
        q.flat = (q.flat << level) | coords[std::size_t(j)];
    }
    return q;
}

inline void check_cube(const GridSpec& g, const DyadicCube& q) {
    if (q.level < 0 || q.level > g.L)
        throw grid_error("DyadicCube: level outside [0,L]");
    if (q.flat >= (std::uint64_t(1) << (g.n * q.level)))
        throw grid_error("DyadicCube: index out of range");
}

inline double cube_measure(const GridSpec& g, const DyadicCube& q) {
    return std::ldexp(1.0, -g.n * q.level);
}

/// Ancestor at a coarser level (each coordinate shifted right).
inline DyadicCube ancestor(const DyadicCube& q, int n, int new_level) {
    if (new_level > q.level) throw grid_error("ancestor: new level deeper than cube");
    const int drop = q.level - new_level;
    DyadicCube a;
    a.level = new_level;
    const std::uint64_t mask =
        (new_level == 0) ? 0 : ((std::uint64_t(1) << new_level) - 1);
    for (int j = 0; j < n; ++j) {
        std::uint64_t c = (q.flat >> (q.level * (n - 1 - j)));
        if (q.level < 64) c &= (std::uint64_t(1) << q.level) - 1;
        a.flat |= ((c >> drop) & mask) << (new_level * (n - 1 - j));
    }
    return a;
}

/// Child of q selected by one bit per coordinate (bit for i_1 is the most
/// significant of `bits`).
inline DyadicCube child(const DyadicCube& q, int n, std::uint64_t bits) {
    DyadicCube c;
    c.level = q.level + 1;
    const std::uint64_t mask =
        (q.level == 0) ? 0 : ((std::uint64_t(1) << q.level) - 1);
    for (int j = 0; j < n; ++j) {
        std::uint64_t coord = (q.flat >> (q.level * (n - 1 - j))) & mask;
        std::uint64_t bit = (bits >> (n - 1 - j)) & 1;
        c.flat |= ((coord << 1) | bit) << (c.level * (n - 1 - j));
    }
    return c;
}

inline bool contains(const DyadicCube& outer, const DyadicCube& inner, int n) {
    if (inner.level < outer.level) return false;
    return ancestor(inner, n, outer.level) == outer;
}

/// Visit the finest-cell indices of a cube in lexicographic order.
template <class F>
void for_each_cell(const GridSpec& g, const DyadicCube& q, F&& fn) {
    check_cube(g, q);
    const int s = g.L - q.level;
    const auto coords = cube_coords(q, g.n);
    std::vector<std::uint64_t> lo(std::size_t(g.n)), cur(std::size_t(g.n));
    for (int j = 0; j < g.n; ++j) {
        lo[std::size_t(j)] = std::uint64_t(coords[std::size_t(j)]) << s;
        cur[std::size_t(j)] = lo[std::size_t(j)];
    }
    const std::uint64_t span = std::uint64_t(1) << s;
    for (;;) {
        std::uint64_t cell = 0;
        for (int j = 0; j < g.n; ++j) cell = (cell << g.L) | cur[std::size_t(j)];
        fn(cell);
        int j = g.n - 1;
        for (; j >= 0; --j) {
            if (++cur[std::size_t(j)] < lo[std::size_t(j)] + span) break;
            cur[std::size_t(j)] = lo[std::size_t(j)];
        }
        if (j < 0) break;
    }
}

inline std::vector<std::uint64_t> cells(const GridSpec& g, const DyadicCube& q) {
    check_cube(g, q);
    std::vector<std::uint64_t> out;
    out.reserve(std::size_t(1) << (g.n * (g.L - q.level)));
    for_each_cell(g, q, [&](std::uint64_t c) { out.push_back(c); });
    return out;
}

/// All dyadic subcubes of the root, ordered by (level, index).
inline std::vector<DyadicCube> all_cubes(const GridSpec& g) {
    std::vector<DyadicCube> out;
    for (int k = 0; k <= g.L; ++k)
        for (std::uint64_t f = 0; f < (std::uint64_t(1) << (g.n * k)); ++f)
            out.push_back(DyadicCube{k, f});
    return out;
}

/// Piecewise-constant real data on the finest cells, lexicographic order.
struct GridFunction {
    GridSpec spec;
    std::vector<double> values;

    GridFunction() = default;
    GridFunction(GridSpec s, std::vector<double> v) : spec(s), values(std::move(v)) {
        spec.validate();
        if (values.size() != spec.cell_count())
            throw grid_error("GridFunction: entry count != 2^{nL}");
        for (double x : values)
            if (!std::isfinite(x)) throw grid_error("GridFunction: non-finite entry");
    }

    static GridFunction constant(GridSpec s, double c) {
        s.validate();
        return GridFunction(s, std::vector<double>(s.cell_count(), c));
    }
};

/// A nonnegative GridFunction with at least one positive entry.
struct Weight {
    GridFunction fn;

    Weight() = default;
    explicit Weight(GridFunction f) : fn(std::move(f)) {
        bool positive = false;
        for (double x : fn.values) {
            if (x < 0) throw grid_error("Weight: negative entry");
            if (x > 0) positive = true;
        }
        if (!positive) throw grid_error("Weight: identically zero");
    }

    const GridSpec& spec() const { return fn.spec; }
    const std::vector<double>& values() const { return fn.values; }
};

inline void check_same_grid(const GridSpec& a, const GridSpec& b) {
    if (a != b) throw grid_error("grid mismatch");
}

/// integral(f, Q) = 2^{-nL} sum of f over cells(Q).
inline double integral(const GridFunction& f, const DyadicCube& q) {
    double s = 0;
    for_each_cell(f.spec, q, [&](std::uint64_t c) { s += f.values[c]; });
    return std::ldexp(s, -f.spec.n * f.spec.L);
}

/// <f>_Q, the plain average.
inline double avg(const GridFunction& f, const DyadicCube& q) {
    double s = 0;
    for_each_cell(f.spec, q, [&](std::uint64_t c) { s += f.values[c]; });
    return std::ldexp(s, -f.spec.n * (f.spec.L - q.level));
}

/// <f>_Q^sigma = integral(f sigma, Q) / sigma(Q), with the degenerate
/// convention sigma(Q) = 0 => 0.
inline double wavg(const GridFunction& f, const Weight& sigma, const DyadicCube& q) {
    check_same_grid(f.spec, sigma.spec());
    double num = 0, den = 0;
    for_each_cell(f.spec, q, [&](std::uint64_t c) {
        num += f.values[c] * sigma.values()[c];
        den += sigma.values()[c];
    });
    if (den == 0) return 0.0;
    return num / den;
}

/// Per-level cube sums of a GridFunction, built in one bottom-up pass.
/// sum(Q) is the raw sum of finest-cell values inside Q.
class SumTree {
public:
    explicit SumTree(const GridFunction& f) : spec_(f.spec) {
        levels_.resize(std::size_t(spec_.L) + 1);
        levels_[std::size_t(spec_.L)] = f.values;
        for (int k = spec_.L - 1; k >= 0; --k) {
            auto& coarse = levels_[std::size_t(k)];
            const auto& fine = levels_[std::size_t(k) + 1];
            coarse.assign(std::size_t(1) << (spec_.n * k), 0.0);
            for (std::uint64_t f2 = 0; f2 < fine.size(); ++f2) {
                DyadicCube child{k + 1, f2};
                coarse[ancestor(child, spec_.n, k).flat] += fine[f2];
            }
        }
    }

    const GridSpec& spec() const { return spec_; }

    double sum(const DyadicCube& q) const { return levels_[std::size_t(q.level)][q.flat]; }
    double integral(const DyadicCube& q) const {
        return std::ldexp(sum(q), -spec_.n * spec_.L);
    }
    double avg(const DyadicCube& q) const {
        return std::ldexp(sum(q), -spec_.n * (spec_.L - q.level));
    }

private:
    GridSpec spec_;
    std::vector<std::vector<double>> levels_;
};

}  // namespace sqlab
