#pragma once

// Weight characteristics over a specifiable cube family: the dyadic local
// maximal function, the joint Muckenhoupt A_p quantity, the Fujii-Wilson
// A_infty quantity, the local A_infty ratio rho and its bumped variant, and
// the entropy bump constants (multiplicative and separated).
//
// The maximal function here is the dyadic local one; on dyadic data it is
// comparable to the uncentered maximal function with a dimensional
// constant, and every verification in this project is internally
// consistent with the dyadic choice.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sqlab/grid.hpp"

namespace sqlab {

/// Log-power bump eps(t) = (1 + ln t)^beta for t >= 1; eps(1) = 1 and the
/// family is monotone increasing, so integral conditions decide in closed
/// form (see bump_integral_converges).
struct BumpFunction {
    double beta = 1.0;

    explicit BumpFunction(double b) : beta(b) {
        if (!(b >= 0)) throw grid_error("BumpFunction: exponent must be >= 0");
    }
    double operator()(double t) const {
        if (t < 1.0) throw grid_error("BumpFunction: defined on [1,inf)");
        return std::pow(1.0 + std::log(t), beta);
    }
};

/// Exponent bookkeeping: p > 1, r >= 1, q = (p/r)' when p > r.
struct ExponentSet {
    double p;
    double r;

    ExponentSet(double p_, double r_) : p(p_), r(r_) {
        if (!(p > 1)) throw grid_error("ExponentSet: p must be > 1");
        if (!(r >= 1)) throw grid_error("ExponentSet: r must be >= 1");
    }
    double pprime() const { return p / (p - 1); }
    double q() const {
        if (!(p > r)) throw grid_error("ExponentSet: q defined only for p > r");
        return p / (p - r);
    }
};

/// true iff int_1^inf dt / (t (1+ln t)^{beta*gamma}) < inf, i.e. beta*gamma > 1.
inline bool bump_integral_converges(double beta, double gamma) {
    if (!(beta > 0) || !(gamma > 0))
        throw grid_error("bump_integral_converges: beta, gamma must be > 0");
    return beta * gamma > 1.0;
}

/// Dyadic local maximal function of sigma relative to Q:
/// per cell c in Q, max over dyadic Q' with c in Q' in Q of <sigma>_{Q'}.
/// One top-down sweep.  Cells outside Q are set to 0.
inline GridFunction dyadic_maximal(const SumTree& sigma, const DyadicCube& q) {
    const GridSpec& g = sigma.spec();
    check_cube(g, q);
    std::vector<double> out(g.cell_count(), 0.0);
    // stack of (cube, running max of ancestor averages within Q)
    std::vector<std::pair<DyadicCube, double>> stack;
    stack.emplace_back(q, sigma.avg(q));
    while (!stack.empty()) {
        auto [cube, m] = stack.back();
        stack.pop_back();
        if (cube.level == g.L) {
            out[cube.flat] = m;
            continue;
        }
        for (std::uint64_t bits = 0; bits < (std::uint64_t(1) << g.n); ++bits) {
            DyadicCube c = child(cube, g.n, bits);
            stack.emplace_back(c, std::max(m, sigma.avg(c)));
        }
    }
    return GridFunction(g, std::move(out));
}

inline GridFunction dyadic_maximal(const Weight& sigma, const DyadicCube& q) {
    return dyadic_maximal(SumTree(sigma.fn), q);
}

/// rho_sigma(Q) = int_Q M(sigma 1_Q) / sigma(Q), always >= 1 when sigma(Q) > 0.
inline double rho(const SumTree& sigma, const DyadicCube& q) {
    const GridSpec& g = sigma.spec();
    if (sigma.sum(q) <= 0) throw grid_error("rho: sigma(Q) = 0");
    double acc = 0;
    std::vector<std::pair<DyadicCube, double>> stack;
    stack.emplace_back(q, sigma.avg(q));
    while (!stack.empty()) {
        auto [cube, m] = stack.back();
        stack.pop_back();
        if (cube.level == g.L) {
            acc += m;
            continue;
        }
        for (std::uint64_t bits = 0; bits < (std::uint64_t(1) << g.n); ++bits) {
            DyadicCube c = child(cube, g.n, bits);
            stack.emplace_back(c, std::max(m, sigma.avg(c)));
        }
    }
    // acc is the raw cell-sum of the maximal function; the 2^{-nL} in the
    // integral cancels against the one in sigma(Q).
    return acc / sigma.sum(q);
}

inline double rho(const Weight& sigma, const DyadicCube& q) {
    return rho(SumTree(sigma.fn), q);
}

/// rho_{sigma,eps}(Q) = rho_sigma(Q) * eps(rho_sigma(Q)).
inline double rho_eps(const SumTree& sigma, const DyadicCube& q, const BumpFunction& eps) {
    const double r = rho(sigma, q);
    return r * eps(r);
}

inline double rho_eps(const Weight& sigma, const DyadicCube& q, const BumpFunction& eps) {
    return rho_eps(SumTree(sigma.fn), q, eps);
}

/// Supremum over a cube family with argmax; ties resolved toward the
/// smallest (level, index) so parallel reductions are deterministic.
struct SupResult {
    double value = 0.0;
    DyadicCube argmax;
    bool found = false;

    void consider(double v, const DyadicCube& q) {
        if (!found || v > value || (v == value && q < argmax)) {
            value = v;
            argmax = q;
            found = true;
        }
    }
};

/// [w,sigma]_{A_p} over a family: sup <w>_Q <sigma>_Q^{p-1}.
/// Cubes with w(Q) = 0 or sigma(Q) = 0 are skipped.
inline SupResult ap_constant(const SumTree& w, const SumTree& sigma, double p,
                             const std::vector<DyadicCube>& family) {
    check_same_grid(w.spec(), sigma.spec());
    if (!(p > 1)) throw grid_error("ap_constant: p must be > 1");
    if (family.empty()) throw grid_error("ap_constant: empty cube family");
    SupResult best;
    for (const auto& q : family) {
        const double aw = w.avg(q), as = sigma.avg(q);
        if (aw <= 0 || as <= 0) continue;
        best.consider(aw * std::pow(as, p - 1.0), q);
    }
    if (!best.found) throw grid_error("ap_constant: family entirely zero-mass");
    return best;
}

inline SupResult ap_constant(const Weight& w, const Weight& sigma, double p,
                             const std::vector<DyadicCube>& family) {
    return ap_constant(SumTree(w.fn), SumTree(sigma.fn), p, family);
}

/// Fujii-Wilson [w]_{A_infty} over a family: sup_Q rho_w(Q); always >= 1.
inline SupResult ainfty_constant(const SumTree& w, const std::vector<DyadicCube>& family) {
    if (family.empty()) throw grid_error("ainfty_constant: empty cube family");
    SupResult best;
    for (const auto& q : family) {
        if (w.sum(q) <= 0) continue;
        best.consider(rho(w, q), q);
    }
    if (!best.found) throw grid_error("ainfty_constant: family entirely zero-mass");
    return best;
}

inline SupResult ainfty_constant(const Weight& w, const std::vector<DyadicCube>& family) {
    return ainfty_constant(SumTree(w.fn), family);
}

/// Multiplicative entropy bump <w>^{1/p} <sigma>^{1/p'} rho_{w,eps}^{1/r-1/p}
/// rho_{sigma,eps}^{1/p}; the rho_w factor is present only when p > r.
inline SupResult entropy_bump_mult(const SumTree& w, const SumTree& sigma, double p,
                                   double r, const BumpFunction& eps,
                                   const std::vector<DyadicCube>& family) {
    check_same_grid(w.spec(), sigma.spec());
    ExponentSet ex(p, r);
    if (family.empty()) throw grid_error("entropy_bump_mult: empty cube family");
    SupResult best;
    for (const auto& q : family) {
        const double aw = w.avg(q), as = sigma.avg(q);
        if (aw <= 0 || as <= 0) continue;
        double v = std::pow(aw, 1.0 / p) * std::pow(as, 1.0 / ex.pprime()) *
                   std::pow(rho_eps(sigma, q, eps), 1.0 / p);
        if (p > r) v *= std::pow(rho_eps(w, q, eps), 1.0 / r - 1.0 / p);
        best.consider(v, q);
    }
    if (!best.found) throw grid_error("entropy_bump_mult: family entirely zero-mass");
    return best;
}

inline SupResult entropy_bump_mult(const Weight& w, const Weight& sigma, double p,
                                   double r, const BumpFunction& eps,
                                   const std::vector<DyadicCube>& family) {
    return entropy_bump_mult(SumTree(w.fn), SumTree(sigma.fn), p, r, eps, family);
}

/// Separated entropy bump: the rho factors enter as a sum,
/// <w>^{1/p} <sigma>^{1/p'} (rho_{w,eta}^{1/r-1/p} + rho_{sigma,eps}^{1/p});
/// for p <= r it coincides with the multiplicative form's single-rho branch.
inline SupResult entropy_bump_sep(const SumTree& w, const SumTree& sigma, double p,
                                  double r, const BumpFunction& eps,
                                  const BumpFunction& eta,
                                  const std::vector<DyadicCube>& family) {
    check_same_grid(w.spec(), sigma.spec());
    ExponentSet ex(p, r);
    if (family.empty()) throw grid_error("entropy_bump_sep: empty cube family");
    SupResult best;
    for (const auto& q : family) {
        const double aw = w.avg(q), as = sigma.avg(q);
        if (aw <= 0 || as <= 0) continue;
        double rho_term = std::pow(rho_eps(sigma, q, eps), 1.0 / p);
        if (p > r) rho_term += std::pow(rho_eps(w, q, eta), 1.0 / r - 1.0 / p);
        best.consider(std::pow(aw, 1.0 / p) * std::pow(as, 1.0 / ex.pprime()) * rho_term, q);
    }
    if (!best.found) throw grid_error("entropy_bump_sep: family entirely zero-mass");
    return best;
}

inline SupResult entropy_bump_sep(const Weight& w, const Weight& sigma, double p,
                                  double r, const BumpFunction& eps,
                                  const BumpFunction& eta,
                                  const std::vector<DyadicCube>& family) {
    return entropy_bump_sep(SumTree(w.fn), SumTree(sigma.fn), p, r, eps, eta, family);
}

}  // namespace sqlab
