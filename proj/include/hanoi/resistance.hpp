#pragma once

// Effective resistance on graph approximations: boundary compatibility,
// harmonic extension, cell-diameter scaling and resistance diameters.

#include "hanoi/assembly.hpp"
#include "hanoi/errors.hpp"
#include "hanoi/geometry.hpp"
#include "hanoi/sequences.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace hanoi {

namespace detail {

inline std::size_t count_components(const SparseMatrix& l) {
    const std::size_t n = std::size_t(l.rows());
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&parent](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    std::size_t comps = n;
    for (int k = 0; k < l.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(l, k); it; ++it) {
            if (it.row() == it.col() || it.value() == 0.0) continue;
            const auto a = find(std::size_t(it.row())), b = find(std::size_t(it.col()));
            if (a != b) {
                parent[a] = b;
                --comps;
            }
        }
    return comps;
}

using Llt = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

// One step of iterative refinement when the residual is above 1e-10 ||b||.
inline Vector refined_solve(const Llt& llt, const SparseMatrix& a, const Vector& b) {
    Vector x = llt.solve(b);
    const Vector r = b - a * x;
    if (r.norm() > 1e-10 * b.norm()) x += llt.solve(r);
    return x;
}

}  // namespace detail

/// Grounded Laplacian solver: vertex 0 is held at potential 0 and the reduced
/// SPD system is factorized once.
class ResistanceSolver {
public:
    explicit ResistanceSolver(const Pencil& p) : n_(p.n()) {
        if (n_ == 0) throw ConnectivityError("empty pencil");
        const std::size_t comps = detail::count_components(p.stiffness);
        if (comps != 1)
            throw ConnectivityError("pencil has " + std::to_string(comps) +
                                    " connected components; effective resistance needs a connected graph");
        if (n_ == 1) return;
        std::vector<bool> keep(n_, true);
        keep[0] = false;
        reduced_ = restrict_pencil(p, keep, Boundary{BoundaryKind::Custom, 0}).stiffness;
        llt_.compute(reduced_);
        if (llt_.info() != Eigen::Success)
            throw ConnectivityError("grounded Laplacian is singular beyond its constant null space");
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_; }

    /// Potential phi with phi_0 = 0 solving L phi = rhs (rhs must sum to 0).
    [[nodiscard]] Vector potential(const Vector& rhs) const {
        Vector phi = Vector::Zero(Eigen::Index(n_));
        if (n_ == 1) return phi;
        const Vector b = rhs.tail(Eigen::Index(n_) - 1);
        phi.tail(Eigen::Index(n_) - 1) = detail::refined_solve(llt_, reduced_, b);
        return phi;
    }

    [[nodiscard]] double effective_resistance(std::size_t u, std::size_t v) const {
        if (u >= n_ || v >= n_) throw DomainError("effective_resistance: vertex index out of range");
        if (u == v) return 0.0;
        Vector rhs = Vector::Zero(Eigen::Index(n_));
        rhs[Eigen::Index(u)] = 1.0;
        rhs[Eigen::Index(v)] = -1.0;
        const Vector phi = potential(rhs);
        return phi[Eigen::Index(u)] - phi[Eigen::Index(v)];
    }

    /// Column of the grounded Green matrix G = L_red^{-1} padded with G_0. = 0.
    [[nodiscard]] Vector green_column(std::size_t v) const {
        Vector rhs = Vector::Zero(Eigen::Index(n_));
        if (v != 0) rhs[Eigen::Index(v)] = 1.0;
        if (v == 0 || n_ == 1) return Vector::Zero(Eigen::Index(n_));
        return potential(rhs);
    }

    [[nodiscard]] const SparseMatrix& reduced() const noexcept { return reduced_; }

private:
    std::size_t n_;
    SparseMatrix reduced_;
    detail::Llt llt_;
};

[[nodiscard]] inline double effective_resistance(const Pencil& p, std::size_t u, std::size_t v) {
    if (u == v) throw DomainError("effective_resistance: u and v must differ");
    return ResistanceSolver(p).effective_resistance(u, v);
}

struct ResistancePair {
    std::size_t u = 0;
    std::size_t v = 0;
    double resistance = 0.0;
};

struct ResistanceReport {
    std::vector<ResistancePair> pairs;
    std::size_t level = 0;
    std::string sequence;
};

struct CompatibilityRow {
    std::size_t level = 0;
    std::array<double, 3> resistance{};  // R(p1,p2), R(p2,p3), R(p1,p3)
    double deviation = 0.0;              // max |R - 2/3|
};

struct CompatibilityReport {
    std::vector<CompatibilityRow> rows;
    double max_deviation = 0.0;
    double tolerance = 1e-9;
    std::string sequence;
    [[nodiscard]] bool passed() const noexcept { return max_deviation <= tolerance; }
};

inline constexpr double kTwoThirds = 2.0 / 3.0;

[[nodiscard]] inline std::array<double, 3> boundary_resistances(const GraphApprox& g) {
    const Pencil p = assemble_neumann(g);
    const ResistanceSolver solver(p);
    const auto b = g.boundary_ids();
    return {solver.effective_resistance(b[0], b[1]), solver.effective_resistance(b[1], b[2]),
            solver.effective_resistance(b[0], b[2])};
}

/// V_0 pairwise resistances on Gamma_m (s = 1) for m = 0..m_max.
[[nodiscard]] inline CompatibilityReport compatibility_check(const MatchingSequence& seq, std::size_t m_max,
                                                             double tolerance = 1e-9) {
    CompatibilityReport rep;
    rep.tolerance = tolerance;
    rep.sequence = seq.describe();
    for (std::size_t m = 0; m <= m_max; ++m) {
        const GraphApprox g = build_graph(seq, m, 1, 0.25);
        CompatibilityRow row;
        row.level = m;
        row.resistance = boundary_resistances(g);
        for (double r : row.resistance) row.deviation = std::max(row.deviation, std::abs(r - kTwoThirds));
        rep.max_deviation = std::max(rep.max_deviation, row.deviation);
        rep.rows.push_back(row);
    }
    return rep;
}

struct HarmonicExtension {
    Vector values;
    double energy = 0.0;
};

/// Energy-minimising extension of boundary data: solves L_FF u_F = -L_FB u_B.
[[nodiscard]] inline HarmonicExtension harmonic_extension(const Pencil& p,
                                                          const std::vector<std::pair<std::size_t, double>>& fixed) {
    if (fixed.empty()) throw DomainError("harmonic_extension: no fixed vertices");
    const std::size_t n = p.n();
    std::vector<bool> is_fixed(n, false);
    Vector u = Vector::Zero(Eigen::Index(n));
    for (const auto& [v, val] : fixed) {
        if (v >= n) throw DomainError("harmonic_extension: fixed vertex out of range");
        if (!std::isfinite(val)) throw DomainError("harmonic_extension: non-finite boundary value");
        is_fixed[v] = true;
        u[Eigen::Index(v)] = val;
    }
    std::vector<int> free_index(n, -1);
    int nf = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (!is_fixed[i]) free_index[i] = nf++;

    if (nf > 0) {
        std::vector<Eigen::Triplet<double>> trip;
        Vector rhs = Vector::Zero(nf);
        for (int k = 0; k < p.stiffness.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(p.stiffness, k); it; ++it) {
                const int r = free_index[std::size_t(it.row())];
                if (r < 0) continue;
                const int c = free_index[std::size_t(it.col())];
                if (c >= 0)
                    trip.emplace_back(r, c, it.value());
                else
                    rhs[r] -= it.value() * u[it.col()];
            }
        SparseMatrix a(nf, nf);
        a.setFromTriplets(trip.begin(), trip.end());
        detail::Llt llt(a);
        if (llt.info() != Eigen::Success)
            throw ConnectivityError("harmonic_extension: free vertices not connected to any fixed vertex");
        const Vector uf = detail::refined_solve(llt, a, rhs);
        for (std::size_t i = 0; i < n; ++i)
            if (free_index[i] >= 0) u[Eigen::Index(i)] = uf[free_index[i]];
    }
    HarmonicExtension out;
    out.energy = p.energy(u);
    out.values = std::move(u);
    return out;
}

struct CellIndicatorEnergy {
    double energy = 0.0;
    double bound = 0.0;  // 6 / delta_{|w|}
    std::size_t ones = 0;
};

/// Harmonic extension of the V_j data that is 1 on G_w(V_0) and on the
/// V_j vertices joined to it by a line edge, 0 on the rest of V_j (j = |w|).
[[nodiscard]] inline CellIndicatorEnergy cell_indicator_energy(const GraphApprox& g, const Word& w) {
    const std::size_t j = w.size();
    if (j >= g.level()) throw LevelError("cell_indicator_energy: need |w| < graph level");
    const auto vj = g.level_vertices(j);
    std::vector<double> value(g.vertex_count(), 0.0);
    const auto corners = g.cell_corner_ids(w);
    for (auto c : corners) value[c] = 1.0;
    for (const auto& le : g.line_edges()) {
        if (le.level > j) continue;
        for (auto c : corners) {
            if (le.end_a == c) value[le.end_b] = 1.0;
            if (le.end_b == c) value[le.end_a] = 1.0;
        }
    }
    std::vector<std::pair<std::size_t, double>> fixed;
    CellIndicatorEnergy out;
    for (auto v : vj) {
        fixed.emplace_back(v, value[v]);
        if (value[v] == 1.0) ++out.ones;
    }
    out.energy = harmonic_extension(assemble_neumann(g), fixed).energy;
    out.bound = 6.0 / g.scales().delta[j];
    return out;
}

struct DiameterLevel {
    std::size_t level = 0;
    double max_diameter = 0.0;
    double min_diameter = 0.0;
    std::vector<double> per_cell;  // lexicographic word order
};

struct DiameterScaling {
    std::size_t graph_level = 0;
    std::vector<DiameterLevel> levels;
    std::size_t fit_from = 0;  // first level in the fit window
    std::size_t fit_to = 0;    // last level in the fit window
    double slope = 0.0;
    double intercept = 0.0;
    double dimension = 0.0;  // ln 3 / (-slope)
    /// exp(intercept): empirical constant c in max d_j ~ c e^{slope j}
    [[nodiscard]] double constant() const { return std::exp(intercept); }
};

/// Fits log(max_w d_j(w)) against j over [fit_from, fit_to].
inline void fit_diameter_slope(DiameterScaling& d, std::size_t fit_from, std::size_t fit_to) {
    if (fit_to >= d.levels.size() || fit_from >= fit_to)
        throw InsufficientDataError("diameter fit window [" + std::to_string(fit_from) + ", " +
                                    std::to_string(fit_to) + "] needs two levels within 0.." +
                                    std::to_string(d.levels.empty() ? 0 : d.levels.size() - 1));
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = double(fit_to - fit_from + 1);
    for (std::size_t j = fit_from; j <= fit_to; ++j) {
        const double x = double(j), y = std::log(d.levels[j].max_diameter);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    d.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    d.intercept = (sy - d.slope * sx) / k;
    d.fit_from = fit_from;
    d.fit_to = fit_to;
    d.dimension = std::log(3.0) / -d.slope;
}

/// Corner-diameter proxy d_j(w) = max pairwise resistance among G_w(V_0),
/// on Gamma_m, for j = 0..j_max. The default fit window is all levels.
[[nodiscard]] inline DiameterScaling cell_diameter_scaling(const MatchingSequence& seq, std::size_t m,
                                                           std::size_t j_max,
                                                           std::optional<std::size_t> fit_from = {}) {
    if (j_max >= m)
        throw LevelError("cell_diameter_scaling: j_max = " + std::to_string(j_max) +
                         " must be below the graph level " + std::to_string(m));
    const GraphApprox g = build_graph(seq, m, 1, 0.25);
    const Pencil p = assemble_neumann(g);
    const ResistanceSolver solver(p);
    DiameterScaling out;
    out.graph_level = m;
    for (std::size_t j = 0; j <= j_max; ++j) {
        DiameterLevel lev;
        lev.level = j;
        lev.min_diameter = std::numeric_limits<double>::infinity();
        for (const Word& w : enumerate_words(j)) {
            const auto c = g.cell_corner_ids(w);
            const double d = std::max({solver.effective_resistance(c[0], c[1]),
                                       solver.effective_resistance(c[1], c[2]),
                                       solver.effective_resistance(c[0], c[2])});
            lev.per_cell.push_back(d);
            lev.max_diameter = std::max(lev.max_diameter, d);
            lev.min_diameter = std::min(lev.min_diameter, d);
        }
        out.levels.push_back(std::move(lev));
    }
    if (j_max >= 1) fit_diameter_slope(out, fit_from.value_or(0), j_max);
    return out;
}

enum class DiameterMode : std::uint8_t { Exact, Sampled };

struct DiameterResult {
    double value = 0.0;
    DiameterMode mode = DiameterMode::Exact;
    bool lower_bound = false;  // true for sampled mode
    std::uint64_t seed = 0;
    std::size_t pairs_evaluated = 0;
};

inline constexpr std::size_t kExactDiameterLimit = 2000;

/// Maximum pairwise effective resistance. Exact mode forms the grounded Green
/// matrix; sampled mode evaluates `samples` random pairs plus every
/// anchor-to-vertex pair and reports a lower bound.
[[nodiscard]] inline DiameterResult resistance_diameter(const Pencil& p, DiameterMode mode,
                                                        const std::vector<std::size_t>& anchors = {},
                                                        std::size_t samples = 1000,
                                                        std::uint64_t seed = 20240101) {
    const ResistanceSolver solver(p);
    const std::size_t n = p.n();
    DiameterResult out;
    out.mode = mode;
    if (n < 2) return out;

    if (mode == DiameterMode::Exact) {
        if (n > kExactDiameterLimit)
            throw SizeError("exact resistance diameter limited to n <= " + std::to_string(kExactDiameterLimit));
        Eigen::MatrixXd gm = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
        for (std::size_t v = 1; v < n; ++v) gm.col(Eigen::Index(v)) = solver.green_column(v);
        for (Eigen::Index a = 0; a < Eigen::Index(n); ++a)
            for (Eigen::Index b = a + 1; b < Eigen::Index(n); ++b)
                out.value = std::max(out.value, gm(a, a) + gm(b, b) - 2.0 * gm(a, b));
        out.pairs_evaluated = n * (n - 1) / 2;
        return out;
    }

    out.lower_bound = true;
    out.seed = seed;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t t = 0; t < samples; ++t) {
        const std::size_t a = pick(rng);
        std::size_t b = pick(rng);
        if (a == b) b = (b + 1) % n;
        out.value = std::max(out.value, solver.effective_resistance(a, b));
        ++out.pairs_evaluated;
    }
    if (!anchors.empty()) {
        std::vector<Vector> anchor_cols;
        for (auto a : anchors) anchor_cols.push_back(solver.green_column(a));
        for (std::size_t v = 0; v < n; ++v) {
            const Vector col = solver.green_column(v);
            const double gvv = col[Eigen::Index(v)];
            for (std::size_t t = 0; t < anchors.size(); ++t) {
                const auto a = Eigen::Index(anchors[t]);
                if (std::size_t(a) == v) continue;
                const double r = anchor_cols[t][a] + gvv - 2.0 * col[a];
                out.value = std::max(out.value, r);
                ++out.pairs_evaluated;
            }
        }
    }
    return out;
}

}  // namespace hanoi
