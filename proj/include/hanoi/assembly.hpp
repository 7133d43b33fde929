#pragma once

// Stiffness/mass pencils (L, M) built from a graph approximation.
//
// L is the conductance Laplacian sum_e (1/R_e)(e_u - e_v)(e_u - e_v)^T stored
// with both triangles; M is the diagonal lumped mass. Dirichlet conditions
// delete rows and columns. Decoupled pencils realise the Neumann/Dirichlet
// splittings used for eigenvalue bracketing.

#include "hanoi/errors.hpp"
#include "hanoi/geometry.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

namespace hanoi {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

enum class BoundaryKind : std::uint8_t {
    Neumann,
    DirichletV0,
    DirichletVm,
    DecoupledNeumann,
    DecoupledDirichlet,
    Custom,
};

struct Boundary {
    BoundaryKind kind = BoundaryKind::Neumann;
    std::size_t level = 0;

    [[nodiscard]] bool is_dirichlet() const noexcept {
        return kind == BoundaryKind::DirichletV0 || kind == BoundaryKind::DirichletVm ||
               kind == BoundaryKind::DecoupledDirichlet;
    }

    [[nodiscard]] std::string str() const {
        switch (kind) {
            case BoundaryKind::Neumann: return "neumann";
            case BoundaryKind::DirichletV0: return "dirichlet_v0";
            case BoundaryKind::DirichletVm: return "dirichlet_v" + std::to_string(level);
            case BoundaryKind::DecoupledNeumann: return "neumann_split_" + std::to_string(level);
            case BoundaryKind::DecoupledDirichlet: return "dirichlet_split_" + std::to_string(level);
            case BoundaryKind::Custom: return "custom";
        }
        return "custom";
    }

    bool operator==(const Boundary&) const = default;
};

struct Pencil {
    SparseMatrix stiffness;
    Vector mass;
    Boundary boundary;
    /// Pencil index -> graph vertex id. Duplicated split vertices map to the
    /// same graph vertex; `line_copy` marks the line-side copy.
    std::vector<VertexId> vertex_map;
    std::vector<std::uint8_t> line_copy;

    [[nodiscard]] std::size_t n() const noexcept { return static_cast<std::size_t>(mass.size()); }
    [[nodiscard]] bool empty() const noexcept { return mass.size() == 0; }
    [[nodiscard]] double total_mass() const { return mass.sum(); }

    /// Maximum absolute row sum of L.
    [[nodiscard]] double stiffness_norm() const {
        Vector rows = Vector::Zero(stiffness.rows());
        for (int k = 0; k < stiffness.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(stiffness, k); it; ++it)
                rows[it.row()] += std::abs(it.value());
        return rows.size() ? rows.maxCoeff() : 0.0;
    }

    /// u^T L u
    [[nodiscard]] double energy(const Vector& u) const { return u.dot(stiffness * u); }
};

struct Conductor {
    std::size_t a = 0;
    std::size_t b = 0;
    double resistance = 1.0;
};

/// Pencil from a list of resistors between local indices. Every resistance
/// must be positive and finite, every mass positive.
[[nodiscard]] inline Pencil assemble_pencil(std::size_t n, const std::vector<Conductor>& conductors,
                                            std::vector<double> masses, Boundary boundary,
                                            std::vector<VertexId> vertex_map = {},
                                            std::vector<std::uint8_t> line_copy = {}) {
    if (masses.size() != n) throw AssemblyError("mass vector length differs from pencil size");
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * conductors.size() + n);
    for (std::size_t i = 0; i < n; ++i) trip.emplace_back(int(i), int(i), 0.0);
    for (const auto& c : conductors) {
        if (!(c.resistance > 0.0) || !std::isfinite(c.resistance))
            throw AssemblyError("resistance between local vertices " + std::to_string(c.a) + " and " +
                                std::to_string(c.b) +
                                " is not positive and finite (degenerate matching pair?)");
        if (c.a >= n || c.b >= n || c.a == c.b) throw AssemblyError("conductor endpoints invalid");
        const double g = 1.0 / c.resistance;
        const int a = int(c.a), b = int(c.b);
        trip.emplace_back(a, a, g);
        trip.emplace_back(b, b, g);
        trip.emplace_back(a, b, -g);
        trip.emplace_back(b, a, -g);
    }
    Pencil p;
    p.stiffness.resize(int(n), int(n));
    p.stiffness.setFromTriplets(trip.begin(), trip.end());
    p.stiffness.makeCompressed();
    p.mass = Eigen::Map<const Vector>(masses.data(), Eigen::Index(n));
    for (std::size_t i = 0; i < n; ++i)
        if (!(masses[i] > 0.0)) throw PencilError("mass entry " + std::to_string(i) + " is not positive");
    p.boundary = boundary;
    if (vertex_map.empty()) {
        vertex_map.resize(n);
        std::iota(vertex_map.begin(), vertex_map.end(), VertexId{0});
    }
    if (line_copy.empty()) line_copy.assign(n, 0);
    p.vertex_map = std::move(vertex_map);
    p.line_copy = std::move(line_copy);
    return p;
}

[[nodiscard]] inline Pencil assemble_neumann(const GraphApprox& g) {
    std::vector<Conductor> cs;
    cs.reserve(g.edge_count());
    for (const auto& e : g.edges()) cs.push_back(Conductor{e.u, e.v, e.resistance});
    std::vector<double> masses;
    masses.reserve(g.vertex_count());
    for (const auto& v : g.vertices()) masses.push_back(v.mass());
    return assemble_pencil(g.vertex_count(), cs, std::move(masses), Boundary{BoundaryKind::Neumann, 0});
}

/// Principal sub-pencil on the indices flagged in `keep`.
[[nodiscard]] inline Pencil restrict_pencil(const Pencil& p, const std::vector<bool>& keep,
                                            Boundary boundary) {
    const std::size_t n = p.n();
    std::vector<int> remap(n, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) remap[i] = next++;
    if (next == 0) throw EmptyPencilError("all " + std::to_string(n) + " vertices are constrained");

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(p.stiffness.nonZeros());
    for (int k = 0; k < p.stiffness.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(p.stiffness, k); it; ++it) {
            const int r = remap[it.row()], c = remap[it.col()];
            if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
        }
    Pencil out;
    out.stiffness.resize(next, next);
    out.stiffness.setFromTriplets(trip.begin(), trip.end());
    out.stiffness.makeCompressed();
    out.mass.resize(next);
    out.vertex_map.resize(std::size_t(next));
    out.line_copy.resize(std::size_t(next));
    for (std::size_t i = 0; i < n; ++i)
        if (remap[i] >= 0) {
            out.mass[remap[i]] = p.mass[Eigen::Index(i)];
            out.vertex_map[std::size_t(remap[i])] = p.vertex_map[i];
            out.line_copy[std::size_t(remap[i])] = p.line_copy[i];
        }
    out.boundary = boundary;
    return out;
}

/// Constrained set for Dirichlet conditions: V_0 or V_j (V_j contains V_0).
struct DirichletSet {
    bool use_level = false;
    std::size_t level = 0;

    static DirichletSet v0() { return DirichletSet{false, 0}; }
    static DirichletSet vm(std::size_t j) { return DirichletSet{true, j}; }
};

[[nodiscard]] inline Pencil apply_dirichlet(const Pencil& p, const GraphApprox& g, DirichletSet set) {
    std::vector<VertexId> constrained;
    if (set.use_level) {
        if (set.level > g.level())
            throw LevelError("apply_dirichlet: V_" + std::to_string(set.level) +
                             " requested on a level-" + std::to_string(g.level()) + " graph");
        constrained = g.level_vertices(set.level);
    } else {
        const auto b = g.boundary_ids();
        constrained.assign(b.begin(), b.end());
    }
    std::vector<bool> is_constrained(g.vertex_count(), false);
    for (auto v : constrained) is_constrained[v] = true;
    std::vector<bool> keep(p.n());
    for (std::size_t i = 0; i < p.n(); ++i) keep[i] = !is_constrained[p.vertex_map[i]];
    const Boundary b = set.use_level ? Boundary{BoundaryKind::DirichletVm, set.level}
                                     : Boundary{BoundaryKind::DirichletV0, 0};
    return restrict_pencil(p, keep, b);
}

enum class SplitKind : std::uint8_t { NeumannSplit, DirichletSplit };

namespace detail {

struct ExpandedGraph {
    std::vector<double> mass;
    std::vector<VertexId> vertex_map;
    std::vector<std::uint8_t> line_copy;
    std::vector<Conductor> conductors;
    std::vector<bool> removed;
};

/// Splits the expanded graph into connected components of non-removed
/// vertices, ordered by smallest member index. Each component pencil is the
/// principal sub-pencil of the full expanded pencil, so conductors into
/// removed (grounded) vertices stay on the diagonal.
inline std::vector<Pencil> components_to_pencils(const ExpandedGraph& x, Boundary boundary) {
    const std::size_t n = x.mass.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&parent](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (const auto& c : x.conductors) {
        if (x.removed[c.a] || x.removed[c.b]) continue;
        const auto ra = find(c.a), rb = find(c.b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
    std::vector<std::size_t> comp_of(n, SIZE_MAX);
    std::vector<int> local(n, -1);
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t v = 0; v < n; ++v) {
        if (x.removed[v]) continue;
        const auto root = find(v);
        if (comp_of[root] == SIZE_MAX) {
            comp_of[root] = members.size();
            members.emplace_back();
        }
        comp_of[v] = comp_of[root];
        local[v] = int(members[comp_of[v]].size());
        members[comp_of[v]].push_back(v);
    }
    const Pencil full = assemble_pencil(n, x.conductors, x.mass, boundary, x.vertex_map, x.line_copy);
    std::vector<std::vector<Eigen::Triplet<double>>> trip(members.size());
    for (int k = 0; k < full.stiffness.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(full.stiffness, k); it; ++it) {
            const auto r = std::size_t(it.row()), c = std::size_t(it.col());
            if (x.removed[r] || x.removed[c]) continue;
            trip[comp_of[r]].emplace_back(local[r], local[c], it.value());
        }
    std::vector<Pencil> out;
    out.reserve(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
        const int nk = int(members[k].size());
        Pencil p;
        p.stiffness.resize(nk, nk);
        p.stiffness.setFromTriplets(trip[k].begin(), trip[k].end());
        p.stiffness.makeCompressed();
        p.mass.resize(nk);
        for (auto v : members[k]) {
            p.mass[local[v]] = x.mass[v];
            p.vertex_map.push_back(x.vertex_map[v]);
            p.line_copy.push_back(x.line_copy[v]);
        }
        p.boundary = boundary;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace detail

/// Decoupled pencils at level j.
///
/// NeumannSplit cuts every line edge of level <= j loose from its endpoints:
/// the endpoint keeps its cell share (and any deeper line share), a new copy
/// carries the cut edge's trapezoidal end share. DirichletSplit grounds V_j
/// (which contains V_0). One pencil per connected component is returned;
/// components without degrees of freedom are omitted.
[[nodiscard]] inline std::vector<Pencil> assemble_decoupled(const GraphApprox& g, std::size_t j,
                                                            SplitKind kind) {
    if (j > g.level())
        throw LevelError("assemble_decoupled: level " + std::to_string(j) + " exceeds graph level " +
                         std::to_string(g.level()));
    detail::ExpandedGraph x;
    const std::size_t n = g.vertex_count();
    x.mass.reserve(n);
    for (const auto& v : g.vertices()) x.mass.push_back(v.mass());
    x.vertex_map.resize(n);
    std::iota(x.vertex_map.begin(), x.vertex_map.end(), VertexId{0});
    x.line_copy.assign(n, 0);
    x.conductors.reserve(g.edge_count());

    if (kind == SplitKind::NeumannSplit) {
        const double s = static_cast<double>(g.subdivisions());
        std::vector<VertexId> dup_a(g.line_edges().size(), SIZE_MAX), dup_b(g.line_edges().size(), SIZE_MAX);
        for (std::size_t id = 0; id < g.line_edges().size(); ++id) {
            const auto& le = g.line_edges()[id];
            if (le.level > j) continue;
            const double share = le.mass / (2.0 * s);
            for (auto [end, dup] : {std::pair{le.end_a, &dup_a[id]}, std::pair{le.end_b, &dup_b[id]}}) {
                x.mass[end] -= share;
                *dup = x.mass.size();
                x.mass.push_back(share);
                x.vertex_map.push_back(end);
                x.line_copy.push_back(1);
            }
        }
        for (const auto& e : g.edges()) {
            Conductor c{e.u, e.v, e.resistance};
            if (e.kind == EdgeKind::LineSegment && e.level <= j) {
                const auto& le = g.line_edges()[e.line_edge];
                auto repoint = [&](std::size_t v) {
                    if (v == le.end_a) return dup_a[e.line_edge];
                    if (v == le.end_b) return dup_b[e.line_edge];
                    return v;
                };
                c.a = repoint(c.a);
                c.b = repoint(c.b);
            }
            x.conductors.push_back(c);
        }
        x.removed.assign(x.mass.size(), false);
        return detail::components_to_pencils(x, Boundary{BoundaryKind::DecoupledNeumann, j});
    }

    for (const auto& e : g.edges()) x.conductors.push_back(Conductor{e.u, e.v, e.resistance});
    x.removed.assign(n, false);
    for (auto v : g.level_vertices(j)) x.removed[v] = true;
    return detail::components_to_pencils(x, Boundary{BoundaryKind::DecoupledDirichlet, j});
}

/// Unscaled fractal form Q_m(u) = sum over m-cells of the triangle form on
/// the cell's corner values.
[[nodiscard]] inline double fractal_form(const GraphApprox& g, const Vector& u) {
    double q = 0.0;
    for (std::size_t c = 0; c < g.cell_count(); ++c) {
        const double a = u[Eigen::Index(3 * c)], b = u[Eigen::Index(3 * c + 1)],
                     d = u[Eigen::Index(3 * c + 2)];
        q += (a - b) * (a - b) + (b - d) * (b - d) + (d - a) * (d - a);
    }
    return q;
}

/// Line energy sum_k (1/gamma_k) D_k(u) on the piecewise-linear line model.
[[nodiscard]] inline double line_energy(const GraphApprox& g, const Vector& u) {
    double e = 0.0;
    for (const auto& ed : g.edges()) {
        if (ed.kind != EdgeKind::LineSegment) continue;
        const double d = u[Eigen::Index(ed.u)] - u[Eigen::Index(ed.v)];
        e += d * d / ed.resistance;
    }
    return e;
}

/// Corner values of u o G_i as a vector on the cell corners of a level-(m-1)
/// graph (line nodes left at zero). `coarse` must have level g.level() - 1.
[[nodiscard]] inline Vector compose_with_map(const GraphApprox& g, const GraphApprox& coarse,
                                             std::uint8_t i, const Vector& u) {
    if (g.level() == 0 || coarse.level() + 1 != g.level())
        throw LevelError("compose_with_map: coarse graph must be one level below");
    Vector out = Vector::Zero(Eigen::Index(coarse.vertex_count()));
    const std::size_t block = pow3(coarse.level());
    for (std::size_t c = 0; c < coarse.cell_count(); ++c)
        for (std::uint8_t k = 1; k <= 3; ++k)
            out[Eigen::Index(GraphApprox::corner_id(c, k))] =
                u[Eigen::Index(GraphApprox::corner_id((i - 1) * block + c, k))];
    return out;
}

/// Writes L in MatrixMarket symmetric coordinate form (lower triangle,
/// 1-based, column-major order) and the mass vector one entry per line.
inline void write_pencil_dump(std::ostream& matrix_os, std::ostream& mass_os, const Pencil& p) {
    matrix_os << std::setprecision(17);
    mass_os << std::setprecision(17);
    std::size_t nnz = 0;
    for (int k = 0; k < p.stiffness.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(p.stiffness, k); it; ++it)
            if (it.row() >= it.col()) ++nnz;
    matrix_os << "%%MatrixMarket matrix coordinate real symmetric\n"
              << p.n() << ' ' << p.n() << ' ' << nnz << '\n';
    for (int k = 0; k < p.stiffness.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(p.stiffness, k); it; ++it)
            if (it.row() >= it.col())
                matrix_os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
    for (Eigen::Index i = 0; i < p.mass.size(); ++i) mass_os << p.mass[i] << '\n';
}

}  // namespace hanoi
