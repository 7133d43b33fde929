#include "hanoi/assembly.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace hanoi;

namespace {

MatchingSequence half() { return MatchingSequence::constant(0.5); }

oracle::Dense dense(const SparseMatrix& a) {
    oracle::Dense d = oracle::zeros(std::size_t(a.rows()));
    for (int k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) d[it.row()][it.col()] += it.value();
    return d;
}

std::vector<double> masses(const Pencil& p) { return {p.mass.data(), p.mass.data() + p.mass.size()}; }

// Pencil components by DFS on the off-diagonal pattern.
std::size_t pencil_components(const Pencil& p) {
    std::vector<std::pair<std::size_t, std::size_t>> es;
    for (int k = 0; k < p.stiffness.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(p.stiffness, k); it; ++it)
            if (it.row() != it.col() && it.value() != 0.0) es.emplace_back(it.row(), it.col());
    return oracle::components(p.n(), es);
}

}  // namespace

TEST(Pencil, LevelZeroMatrix) {
    const auto g = build_graph(half(), 0, 1, 0.25);
    const auto p = assemble_neumann(g);
    const auto l = dense(p.stiffness);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(l[i][j], i == j ? 2.0 : -1.0);
    const auto ev = oracle::generalized_eigenvalues(l, masses(p));
    EXPECT_NEAR(ev[0], 0.0, 1e-12);
    EXPECT_NEAR(ev[1], 9.0, 1e-12);
    EXPECT_NEAR(ev[2], 9.0, 1e-12);
}

TEST(Pencil, LevelOneCornerDiagonal) {
    const auto g = build_graph(half(), 1, 1, 0.25);
    const auto p = assemble_neumann(g);
    // two cell edges of resistance 1/2 and one line edge of resistance 1/6
    const auto c = GraphApprox::corner_id(Word::parse("1").index(), 2);
    EXPECT_DOUBLE_EQ(p.stiffness.coeff(int(c), int(c)), 10.0);
}

TEST(Pencil, MatchesDenseOracleAssembly) {
    for (std::size_t m = 0; m <= 3; ++m)
        for (std::size_t s = 1; s <= 3; ++s) {
            const auto g = build_graph(MatchingSequence::geometric_to_limit(0.6, 0.5), m, s, 0.2);
            std::vector<oracle::WeightedEdge> es;
            for (const auto& e : g.edges()) es.push_back({e.u, e.v, e.resistance});
            const auto want = oracle::laplacian(g.vertex_count(), es);
            const auto got = dense(assemble_neumann(g).stiffness);
            for (std::size_t i = 0; i < want.size(); ++i)
                for (std::size_t j = 0; j < want.size(); ++j) ASSERT_NEAR(got[i][j], want[i][j], 1e-12);
        }
}

TEST(Pencil, SymmetricZeroRowSumsSemidefinite) {
    for (std::size_t m = 0; m <= 3; ++m) {
        const auto p = assemble_neumann(build_graph(half(), m, 2, 0.25));
        const auto l = dense(p.stiffness);
        const double norm = p.stiffness_norm();
        for (std::size_t i = 0; i < l.size(); ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < l.size(); ++j) {
                row += l[i][j];
                EXPECT_EQ(l[i][j], l[j][i]);
            }
            EXPECT_LE(std::abs(row), 1e-12 * norm);
        }
        EXPECT_GE(oracle::jacobi_eigenvalues(l).front(), -1e-12 * norm);
    }
}

TEST(Pencil, PathExample) {
    const auto p = assemble_pencil(3, {{0, 1, 1.0}, {1, 2, 1.0}}, {0.25, 0.5, 0.25}, Boundary{});
    const auto ev = oracle::generalized_eigenvalues(dense(p.stiffness), masses(p));
    EXPECT_NEAR(ev[0], 0.0, 1e-12);
    EXPECT_NEAR(ev[1], 4.0, 1e-12);
    EXPECT_NEAR(ev[2], 8.0, 1e-12);
}

TEST(Pencil, AssemblyErrors) {
    EXPECT_THROW((void)assemble_pencil(2, {{0, 1, 0.0}}, {1.0, 1.0}, Boundary{}), AssemblyError);
    EXPECT_THROW((void)assemble_pencil(2, {{0, 1, -1.0}}, {1.0, 1.0}, Boundary{}), AssemblyError);
    EXPECT_THROW((void)assemble_pencil(2, {{0, 1, 1.0}}, {1.0, 0.0}, Boundary{}), PencilError);
    EXPECT_THROW((void)assemble_pencil(2, {{0, 1, 1.0}}, {1.0}, Boundary{}), AssemblyError);
}

TEST(Dirichlet, BoundaryDeletion) {
    const auto g0 = build_graph(half(), 0, 1, 0.25);
    EXPECT_THROW((void)apply_dirichlet(assemble_neumann(g0), g0, DirichletSet::v0()), EmptyPencilError);

    const auto g1 = build_graph(half(), 1, 1, 0.25);
    const auto d = apply_dirichlet(assemble_neumann(g1), g1, DirichletSet::v0());
    EXPECT_EQ(d.n(), 6u);
    EXPECT_EQ(d.boundary.str(), "dirichlet_v0");
    EXPECT_THROW((void)apply_dirichlet(assemble_neumann(g1), g1, DirichletSet::vm(1)), EmptyPencilError);
    EXPECT_THROW((void)apply_dirichlet(assemble_neumann(g1), g1, DirichletSet::vm(2)), LevelError);

    // Deleting rows and columns gives the principal submatrix.
    const auto g = build_graph(half(), 2, 2, 0.25);
    const auto pn = assemble_neumann(g);
    const auto pd = apply_dirichlet(pn, g, DirichletSet::v0());
    for (std::size_t i = 0; i < pd.n(); ++i) {
        EXPECT_EQ(pd.mass[Eigen::Index(i)], pn.mass[Eigen::Index(pd.vertex_map[i])]);
        for (std::size_t j = 0; j < pd.n(); ++j)
            EXPECT_EQ(pd.stiffness.coeff(int(i), int(j)),
                      pn.stiffness.coeff(int(pd.vertex_map[i]), int(pd.vertex_map[j])));
    }
}

TEST(Decoupled, LevelZeroNeumannIsOriginal) {
    const auto g = build_graph(half(), 2, 2, 0.25);
    const auto parts = assemble_decoupled(g, 0, SplitKind::NeumannSplit);
    ASSERT_EQ(parts.size(), 1u);
    const auto pn = assemble_neumann(g);
    EXPECT_EQ(dense(parts[0].stiffness), dense(pn.stiffness));
}

TEST(Decoupled, ComponentStructure) {
    const auto g = build_graph(half(), 2, 2, 0.25);
    const auto nn = assemble_decoupled(g, 1, SplitKind::NeumannSplit);
    ASSERT_EQ(nn.size(), 6u);
    std::size_t lines = 0;
    for (const auto& p : nn) {
        EXPECT_EQ(pencil_components(p), 1u);
        bool is_line = false;
        for (std::size_t i = 0; i < p.n(); ++i)
            if (p.line_copy[i]) is_line = true;
        if (is_line) {
            ++lines;
            EXPECT_EQ(p.n(), 3u);  // two copied ends and one interior node
        } else {
            EXPECT_EQ(p.n(), expected_vertex_count(1, 2));
        }
    }
    EXPECT_EQ(lines, 3u);
    const auto dd = assemble_decoupled(g, 1, SplitKind::DirichletSplit);
    ASSERT_EQ(dd.size(), 6u);
    std::size_t one_dof = 0;
    for (const auto& p : dd)
        if (p.n() == 1) ++one_dof;
    EXPECT_EQ(one_dof, 3u);
    EXPECT_THROW((void)assemble_decoupled(g, 3, SplitKind::NeumannSplit), LevelError);
}

TEST(Decoupled, NeumannSplitConservesMass) {
    for (std::size_t j = 0; j <= 3; ++j) {
        const auto g = build_graph(half(), 3, 3, 0.2);
        double total = 0.0;
        for (const auto& p : assemble_decoupled(g, j, SplitKind::NeumannSplit)) {
            total += p.total_mass();
            EXPECT_LE(dense(p.stiffness).size(), g.vertex_count() + 2 * g.line_edges().size());
        }
        EXPECT_NEAR(total, g.total_mass(), 1e-13);
    }
}

TEST(Decoupled, DirichletSplitBlocksArePrincipalSubmatrices) {
    const auto g = build_graph(half(), 3, 2, 0.25);
    const auto pn = assemble_neumann(g);
    for (const auto& p : assemble_decoupled(g, 2, SplitKind::DirichletSplit)) {
        EXPECT_EQ(pencil_components(p), 1u);
        for (std::size_t i = 0; i < p.n(); ++i)
            for (std::size_t j = 0; j < p.n(); ++j)
                EXPECT_EQ(p.stiffness.coeff(int(i), int(j)),
                          pn.stiffness.coeff(int(p.vertex_map[i]), int(p.vertex_map[j])));
    }
}

TEST(FractalForm, SelfSimilarRegrouping) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    const auto g = build_graph(half(), 3, 1, 0.25);
    const auto coarse = build_graph(half(), 2, 1, 0.25);
    for (int t = 0; t < 10; ++t) {
        Vector u(Eigen::Index(g.vertex_count()));
        for (auto& x : u) x = nd(rng);
        double sum = 0.0;
        for (std::uint8_t i = 1; i <= 3; ++i) sum += fractal_form(coarse, compose_with_map(g, coarse, i, u));
        const double q = fractal_form(g, u);
        EXPECT_NEAR(q, sum, 1e-12 * q);  // summation order only
    }
}

TEST(FractalForm, EnergySplitsIntoCellAndLineParts) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    const auto g = build_graph(half(), 3, 2, 0.25);
    const auto p = assemble_neumann(g);
    Vector u(Eigen::Index(g.vertex_count()));
    for (auto& x : u) x = nd(rng);
    const double cell = fractal_form(g, u) / g.scales().delta.back();
    EXPECT_NEAR(p.energy(u), cell + line_energy(g, u), 1e-10 * p.energy(u));
}

TEST(Pencil, DumpFormat) {
    const auto p = assemble_neumann(build_graph(half(), 0, 1, 0.25));
    std::ostringstream mat, mass;
    write_pencil_dump(mat, mass, p);
    EXPECT_EQ(mat.str().rfind("%%MatrixMarket matrix coordinate real symmetric\n3 3 6\n", 0), 0u);
    const auto text = mass.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}
