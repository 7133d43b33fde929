#pragma once

// Level-m graph approximation of the Hanoi attractor.
//
// Vertex layout (deterministic):
//   ids [0, 3^{m+1})        cell corners, id = 3 * cell + (corner - 1), cells
//                           in lexicographic word order;
//   ids [3^{m+1}, n)        interior line nodes, line edge by line edge in
//                           (level, word, index) order, s - 1 nodes each.
// Edge layout: three cell edges per cell (p1p2, p2p3, p3p1), then for every
// line edge its s segments from endpoint a to endpoint b.

#include "hanoi/errors.hpp"
#include "hanoi/sequences.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace hanoi {

using VertexId = std::size_t;

inline constexpr std::size_t kMaxLevel = 12;

[[nodiscard]] constexpr std::size_t pow3(std::size_t k) noexcept {
    std::size_t p = 1;
    for (std::size_t i = 0; i < k; ++i) p *= 3;
    return p;
}

/// Address over the alphabet {1, 2, 3}. The empty word is level 0.
class Word {
public:
    Word() = default;

    explicit Word(std::vector<std::uint8_t> letters) : letters_(std::move(letters)) {
        for (auto l : letters_)
            if (l < 1 || l > 3)
                throw AddressError("word letter " + std::to_string(int(l)) + " outside {1,2,3}");
    }

    /// Parses "", "-" or "ε" (empty word) and strings over '1','2','3'.
    static Word parse(std::string_view s) {
        if (s == "-" || s == "\xce\xb5") return Word{};
        std::vector<std::uint8_t> l;
        l.reserve(s.size());
        for (char c : s) {
            if (c < '1' || c > '3')
                throw AddressError("word \"" + std::string(s) + "\" uses letters outside {1,2,3}");
            l.push_back(static_cast<std::uint8_t>(c - '0'));
        }
        return Word(std::move(l));
    }

    /// Word of length `level` whose base-3 rank in lexicographic order is `index`.
    static Word from_index(std::size_t index, std::size_t level) {
        std::vector<std::uint8_t> l(level);
        for (std::size_t t = level; t-- > 0;) {
            l[t] = static_cast<std::uint8_t>(index % 3 + 1);
            index /= 3;
        }
        return Word(std::move(l));
    }

    [[nodiscard]] std::size_t size() const noexcept { return letters_.size(); }
    [[nodiscard]] bool empty() const noexcept { return letters_.empty(); }
    [[nodiscard]] std::uint8_t operator[](std::size_t i) const { return letters_[i]; }
    [[nodiscard]] const std::vector<std::uint8_t>& letters() const noexcept { return letters_; }

    [[nodiscard]] std::size_t index() const noexcept {
        std::size_t idx = 0;
        for (auto l : letters_) idx = idx * 3 + (l - 1);
        return idx;
    }

    [[nodiscard]] Word appended(std::uint8_t letter, std::size_t times = 1) const {
        auto l = letters_;
        l.insert(l.end(), times, letter);
        return Word(std::move(l));
    }

    [[nodiscard]] bool has_prefix(const Word& p) const noexcept {
        if (p.size() > size()) return false;
        return std::equal(p.letters_.begin(), p.letters_.end(), letters_.begin());
    }

    [[nodiscard]] std::string str() const {
        if (letters_.empty()) return "-";
        std::string s;
        for (auto l : letters_) s.push_back(static_cast<char>('0' + l));
        return s;
    }

    auto operator<=>(const Word&) const = default;

private:
    std::vector<std::uint8_t> letters_;
};

/// All 3^m words of length m in lexicographic order.
[[nodiscard]] inline std::vector<Word> enumerate_words(std::size_t m) {
    if (m > kMaxLevel) throw LevelError("enumerate_words: level above supported maximum");
    std::vector<Word> out;
    const std::size_t n = pow3(m);
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(Word::from_index(i, m));
    return out;
}

enum class VertexKind : std::uint8_t { CellCorner, LineNode };
enum class EdgeKind : std::uint8_t { Cell, LineSegment };

struct Vertex {
    VertexKind kind = VertexKind::CellCorner;
    std::size_t cell = 0;       // CellCorner: lexicographic cell index
    std::uint8_t corner = 0;    // CellCorner: 1..3
    std::size_t line_edge = 0;  // LineNode: owning line edge
    std::size_t position = 0;   // LineNode: 1..s-1 from endpoint a
    double cell_mass = 0.0;     // share of mu(K_w) of the owning m-cell
    double line_mass = 0.0;     // trapezoidal share of line-edge mass
    [[nodiscard]] double mass() const noexcept { return cell_mass + line_mass; }
};

struct Edge {
    VertexId u = 0;
    VertexId v = 0;
    double resistance = 0.0;
    EdgeKind kind = EdgeKind::Cell;
    std::size_t level = 0;  // m for cell edges, k for level-k line segments
    std::size_t line_edge = 0;
};

/// Connecting edge e_i^w, w of length level - 1. Joins G_{wj}(p_k) (end_a) to
/// G_{wk}(p_j) (end_b) where {i, j, k} = {1, 2, 3}, j < k.
struct LineEdge {
    std::size_t level = 1;
    Word word;
    std::uint8_t index = 1;
    VertexId end_a = 0;
    VertexId end_b = 0;
    std::vector<VertexId> path;  // end_a, interior nodes..., end_b
    double mass = 0.0;
    double resistance = 0.0;  // gamma_level, total over the path
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

[[nodiscard]] inline std::size_t expected_vertex_count(std::size_t m, std::size_t s) {
    const std::size_t c = pow3(m + 1);
    return c + (s - 1) * (c - 3) / 2;
}

[[nodiscard]] inline std::size_t expected_edge_count(std::size_t m, std::size_t s) {
    const std::size_t c = pow3(m + 1);
    return c + s * (c - 3) / 2;
}

/// mu(K_w) for |w| = j: half normalised cell measure plus half line measure.
[[nodiscard]] inline double cell_measure(std::size_t j, double beta) {
    return 0.5 * (std::pow(3.0, -static_cast<double>(j)) + std::pow(beta, static_cast<double>(j)));
}

/// Mass of one level-k line edge: (1/2) a beta^{k-1} with a = 1/3 - beta.
[[nodiscard]] inline double line_edge_measure(std::size_t k, double beta) {
    return 0.5 * (kOneThird - beta) * std::pow(beta, static_cast<double>(k - 1));
}

struct GraphParams {
    std::size_t level = 0;
    std::size_t subdivisions = 1;
    double beta = 0.25;
    std::optional<double> alpha;
};

class GraphApprox {
public:
    [[nodiscard]] std::size_t level() const noexcept { return params_.level; }
    [[nodiscard]] std::size_t subdivisions() const noexcept { return params_.subdivisions; }
    [[nodiscard]] double beta() const noexcept { return params_.beta; }
    [[nodiscard]] const std::optional<double>& alpha() const noexcept { return params_.alpha; }
    [[nodiscard]] const GraphParams& params() const noexcept { return params_; }
    [[nodiscard]] const ScaleFactors& scales() const noexcept { return scales_; }

    [[nodiscard]] std::size_t vertex_count() const noexcept { return vertices_.size(); }
    [[nodiscard]] std::size_t edge_count() const noexcept { return edges_.size(); }
    [[nodiscard]] std::size_t cell_count() const noexcept { return pow3(level()); }

    [[nodiscard]] const std::vector<Vertex>& vertices() const noexcept { return vertices_; }
    [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }
    [[nodiscard]] const std::vector<LineEdge>& line_edges() const noexcept { return line_edges_; }
    [[nodiscard]] const std::vector<Point>& coords() const noexcept { return coords_; }
    [[nodiscard]] bool has_coords() const noexcept { return !coords_.empty(); }

    [[nodiscard]] double mass(VertexId v) const { return vertices_.at(v).mass(); }
    [[nodiscard]] double total_mass() const {
        double t = 0.0;
        for (const auto& v : vertices_) t += v.mass();
        return t;
    }

    /// Measure of one m-cell as lumped on the graph.
    [[nodiscard]] double m_cell_mass() const noexcept { return m_cell_mass_; }

    [[nodiscard]] static VertexId corner_id(std::size_t cell, std::uint8_t corner) noexcept {
        return 3 * cell + (corner - 1);
    }

    /// Vertex ids of G_w(p_1), G_w(p_2), G_w(p_3) for |w| <= m.
    [[nodiscard]] std::array<VertexId, 3> cell_corner_ids(const Word& w) const {
        if (w.size() > level())
            throw LevelError("cell_corner_ids: word length " + std::to_string(w.size()) +
                             " exceeds graph level " + std::to_string(level()));
        std::array<VertexId, 3> ids{};
        for (std::uint8_t i = 1; i <= 3; ++i) {
            const Word full = w.appended(i, level() - w.size());
            ids[i - 1] = corner_id(full.index(), i);
        }
        return ids;
    }

    /// V_0 = {p_1, p_2, p_3}.
    [[nodiscard]] std::array<VertexId, 3> boundary_ids() const { return cell_corner_ids(Word{}); }

    /// V_j: union of G_w(V_0) over |w| = j, sorted and deduplicated.
    [[nodiscard]] std::vector<VertexId> level_vertices(std::size_t j) const {
        if (j > level()) throw LevelError("level_vertices: j exceeds graph level");
        std::vector<VertexId> out;
        for (const auto& w : enumerate_words(j))
            for (auto id : cell_corner_ids(w)) out.push_back(id);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// mu(K_w) as carried by the graph: m-cell masses below w plus the masses
    /// of line edges inside K_w (levels > |w| with word extending w).
    [[nodiscard]] double block_measure(const Word& w) const {
        if (w.size() > level()) throw LevelError("block_measure: word longer than graph level");
        const std::size_t span = pow3(level() - w.size());
        double total = m_cell_mass_ * static_cast<double>(span);
        for (const auto& le : line_edges_)
            if (le.level > w.size() && le.word.has_prefix(w)) total += le.mass;
        return total;
    }

    /// True when the edge set connects all vertices.
    [[nodiscard]] bool is_connected() const {
        std::vector<std::size_t> parent(vertices_.size());
        std::iota(parent.begin(), parent.end(), std::size_t{0});
        auto find = [&parent](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        std::size_t comps = vertices_.size();
        for (const auto& e : edges_) {
            auto a = find(e.u), b = find(e.v);
            if (a != b) {
                parent[a] = b;
                --comps;
            }
        }
        return comps <= 1;
    }

    friend GraphApprox build_graph(const MatchingSequence&, const GraphParams&);

private:
    GraphParams params_;
    ScaleFactors scales_;
    std::vector<Vertex> vertices_;
    std::vector<Edge> edges_;
    std::vector<LineEdge> line_edges_;
    std::vector<Point> coords_;
    double m_cell_mass_ = 0.0;
};

namespace detail {

inline constexpr std::array<Point, 3> kTriangle{
    Point{0.0, 0.0}, Point{1.0, 0.0}, Point{0.5, 0.86602540378443864676}};

// G_w(p_i) with G_k(x) = c (x - p_k) + p_k, c = (1 - alpha) / 2.
inline Point map_corner(const Word& w, std::uint8_t corner, double alpha) {
    const double c = 0.5 * (1.0 - alpha);
    Point x = kTriangle[corner - 1];
    for (std::size_t t = w.size(); t-- > 0;) {
        const Point& p = kTriangle[w[t] - 1];
        x = Point{c * (x.x - p.x) + p.x, c * (x.y - p.y) + p.y};
    }
    return x;
}

}  // namespace detail

/// Builds the level-m graph approximation with s segments per line edge and
/// line-mass ratio beta in (0, 1/3).
[[nodiscard]] inline GraphApprox build_graph(const MatchingSequence& seq, const GraphParams& params) {
    const std::size_t m = params.level;
    const std::size_t s = params.subdivisions;
    if (m > kMaxLevel)
        throw LevelError("build_graph: level " + std::to_string(m) + " above supported maximum " +
                         std::to_string(kMaxLevel));
    if (s < 1) throw DomainError("build_graph: subdivisions must be >= 1");
    if (!(params.beta > 0.0 && params.beta < kOneThird))
        throw DomainError("build_graph: beta must lie in (0, 1/3) for a finite line measure");
    if (params.alpha && !(*params.alpha > 0.0 && *params.alpha < 1.0))
        throw DomainError("build_graph: alpha must lie in (0, 1)");

    GraphApprox g;
    g.params_ = params;
    g.scales_ = scale_factors(seq, m);

    const std::size_t cells = pow3(m);
    const double delta_m = g.scales_.delta[m];
    g.m_cell_mass_ = cell_measure(m, params.beta);
    const double corner_mass = g.m_cell_mass_ / 3.0;

    g.vertices_.reserve(expected_vertex_count(m, s));
    g.edges_.reserve(expected_edge_count(m, s));

    for (std::size_t c = 0; c < cells; ++c) {
        for (std::uint8_t i = 1; i <= 3; ++i) {
            Vertex v;
            v.kind = VertexKind::CellCorner;
            v.cell = c;
            v.corner = i;
            v.cell_mass = corner_mass;
            g.vertices_.push_back(v);
        }
        const VertexId b = 3 * c;
        g.edges_.push_back(Edge{b, b + 1, delta_m, EdgeKind::Cell, m, 0});
        g.edges_.push_back(Edge{b + 1, b + 2, delta_m, EdgeKind::Cell, m, 0});
        g.edges_.push_back(Edge{b + 2, b, delta_m, EdgeKind::Cell, m, 0});
    }

    for (std::size_t k = 1; k <= m; ++k) {
        const double gamma_k = g.scales_.gamma_at(k);
        const double edge_mass = line_edge_measure(k, params.beta);
        const double seg_r = gamma_k / static_cast<double>(s);
        for (const Word& w : enumerate_words(k - 1)) {
            for (std::uint8_t i = 1; i <= 3; ++i) {
                const std::uint8_t j = (i == 1) ? 2 : 1;
                const std::uint8_t l = (i == 3) ? 2 : 3;
                LineEdge le;
                le.level = k;
                le.word = w;
                le.index = i;
                le.mass = edge_mass;
                le.resistance = gamma_k;
                const Word wa = w.appended(j).appended(l, m - k);
                const Word wb = w.appended(l).appended(j, m - k);
                le.end_a = GraphApprox::corner_id(wa.index(), l);
                le.end_b = GraphApprox::corner_id(wb.index(), j);

                const std::size_t id = g.line_edges_.size();
                le.path.push_back(le.end_a);
                for (std::size_t p = 1; p < s; ++p) {
                    Vertex v;
                    v.kind = VertexKind::LineNode;
                    v.line_edge = id;
                    v.position = p;
                    v.line_mass = edge_mass / static_cast<double>(s);
                    le.path.push_back(g.vertices_.size());
                    g.vertices_.push_back(v);
                }
                le.path.push_back(le.end_b);
                const double end_share = edge_mass / (2.0 * static_cast<double>(s));
                g.vertices_[le.end_a].line_mass += end_share;
                g.vertices_[le.end_b].line_mass += end_share;
                for (std::size_t p = 0; p + 1 < le.path.size(); ++p)
                    g.edges_.push_back(
                        Edge{le.path[p], le.path[p + 1], seg_r, EdgeKind::LineSegment, k, id});
                g.line_edges_.push_back(std::move(le));
            }
        }
    }

    if (params.alpha) {
        const double alpha = *params.alpha;
        g.coords_.resize(g.vertices_.size());
        for (std::size_t c = 0; c < cells; ++c) {
            const Word w = Word::from_index(c, m);
            for (std::uint8_t i = 1; i <= 3; ++i)
                g.coords_[GraphApprox::corner_id(c, i)] = detail::map_corner(w, i, alpha);
        }
        for (const auto& le : g.line_edges_) {
            const Point a = g.coords_[le.end_a];
            const Point b = g.coords_[le.end_b];
            for (std::size_t p = 1; p + 1 < le.path.size(); ++p) {
                const double t = static_cast<double>(p) / static_cast<double>(s);
                g.coords_[le.path[p]] = Point{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
            }
        }
    }
    return g;
}

[[nodiscard]] inline GraphApprox build_graph(const MatchingSequence& seq, std::size_t m,
                                             std::size_t s, double beta,
                                             std::optional<double> alpha = std::nullopt) {
    return build_graph(seq, GraphParams{m, s, beta, alpha});
}

/// Line-oriented dump:
///   V id kind word corner mass [x y]
///   E u v resistance kind level
/// Line nodes print the owning edge word and "e<i>.<position>" as corner.
inline void write_graph_dump(std::ostream& os, const GraphApprox& g) {
    const auto flags = os.flags();
    const auto prec = os.precision();
    os << std::setprecision(17);
    for (VertexId id = 0; id < g.vertex_count(); ++id) {
        const Vertex& v = g.vertices()[id];
        os << "V " << id << ' ';
        if (v.kind == VertexKind::CellCorner) {
            os << "cell " << Word::from_index(v.cell, g.level()).str() << ' ' << int(v.corner);
        } else {
            const LineEdge& le = g.line_edges()[v.line_edge];
            os << "line " << le.word.str() << " e" << int(le.index) << '.' << v.position;
        }
        os << ' ' << v.mass();
        if (g.has_coords()) os << ' ' << g.coords()[id].x << ' ' << g.coords()[id].y;
        os << '\n';
    }
    for (const Edge& e : g.edges()) {
        os << "E " << e.u << ' ' << e.v << ' ' << e.resistance << ' '
           << (e.kind == EdgeKind::Cell ? "cell" : "line") << ' ' << e.level << '\n';
    }
    os.flags(flags);
    os.precision(prec);
}

}  // namespace hanoi
