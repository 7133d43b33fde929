#pragma once

// Eigenvalue counting functions, power-law fitting, Weyl ratios,
// Dirichlet-Neumann bracketing and the one-dimensional reference model.

#include "hanoi/assembly.hpp"
#include "hanoi/eigensolve.hpp"
#include "hanoi/errors.hpp"
#include "hanoi/geometry.hpp"
#include "hanoi/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace hanoi {

struct CountingSample {
    double x = 0.0;
    std::size_t n_dirichlet = 0;
    std::size_t n_neumann = 0;
    std::optional<std::size_t> lower_sum;
    std::optional<std::size_t> upper_sum;
    std::optional<std::size_t> decouple_level;
};

enum class Backend : std::uint8_t { Dense, Inertia };

[[nodiscard]] inline const char* to_string(Backend b) noexcept {
    return b == Backend::Dense ? "dense" : "inertia";
}

/// n log-spaced points from lo to hi inclusive.
[[nodiscard]] inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 2) throw DomainError("log_grid: need 0 < lo < hi and n >= 2");
    std::vector<double> out(n);
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * double(i) / double(n - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

/// Log grid with a fixed density per decade, lo and hi included.
[[nodiscard]] inline std::vector<double> log_grid_per_decade(double lo, double hi, std::size_t per_decade) {
    if (!(lo > 0.0) || !(hi > lo) || per_decade < 1) throw DomainError("log_grid_per_decade: bad range");
    const std::size_t steps =
        std::max<std::size_t>(1, std::size_t(std::ceil(std::log10(hi / lo) * double(per_decade))));
    return log_grid(lo, hi, steps + 1);
}

namespace detail {

inline void check_grid(const std::vector<double>& grid) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0) || !std::isfinite(grid[i]))
            throw DomainError("counting grid must be positive and finite");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw DomainError("counting grid must be strictly increasing");
    }
}

/// Right-continuous counts on a grid with the same upward shift as the
/// inertia path, so both backends agree on ties.
inline std::vector<std::size_t> counts_for(const Pencil& p, const std::vector<double>& grid, Backend backend,
                                           const SolverOptions& opts) {
    if (p.empty()) return std::vector<std::size_t>(grid.size(), 0);
    if (backend == Backend::Inertia) return count_grid(p, grid, opts);
    const Spectrum s = eig_dense_values(p, opts);
    std::vector<std::size_t> out;
    out.reserve(grid.size());
    for (double x : grid) out.push_back(s.count_at_most(x * (1.0 + opts.eps_shift)));
    return out;
}

}  // namespace detail

/// N_N and N_D on the grid. An absent Dirichlet pencil (all vertices
/// constrained) counts zero everywhere.
[[nodiscard]] inline std::vector<CountingSample> counting_function(const Pencil& neumann,
                                                                   const std::optional<Pencil>& dirichlet,
                                                                   const std::vector<double>& grid,
                                                                   Backend backend, const SolverOptions& opts = {}) {
    detail::check_grid(grid);
    const auto nn = detail::counts_for(neumann, grid, backend, opts);
    std::vector<std::size_t> nd(grid.size(), 0);
    if (dirichlet) nd = detail::counts_for(*dirichlet, grid, backend, opts);
    std::vector<CountingSample> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out[i].x = grid[i];
        out[i].n_neumann = nn[i];
        out[i].n_dirichlet = nd[i];
    }
    return out;
}

/// Dirichlet pencil on V_0, or nullopt when nothing is left (level 0).
[[nodiscard]] inline std::optional<Pencil> dirichlet_pencil(const Pencil& neumann, const GraphApprox& g) {
    if (g.vertex_count() <= 3) return std::nullopt;
    return apply_dirichlet(neumann, g, DirichletSet::v0());
}

struct WindowPolicy {
    std::size_t n_min = 10;
    double eta = 0.2;
    std::size_t min_points = 8;
    double tolerance = 0.08;
};

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double x_lo = 0.0;
    double x_hi = 0.0;
    std::size_t n_points = 0;
    double stderr_slope = 0.0;
    double predicted_lower = 0.0;
    double predicted_upper = 0.0;
    double tolerance = 0.08;

    /// Distance from the prediction (or from the band when lower < upper).
    [[nodiscard]] double deviation() const noexcept {
        if (slope < predicted_lower) return predicted_lower - slope;
        if (slope > predicted_upper) return slope - predicted_upper;
        return 0.0;
    }
    [[nodiscard]] bool passed() const noexcept { return deviation() <= tolerance; }
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
};

[[nodiscard]] inline LinearFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t k = xs.size();
    if (k < 2) throw InsufficientDataError("least squares needs at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < k; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= double(k);
    my /= double(k);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < k; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw InsufficientDataError("least squares: abscissae are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (k > 2) {
        double ss = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const double r = ys[i] - (f.intercept + f.slope * xs[i]);
            ss += r * r;
        }
        f.stderr_slope = std::sqrt(ss / double(k - 2) / sxx);
    }
    return f;
}

/// Indices of samples kept by the window policy: N >= n_min and x <= x_cut.
[[nodiscard]] inline std::vector<std::size_t> fit_window(const std::vector<CountingSample>& samples,
                                                         const WindowPolicy& policy, double x_cut) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].n_neumann >= policy.n_min && samples[i].x <= x_cut) idx.push_back(i);
    return idx;
}

/// Least-squares slope of log N_N against log x over the given samples.
[[nodiscard]] inline FitResult fit_samples(const std::vector<CountingSample>& samples,
                                           const std::vector<std::size_t>& idx, const WindowPolicy& policy,
                                           double predicted_lower, double predicted_upper) {
    if (idx.size() < policy.min_points) {
        std::ostringstream os;
        os << "fit window holds " << idx.size() << " samples, need " << policy.min_points;
        if (!samples.empty())
            os << " (sampled x in [" << samples.front().x << ", " << samples.back().x << "], N_min "
               << policy.n_min << ")";
        throw InsufficientDataError(os.str());
    }
    std::vector<double> lx, ly;
    for (auto i : idx) {
        lx.push_back(std::log(samples[i].x));
        ly.push_back(std::log(double(samples[i].n_neumann)));
    }
    const LinearFit lf = least_squares(lx, ly);
    FitResult f;
    f.slope = lf.slope;
    f.intercept = lf.intercept;
    f.stderr_slope = lf.stderr_slope;
    f.n_points = idx.size();
    f.x_lo = samples[idx.front()].x;
    f.x_hi = samples[idx.back()].x;
    f.predicted_lower = predicted_lower;
    f.predicted_upper = predicted_upper;
    f.tolerance = policy.tolerance;
    return f;
}

[[nodiscard]] inline FitResult fit_exponent(const std::vector<CountingSample>& samples, const WindowPolicy& policy,
                                            double x_cut, double predicted_lower, double predicted_upper) {
    return fit_samples(samples, fit_window(samples, policy, x_cut), policy, predicted_lower, predicted_upper);
}

/// x_cut = lambda_{ceil(eta n)} of the Neumann pencil, by inertia bisection.
[[nodiscard]] inline double reliability_cutoff(const Pencil& neumann, double eta, const SolverOptions& opts = {}) {
    if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("eta must lie in (0, 1]");
    const auto k = std::max<std::size_t>(1, std::size_t(std::ceil(eta * double(neumann.n()))));
    return kth_eigenvalue(neumann, k, opts);
}

/// Default grid: per_decade log points between lambda_10 and x_cut.
[[nodiscard]] inline std::vector<double> auto_grid(const Pencil& neumann, double eta, std::size_t per_decade = 60,
                                                   const SolverOptions& opts = {}) {
    const std::size_t lo_k = std::min<std::size_t>(10, neumann.n());
    const double lo = kth_eigenvalue(neumann, lo_k, opts);
    const double hi = reliability_cutoff(neumann, eta, opts);
    if (!(lo > 0.0) || !(hi > lo))
        throw InsufficientDataError("auto grid: pencil too small for the lambda_10 .. x_cut range");
    return log_grid_per_decade(lo, hi, per_decade);
}

struct WeylPoint {
    double x = 0.0;
    double ratio = 0.0;
};

struct WeylSeries {
    std::vector<WeylPoint> points;
    double c1 = 0.0;  // min ratio over the window
    double c2 = 0.0;  // max ratio over the window
};

/// N_N(x) / x^{d_s/2} for every sample; envelope over the indices in `window`
/// (all samples when empty).
[[nodiscard]] inline WeylSeries weyl_ratio(const std::vector<CountingSample>& samples, double d_s,
                                           const std::vector<std::size_t>& window = {}) {
    if (!(d_s > 0.0)) throw DomainError("weyl_ratio: d_s must be positive");
    WeylSeries w;
    for (const auto& s : samples)
        w.points.push_back(WeylPoint{s.x, double(s.n_neumann) / std::pow(s.x, 0.5 * d_s)});
    std::vector<std::size_t> idx = window;
    if (idx.empty())
        for (std::size_t i = 0; i < samples.size(); ++i) idx.push_back(i);
    if (!idx.empty()) {
        w.c1 = w.c2 = w.points[idx.front()].ratio;
        for (auto i : idx) {
            w.c1 = std::min(w.c1, w.points[i].ratio);
            w.c2 = std::max(w.c2, w.points[i].ratio);
        }
    }
    return w;
}

struct BracketingViolation {
    double x = 0.0;
    std::size_t lower_sum = 0;
    std::size_t n_dirichlet = 0;
    std::size_t n_neumann = 0;
    std::size_t upper_sum = 0;
    std::string what;
};

struct BracketingReport {
    std::size_t level = 0;  // decouple level j
    std::size_t graph_level = 0;
    std::size_t neumann_components = 0;
    std::size_t dirichlet_components = 0;
    std::vector<CountingSample> samples;
    std::vector<BracketingViolation> violations;
    [[nodiscard]] bool passed() const noexcept { return violations.empty(); }
};

/// Checks lowerSum <= N_D <= N_N <= upperSum and 0 <= N_N - N_D <= 3 on the
/// grid. Violations are collected, not thrown.
[[nodiscard]] inline BracketingReport bracketing_check(const GraphApprox& g, std::size_t j,
                                                       const std::vector<double>& grid,
                                                       Backend backend = Backend::Inertia,
                                                       const SolverOptions& opts = {}) {
    if (j > 0 && j >= g.level()) throw LevelError("bracketing_check: decouple level must be below the graph level");
    const Pencil pn = assemble_neumann(g);
    const auto pd = dirichlet_pencil(pn, g);
    BracketingReport rep;
    rep.level = j;
    rep.graph_level = g.level();
    rep.samples = counting_function(pn, pd, grid, backend, opts);

    const auto upper = assemble_decoupled(g, j, SplitKind::NeumannSplit);
    const auto lower = assemble_decoupled(g, j, SplitKind::DirichletSplit);
    rep.neumann_components = upper.size();
    rep.dirichlet_components = lower.size();
    std::vector<std::size_t> up(grid.size(), 0), lo(grid.size(), 0);
    for (const auto& p : upper) {
        const auto c = detail::counts_for(p, grid, backend, opts);
        for (std::size_t i = 0; i < grid.size(); ++i) up[i] += c[i];
    }
    for (const auto& p : lower) {
        const auto c = detail::counts_for(p, grid, backend, opts);
        for (std::size_t i = 0; i < grid.size(); ++i) lo[i] += c[i];
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto& s = rep.samples[i];
        s.lower_sum = lo[i];
        s.upper_sum = up[i];
        s.decouple_level = j;
        auto flag = [&](const char* what) {
            rep.violations.push_back(
                BracketingViolation{s.x, lo[i], s.n_dirichlet, s.n_neumann, up[i], what});
        };
        if (lo[i] > s.n_dirichlet) flag("lowerSum > N_D");
        if (s.n_dirichlet > s.n_neumann) flag("N_D > N_N");
        if (s.n_neumann > s.n_dirichlet + 3) flag("N_N - N_D > 3");
        if (s.n_neumann > up[i]) flag("N_N > upperSum");
    }
    return rep;
}

/// Free-free path on [0, 1] with s segments, unit total resistance and mass.
[[nodiscard]] inline Pencil path_pencil(std::size_t s) {
    if (s < 1) throw DomainError("path_pencil: s must be >= 1");
    const double h = 1.0 / double(s);
    std::vector<Conductor> cs;
    for (std::size_t i = 0; i < s; ++i) cs.push_back(Conductor{i, i + 1, h});
    std::vector<double> m(s + 1, h);
    m.front() = m.back() = 0.5 * h;
    return assemble_pencil(s + 1, cs, std::move(m), Boundary{BoundaryKind::Neumann, 0});
}

struct OneDimReport {
    std::size_t subdivisions = 0;
    std::size_t k_max = 0;  // eigenvalues compared: k = 1..k_max
    double max_relative_error = 0.0;
    std::vector<double> eigenvalues;  // lambda_1..lambda_{k_max} (zero mode excluded)
    std::vector<CountingSample> samples;  // n_neumann only
    double resolved_limit = 0.0;  // (k_max pi)^2
    std::vector<double> bound_violations;  // grid x with N(x) > sqrt(x)/pi + 1
    double eig_tolerance = 0.01;
    [[nodiscard]] bool eigen_ok() const noexcept { return max_relative_error <= eig_tolerance; }
    [[nodiscard]] bool bound_ok() const noexcept { return bound_violations.empty(); }
};

/// Compares the path spectrum with (k pi)^2 for k <= k_max (default s / 10)
/// and checks N(x) <= sqrt(x)/pi + 1 on grid points up to (k_max pi)^2.
[[nodiscard]] inline OneDimReport one_dim_reference(std::size_t s, const std::vector<double>& grid,
                                                    std::optional<std::size_t> k_max = {},
                                                    const SolverOptions& opts = {}) {
    if (s < 2) throw DomainError("one_dim_reference: s must be >= 2");
    constexpr double pi = std::numbers::pi;
    const Pencil p = path_pencil(s);
    const Spectrum sp = eig_dense_values(p, opts);
    OneDimReport rep;
    rep.subdivisions = s;
    rep.k_max = std::min(k_max.value_or(s / 10), s);
    for (std::size_t k = 1; k <= rep.k_max; ++k) {
        const double exact = (double(k) * pi) * (double(k) * pi);
        rep.eigenvalues.push_back(sp.eigenvalues[k]);
        rep.max_relative_error = std::max(rep.max_relative_error, std::abs(sp.eigenvalues[k] - exact) / exact);
    }
    rep.resolved_limit = (double(rep.k_max) * pi) * (double(rep.k_max) * pi);
    if (!grid.empty()) {
        rep.samples = counting_function(p, std::nullopt, grid, Backend::Dense, opts);
        for (const auto& smp : rep.samples) {
            if (smp.x > rep.resolved_limit) continue;
            const double bound = std::sqrt(smp.x) / pi + 1.0;
            if (double(smp.n_neumann) > bound * (1.0 + 1e-12)) rep.bound_violations.push_back(smp.x);
        }
    }
    return rep;
}

/// Discrete self-similarity of the fractal sub-form: Q_m(u) against
/// sum_i Q_{m-1}(u o G_i). Returns the absolute difference.
[[nodiscard]] inline double self_similarity_defect(const GraphApprox& g, const GraphApprox& coarse, const Vector& u) {
    double rhs = 0.0;
    for (std::uint8_t i = 1; i <= 3; ++i) rhs += fractal_form(coarse, compose_with_map(g, coarse, i, u));
    return std::abs(fractal_form(g, u) - rhs);
}

}  // namespace hanoi
