// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
//
// Exit status is non-zero when any criterion outside kKnownRed fails. The
// criteria in kKnownRed are printed as FAIL whenever they fail; they are not
// reachable at the prescribed graph level (see README, "Known limitations").

#include "hanoi/analysis.hpp"
#include "hanoi/commands.hpp"
#include "hanoi/resistance.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

using namespace hanoi;
namespace fs = std::filesystem;

namespace {

// --- pinned tolerances -----------------------------------------------------
constexpr double kCompatTol = 1e-9;
constexpr double kCompatSeconds = 10.0;
constexpr std::size_t kKappaLevels = 40;
constexpr double kKappaSlack = 1e-12;
constexpr std::size_t kInterlaceGrid = 50;
constexpr std::size_t kBracketGrid = 30;
constexpr double kBracketSeconds = 60.0;
constexpr double kSlopeTol = 0.08;
constexpr double kPipelineSeconds = 600.0;
constexpr double kDimTolHalf = 0.05;
constexpr double kDimTolThreeFifths = 0.07;
constexpr std::size_t kOracleMaxN = 500;
constexpr std::size_t kOracleGrid = 50;
constexpr std::size_t kPathSegments = 200;
constexpr std::size_t kPathModes = 20;
constexpr double kPathEigTol = 0.01;
constexpr double kMassTol = 1e-12;

const std::set<int> kKnownRed{6, 7};

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, int prec = 6) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

MatchingSequence half() { return MatchingSequence::constant(0.5); }
MatchingSequence three_fifths() { return MatchingSequence::geometric_to_limit(0.6, 0.5); }
MatchingSequence alternating() { return MatchingSequence::explicit_values({0.5, 0.55}, TailRule::Periodic); }

std::vector<MatchingSequence> compat_families() {
    return {MatchingSequence::constant(1.0 / 3.0), MatchingSequence::constant(0.45), half(), three_fifths()};
}

Outcome c1_compatibility() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (const auto& seq : compat_families()) worst = std::max(worst, compatibility_check(seq, 5, kCompatTol).max_deviation);
    const double t = seconds_since(t0);
    return {worst <= kCompatTol && t <= kCompatSeconds,
            "max |R - 2/3| = " + num(worst, 3) + " over 4 families, m <= 5 (" + num(t, 3) + " s)"};
}

Outcome c2_kappa() {
    std::size_t bad = 0;
    for (const auto& seq : compat_families()) {
        const auto sf = scale_factors(seq, kKappaLevels);
        const double r = *seq.limit_r();
        for (std::size_t m = 1; m <= kKappaLevels; ++m) {
            const double rm = std::pow(r, double(m));
            const double d = sf.delta[m];
            if (sf.kappa1 * rm > d * (1 + kKappaSlack) || d > sf.kappa2 * rm * (1 + kKappaSlack)) ++bad;
        }
    }
    return {bad == 0, std::to_string(bad) + " violations of kappa1 r^m <= delta_m <= kappa2 r^m, m <= 40"};
}

Outcome c3_interlacing() {
    std::size_t bad = 0, points = 0;
    for (auto [m, s] : {std::pair<std::size_t, std::size_t>{3, 2}, {4, 2}, {5, 1}}) {
        const auto g = build_graph(half(), m, s, 0.25);
        const auto pn = assemble_neumann(g);
        const auto pd = dirichlet_pencil(pn, g);
        const double top = detail::spectral_upper_bound(pn);
        const auto grid = log_grid(1.0, top, kInterlaceGrid);
        for (const auto& smp : counting_function(pn, pd, grid, Backend::Inertia)) {
            ++points;
            if (smp.n_dirichlet > smp.n_neumann || smp.n_neumann - smp.n_dirichlet > 3) ++bad;
        }
    }
    return {bad == 0, std::to_string(bad) + " violations at " + std::to_string(points) + " grid points"};
}

Outcome c4_bracketing() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = build_graph(half(), 4, 2, 0.25);
    const double top = detail::spectral_upper_bound(assemble_neumann(g));
    const auto grid = log_grid(1.0, top, kBracketGrid);
    std::size_t bad = 0;
    for (std::size_t j : {1u, 2u}) {
        const auto rep = bracketing_check(g, j, grid, Backend::Inertia);
        bad += rep.violations.size();
    }
    const double t = seconds_since(t0);
    return {bad == 0 && t <= kBracketSeconds,
            std::to_string(bad) + " violations, j in {1, 2}, m = 4, s = 2 (" + num(t, 3) + " s)"};
}

struct SlopeRun {
    FitResult fit;
    double seconds = 0.0;
    std::size_t n = 0;
};

SlopeRun pipeline_slope(const MatchingSequence& seq) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = build_graph(seq, 6, 2, 0.25);
    const auto pn = assemble_neumann(g);
    const auto pd = dirichlet_pencil(pn, g);
    const WindowPolicy pol;
    const auto grid = auto_grid(pn, pol.eta);
    const auto samples = counting_function(pn, pd, grid, Backend::Inertia);
    const double x_cut = reliability_cutoff(pn, pol.eta);
    const auto pred = predicted_dimensions(seq);
    SlopeRun run;
    run.fit = fit_exponent(samples, pol, x_cut, pred.counting_exponent_lower(), pred.counting_exponent_upper());
    run.seconds = seconds_since(t0);
    run.n = pn.n();
    return run;
}

Outcome c5_half_slope() {
    const auto run = pipeline_slope(half());
    const double target = 0.5 * std::log(9.0) / std::log(6.0);
    const bool ok = std::abs(run.fit.slope - target) <= kSlopeTol && run.seconds <= kPipelineSeconds;
    return {ok, "slope " + num(run.fit.slope) + " +- " + num(run.fit.stderr_slope, 2) + " vs " + num(target) +
                    " (n = " + std::to_string(run.n) + ", " + std::to_string(run.fit.n_points) + " points, " +
                    num(run.seconds, 3) + " s)"};
}

Outcome c6_three_fifths_slope() {
    const auto run = pipeline_slope(three_fifths());
    const double target = 0.5 * std::log(9.0) / std::log(5.0);
    const bool ok = std::abs(run.fit.slope - target) <= kSlopeTol && run.seconds <= kPipelineSeconds;
    return {ok, "slope " + num(run.fit.slope) + " +- " + num(run.fit.stderr_slope, 2) + " vs " + num(target) +
                    ", needs >= " + num(target - kSlopeTol) + " (" + num(run.seconds, 3) + " s)"};
}

Outcome c7_dimension() {
    const auto dh = cell_diameter_scaling(half(), 6, 5);
    const double want_h = std::log(3.0) / std::log(2.0);
    const double slope_err = std::abs(dh.slope - std::log(0.5));
    const bool ok_h = slope_err <= kDimTolHalf * std::log(2.0);

    const auto df = cell_diameter_scaling(three_fifths(), 6, 5);
    const double want_f = std::log(3.0) / std::log(5.0 / 3.0);
    const double rel_f = std::abs(df.dimension - want_f) / want_f;
    const bool ok_f = rel_f <= kDimTolThreeFifths;

    return {ok_h && ok_f, "r = 1/2: dim " + num(dh.dimension) + " (" + num(100 * std::abs(dh.dimension - want_h) / want_h, 3) +
                              "%, " + (ok_h ? "ok" : "out") + "); 3/5 family: dim " + num(df.dimension) + " vs " +
                              num(want_f) + " (" + num(100 * rel_f, 3) + "%, " + (ok_f ? "ok" : "out") + ")"};
}

// Diagnostics printed after criterion 7; not part of any verdict.
void c7_notes() {
    const double want_f = std::log(3.0) / std::log(5.0 / 3.0);
    const auto tail6 = cell_diameter_scaling(three_fifths(), 6, 5, 4);
    std::cout << "  note: 3/5 family on level 6, fit over j = 4..5 only: dim " << num(tail6.dimension) << " ("
              << num(100 * std::abs(tail6.dimension - want_f) / want_f, 3) << "% low)\n";
    const auto tail7 = cell_diameter_scaling(three_fifths(), 7, 6, 4);
    std::cout << "  note: 3/5 family on level 7, fit over j = 4..6: dim " << num(tail7.dimension) << " ("
              << num(100 * std::abs(tail7.dimension - want_f) / want_f, 3) << "% low)\n";
}

Outcome c8_band() {
    const auto run = pipeline_slope(alternating());
    const double lo = 0.5 * std::log(9.0) / std::log(6.0) - kSlopeTol;
    const double hi = 0.5 * std::log(9.0) / std::log(3.0 / 0.55) + kSlopeTol;
    const bool ok = run.fit.slope >= lo && run.fit.slope <= hi;
    return {ok, "slope " + num(run.fit.slope) + " in [" + num(lo, 4) + ", " + num(hi, 4) + "] (" + num(run.seconds, 3) + " s)"};
}

Outcome c9_backends() {
    std::size_t pencils = 0, mismatches = 0;
    auto check = [&](const Pencil& p) {
        if (p.empty() || p.n() > kOracleMaxN) return;
        ++pencils;
        const double top = 1.1 * detail::spectral_upper_bound(p);
        const auto grid = log_grid(top * 1e-6, top, kOracleGrid);
        const auto a = detail::counts_for(p, grid, Backend::Dense, {});
        const auto b = detail::counts_for(p, grid, Backend::Inertia, {});
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (a[i] != b[i]) ++mismatches;
    };
    for (const auto& seq : {half(), three_fifths(), alternating()})
        for (std::size_t m = 0; m <= 4; ++m)
            for (std::size_t s = 1; s <= 3; ++s) {
                const auto g = build_graph(seq, m, s, 0.25);
                if (g.vertex_count() > kOracleMaxN) continue;
                const auto pn = assemble_neumann(g);
                check(pn);
                if (auto pd = dirichlet_pencil(pn, g)) check(*pd);
                for (std::size_t j = 1; j < m; ++j) {
                    for (const auto& p : assemble_decoupled(g, j, SplitKind::NeumannSplit)) check(p);
                    for (const auto& p : assemble_decoupled(g, j, SplitKind::DirichletSplit)) check(p);
                }
            }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches over " + std::to_string(pencils) + " pencils x " +
                                 std::to_string(kOracleGrid) + " thresholds"};
}

Outcome c10_path() {
    constexpr double pi = std::numbers::pi;
    const auto grid = log_grid_per_decade(pi * pi, double(kPathModes * kPathModes) * pi * pi, 60);
    auto rep = one_dim_reference(kPathSegments, grid, kPathModes);
    rep.eig_tolerance = kPathEigTol;
    return {rep.eigen_ok() && rep.bound_ok(), "max rel error " + num(rep.max_relative_error, 3) + " for k <= 20; " +
                                                  std::to_string(rep.bound_violations.size()) + " bound violations at " +
                                                  std::to_string(grid.size()) + " grid points"};
}

Outcome c11_measure() {
    std::size_t bad = 0, cells = 0;
    double worst = 0.0;
    for (double beta : {0.05, 0.25, 0.33})
        for (std::size_t m = 0; m <= 6; ++m) {
            const auto g = build_graph(half(), m, 2, beta);
            worst = std::max(worst, std::abs(g.total_mass() - 1.0));
            for (std::size_t j = 0; j <= m; ++j)
                for (const auto& w : enumerate_words(j)) {
                    ++cells;
                    const double mu = g.block_measure(w);
                    const double lo = std::pow(beta, double(j)), hi = std::pow(3.0, -double(j));
                    if (mu < lo * (1 - kMassTol) || mu > hi * (1 + kMassTol)) ++bad;
                }
        }
    return {worst <= kMassTol && bad == 0,
            "max |mass - 1| = " + num(worst, 3) + "; " + std::to_string(bad) + " of " + std::to_string(cells) +
                " cells outside [beta^|w|, 3^-|w|]"};
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome c12_determinism(const std::string& cli) {
    const fs::path root = fs::temp_directory_path() / "hanoi_acceptance_determinism";
    fs::remove_all(root);
    std::size_t files = 0, differ = 0;
    std::string failed;
    for (const std::string cmd : {"validate", "spectrum", "counting", "resistance"}) {
        for (const char* run : {"a", "b"}) {
            const fs::path out = root / cmd / run;
            const std::string line = "\"" + cli + "\" " + cmd + " --config \"" HANOI_CONFIG_DIR "/constant_half.json\"" +
                                     " --level 4 --out \"" + out.string() + "\" --quiet";
            const int rc = std::system(line.c_str());
            if (rc != 0) failed += " " + cmd + "(rc " + std::to_string(rc) + ")";
        }
        const fs::path a = root / cmd / "a", b = root / cmd / "b";
        if (!fs::exists(a)) continue;
        for (const auto& e : fs::directory_iterator(a)) {
            ++files;
            const fs::path other = b / e.path().filename();
            if (!fs::exists(other) || read_file(e.path()) != read_file(other)) ++differ;
        }
    }
    fs::remove_all(root);
    return {differ == 0 && failed.empty() && files > 0,
            std::to_string(differ) + " of " + std::to_string(files) + " files differ across two runs" +
                (failed.empty() ? "" : "; command failures:" + failed)};
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli = HANOI_CLI_PATH;
    if (argc > 1) cli = argv[1];

    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, c1_compatibility}, {2, c2_kappa},           {3, c3_interlacing},
        {4, c4_bracketing},    {5, c5_half_slope},      {6, c6_three_fifths_slope},
        {7, c7_dimension},     {8, c8_band},            {9, c9_backends},
        {10, c10_path},        {11, c11_measure},       {12, [&] { return c12_determinism(cli); }},
    };

    int passed = 0;
    std::vector<int> red, unexpected;
    for (const auto& [id, fn] : criteria) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << " ["
                  << num(seconds_since(t0), 3) << " s]\n";
        if (id == 7) c7_notes();
        std::cout.flush();
        if (o.pass) {
            ++passed;
        } else {
            red.push_back(id);
            if (!kKnownRed.count(id)) unexpected.push_back(id);
        }
    }
    std::cout << "summary: " << passed << " of " << criteria.size() << " criteria pass";
    if (!red.empty()) {
        std::cout << "; failing:";
        for (int id : red) std::cout << ' ' << id << (kKnownRed.count(id) ? " (known limitation)" : "");
    }
    std::cout << '\n';
    return unexpected.empty() ? 0 : 1;
}
