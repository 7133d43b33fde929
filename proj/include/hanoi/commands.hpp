#pragma once

// Command implementations behind the CLI. Every command writes its files
// atomically (temporary file, then rename) and stamps each with the config
// hash. Exit codes: 0 ok, 1 usage/config, 2 numerical failure,
// 3 invariant or acceptance violation.

#include "hanoi/analysis.hpp"
#include "hanoi/assembly.hpp"
#include "hanoi/config.hpp"
#include "hanoi/eigensolve.hpp"
#include "hanoi/geometry.hpp"
#include "hanoi/resistance.hpp"
#include "hanoi/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace hanoi {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNumerical = 2, kExitViolation = 3 };

struct CommandOutcome {
    int exit_code = kExitOk;
    std::vector<std::string> files;
    std::vector<std::string> lines;  // human-readable summary
};

[[nodiscard]] inline std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

/// Writes `content` to dir/name through a temporary file and a rename.
inline std::string write_atomic(const std::filesystem::path& dir, const std::string& name, const std::string& content) {
    std::filesystem::create_directories(dir);
    const auto final_path = dir / name;
    const auto tmp_path = dir / (name + ".tmp");
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io", "cannot write " + tmp_path.string());
        out << content;
        if (!out) throw Error("io", "write failed for " + tmp_path.string());
    }
    std::filesystem::rename(tmp_path, final_path);
    return final_path.string();
}

class CsvWriter {
public:
    CsvWriter(const std::string& hash, const std::vector<std::string>& columns) {
        os_ << "# config_sha256=" << hash << '\n';
        row_strings(columns);
    }
    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
        os_ << '\n';
    }
    [[nodiscard]] std::string str() const { return os_.str(); }

private:
    std::ostringstream os_;
};

[[nodiscard]] inline Json json_header(const std::string& hash, const std::string& command) {
    return Json{{"config_sha256", hash}, {"command", command}, {"tool", "hanoi"}};
}

[[nodiscard]] inline std::string json_text(Json j) { return j.dump(2) + "\n"; }

[[nodiscard]] inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

// ---------------------------------------------------------------------------
// SVG

struct SvgSeries {
    std::vector<double> x;
    std::vector<double> n;
    double fit_slope = 0.0;
    double fit_intercept = 0.0;  // natural-log intercept
    double guide_slope = 0.0;
    double fit_x_lo = 0.0;
    double fit_x_hi = 0.0;
};

/// Log-log scatter with the fitted line and a predicted-slope guide through
/// the fit midpoint. Axes and ticks are paths, so the document holds exactly
/// two <line> elements.
[[nodiscard]] inline std::string loglog_svg(const std::string& hash, const SvgSeries& s) {
    constexpr double W = 800, H = 600, L = 80, R = 30, T = 30, B = 60;
    double xmin = std::numeric_limits<double>::infinity(), xmax = 0, ymin = xmin, ymax = 0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!(s.n[i] > 0)) continue;
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, s.n[i]);
        ymax = std::max(ymax, s.n[i]);
    }
    if (!(xmax > 0)) xmin = 1, xmax = 10, ymin = 1, ymax = 10;
    const double dx0 = std::floor(std::log10(xmin)), dx1 = std::max(dx0 + 1, std::ceil(std::log10(xmax)));
    const double dy0 = std::floor(std::log10(ymin)), dy1 = std::max(dy0 + 1, std::ceil(std::log10(ymax)));
    auto px = [&](double x) { return L + (std::log10(x) - dx0) / (dx1 - dx0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (std::log10(y) - dy0) / (dy1 - dy0) * (H - T - B); };

    std::ostringstream o;
    o << std::setprecision(6);
    o << "<!-- config_sha256=" << hash << " -->\n";
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\" width=\"800\" height=\"600\">\n";
    o << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
    o << "<path class=\"axes\" d=\"M" << L << ' ' << T << " V" << H - B << " H" << W - R
      << "\" stroke=\"black\" fill=\"none\"/>\n";
    std::ostringstream ticks;
    ticks << std::setprecision(6);
    for (double d = dx0; d <= dx1; d += 1) {
        const double x = px(std::pow(10.0, d));
        ticks << 'M' << x << ' ' << H - B << " v6 ";
        o << "<text x=\"" << x << "\" y=\"" << H - B + 22 << "\" font-size=\"12\" text-anchor=\"middle\">1e"
          << int(d) << "</text>\n";
    }
    for (double d = dy0; d <= dy1; d += 1) {
        const double y = py(std::pow(10.0, d));
        ticks << 'M' << L << ' ' << y << " h-6 ";
        o << "<text x=\"" << L - 10 << "\" y=\"" << y + 4 << "\" font-size=\"12\" text-anchor=\"end\">1e" << int(d)
          << "</text>\n";
    }
    o << "<path class=\"ticks\" d=\"" << ticks.str() << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << (W + L - R) / 2 << "\" y=\"" << H - 15 << "\" font-size=\"14\" text-anchor=\"middle\">x</text>\n";
    o << "<text x=\"20\" y=\"" << (H - B + T) / 2 << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
      << (H - B + T) / 2 << ")\">N(x)</text>\n";

    if (s.fit_x_hi > s.fit_x_lo && s.fit_x_lo > 0) {
        auto fit_n = [&](double x) { return std::exp(s.fit_intercept + s.fit_slope * std::log(x)); };
        const double xm = std::sqrt(s.fit_x_lo * s.fit_x_hi);
        auto guide_n = [&](double x) { return fit_n(xm) * std::pow(x / xm, s.guide_slope); };
        o << "<line class=\"fit\" x1=\"" << px(s.fit_x_lo) << "\" y1=\"" << py(fit_n(s.fit_x_lo)) << "\" x2=\""
          << px(s.fit_x_hi) << "\" y2=\"" << py(fit_n(s.fit_x_hi)) << "\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n";
        o << "<line class=\"guide\" x1=\"" << px(s.fit_x_lo) << "\" y1=\"" << py(guide_n(s.fit_x_lo)) << "\" x2=\""
          << px(s.fit_x_hi) << "\" y2=\"" << py(guide_n(s.fit_x_hi))
          << "\" stroke=\"#2c3e50\" stroke-dasharray=\"6 4\"/>\n";
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!(s.n[i] > 0)) continue;
        o << "<circle class=\"marker\" cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.n[i])
          << "\" r=\"2.5\" fill=\"#2980b9\"/>\n";
    }
    o << "</svg>\n";
    return o.str();
}

// ---------------------------------------------------------------------------
// shared pieces

[[nodiscard]] inline Json prediction_json(const MatchingSequence& seq) {
    try {
        const PredictionSet p = predicted_dimensions(seq);
        return Json{{"r_lower", p.r_lower},
                    {"r_upper", p.r_upper},
                    {"spectral_dimension_lower", p.spectral_dimension_lower},
                    {"spectral_dimension_upper", p.spectral_dimension_upper},
                    {"resistance_dimension_lower", p.resistance_dimension_lower},
                    {"resistance_dimension_upper", p.resistance_dimension_upper},
                    {"counting_exponent_lower", p.counting_exponent_lower()},
                    {"counting_exponent_upper", p.counting_exponent_upper()},
                    {"band", p.is_band()}};
    } catch (const UnsupportedFamilyError& e) {
        return Json{{"unavailable", e.what()}};
    }
}

[[nodiscard]] inline GraphApprox graph_for(const RunConfig& c, const MatchingSequence& seq) {
    return build_graph(seq, GraphParams{c.level, c.subdivisions, c.beta, c.alpha});
}

// ---------------------------------------------------------------------------
// validate

[[nodiscard]] inline CommandOutcome cmd_validate(const RunConfig& c) {
    CommandOutcome out;
    const std::string hash = config_hash(c);
    const MatchingSequence seq = make_sequence(c.sequence);
    const ConditionReport cond = validate_conditions(seq, std::max<std::size_t>(60, c.level));
    const GraphApprox g = graph_for(c, seq);

    std::vector<std::string> failures;
    if (!cond.ok()) {
        std::string why = "sequence conditions violated";
        if (cond.first_matching_violation)
            why += ": matching equation fails at pair at index " + std::to_string(*cond.first_matching_violation);
        failures.push_back(why);
    }
    const std::size_t ev = expected_vertex_count(c.level, c.subdivisions);
    const std::size_t ee = expected_edge_count(c.level, c.subdivisions);
    if (g.vertex_count() != ev) failures.push_back("vertex count differs from 3^{m+1} + (s-1)(3^{m+1}-3)/2");
    if (g.edge_count() != ee) failures.push_back("edge count differs from 3^{m+1} + s(3^{m+1}-3)/2");
    const double mass = g.total_mass();
    if (std::abs(mass - 1.0) > 1e-12) failures.push_back("total mass " + fmt17(mass) + " differs from 1");
    if (!g.is_connected()) failures.push_back("graph is not connected");
    std::size_t measure_bad = 0;
    for (std::size_t j = 0; j <= c.level; ++j) {
        const double lo = std::pow(c.beta, double(j)) * (1 - 1e-12);
        const double hi = std::pow(3.0, -double(j)) * (1 + 1e-12);
        for (const Word& w : enumerate_words(j)) {
            const double mu = g.block_measure(w);
            if (mu < lo || mu > hi) ++measure_bad;
        }
    }
    if (measure_bad) failures.push_back(std::to_string(measure_bad) + " cells violate beta^|w| <= mu(K_w) <= 3^-|w|");

    Json conditions{{"verdict", to_string(cond.verdict)},
                    {"prefix_length", cond.prefix_len},
                    {"sum_abs_deviation", json_number(cond.sum_abs_deviation)},
                    {"sum_rho", cond.sum_rho},
                    {"monotone_increasing", cond.monotone_increasing},
                    {"r_upper", cond.r_upper},
                    {"r_lower", cond.r_lower},
                    {"sum_above", cond.sum_above},
                    {"sum_below", cond.sum_below},
                    {"kappa_upper", cond.kappa_upper},
                    {"kappa_lower", cond.kappa_lower},
                    {"max_matching_residual", cond.max_matching_residual},
                    {"first_matching_violation",
                     cond.first_matching_violation ? Json(*cond.first_matching_violation) : Json(nullptr)},
                    {"warnings", cond.warnings}};
    const ScaleFactors& sf = g.scales();
    Json report{{"_header", json_header(hash, "validate")},
                {"sequence", seq.describe()},
                {"conditions", conditions},
                {"predictions", prediction_json(seq)},
                {"kappa1", sf.kappa1},
                {"kappa2", sf.kappa2},
                {"graph",
                 {{"level", c.level},
                  {"subdivisions", c.subdivisions},
                  {"beta", c.beta},
                  {"vertices", g.vertex_count()},
                  {"edges", g.edge_count()},
                  {"line_edges", g.line_edges().size()},
                  {"total_mass", mass},
                  {"connected", g.is_connected()}}},
                {"failures", failures},
                {"passed", failures.empty()}};
    if (c.wants("json")) out.files.push_back(write_atomic(c.outputs.directory, "validation.json", json_text(report)));

    out.lines.push_back("sequence: " + seq.describe());
    out.lines.push_back(std::string("conditions: ") + to_string(cond.verdict));
    for (const auto& w : cond.warnings) out.lines.push_back("  warning: " + w);
    const Json pred = prediction_json(seq);
    if (pred.contains("spectral_dimension_lower")) {
        const bool band = pred["band"].get<bool>();
        out.lines.push_back("predicted d_S: " + fmt17(pred["spectral_dimension_lower"].get<double>()) +
                            (band ? " .. " + fmt17(pred["spectral_dimension_upper"].get<double>()) : ""));
        out.lines.push_back("predicted dim_H: " + fmt17(pred["resistance_dimension_lower"].get<double>()) +
                            (band ? " .. " + fmt17(pred["resistance_dimension_upper"].get<double>()) : ""));
    } else {
        out.lines.push_back("predictions unavailable: " + pred["unavailable"].get<std::string>());
    }
    out.lines.push_back("graph: " + std::to_string(g.vertex_count()) + " vertices, " +
                        std::to_string(g.edge_count()) + " edges, total mass " + fmt17(mass));
    for (const auto& f : failures) out.lines.push_back("FAILED: " + f);
    if (!failures.empty()) out.exit_code = kExitViolation;
    return out;
}

// ---------------------------------------------------------------------------
// spectrum

[[nodiscard]] inline CommandOutcome cmd_spectrum(const RunConfig& c) {
    CommandOutcome out;
    const std::string hash = config_hash(c);
    const MatchingSequence seq = make_sequence(c.sequence);
    const GraphApprox g = graph_for(c, seq);
    const SolverOptions opts = solver_options(c);
    const Pencil pn = assemble_neumann(g);
    const auto pd = dirichlet_pencil(pn, g);

    if (!c.lowest_k && pn.n() > opts.dense_limit)
        throw SizeError("pencil of size " + std::to_string(pn.n()) + " exceeds the dense limit " +
                        std::to_string(opts.dense_limit) +
                        "; set lowest_k for a partial spectrum or use the counting command");

    std::vector<Spectrum> spectra;
    auto solve = [&](const Pencil& p) {
        if (c.lowest_k) return eig_lowest(p, std::min(*c.lowest_k, p.n()), opts);
        return eig_dense(p, opts);
    };
    spectra.push_back(solve(pn));
    if (pd) spectra.push_back(solve(*pd));

    CsvWriter eig(hash, {"k", "lambda", "boundary"});
    CsvWriter mult(hash, {"boundary", "lambda", "multiplicity"});
    Json summary = Json::array();
    bool residual_ok = true;
    for (const auto& s : spectra) {
        const std::string b = s.boundary.str();
        for (std::size_t k = 0; k < s.size(); ++k) eig.row_strings({std::to_string(k + 1), fmt17(s.eigenvalues[k]), b});
        const auto groups = multiplicities(s.eigenvalues);
        for (const auto& m : groups) mult.row_strings({b, fmt17(m.value), std::to_string(m.count)});
        const double lmax = s.max();
        const double lk = s.eigenvalues.empty() ? 0.0 : s.eigenvalues.back();
        const double limit = c.lowest_k ? 1e-7 * std::max(lk, 1e-300) : 1e-8 * std::max(lmax, 1e-300);
        const bool ok = !(s.residual_norm > limit);
        residual_ok = residual_ok && ok;
        summary.push_back(Json{{"boundary", b},
                               {"count", s.size()},
                               {"lambda_min", s.eigenvalues.empty() ? Json(nullptr) : Json(s.eigenvalues.front())},
                               {"lambda_max", s.eigenvalues.empty() ? Json(nullptr) : Json(lmax)},
                               {"residual_norm", json_number(s.residual_norm)},
                               {"residual_limit", limit},
                               {"residual_ok", ok},
                               {"distinct_values", groups.size()}});
        out.lines.push_back(b + ": " + std::to_string(s.size()) + " eigenvalues, " + std::to_string(groups.size()) +
                            " distinct, residual " + fmt17(s.residual_norm));
    }
    if (!pd) out.lines.push_back("dirichlet_v0: empty pencil (all vertices constrained)");
    if (c.wants("csv")) {
        out.files.push_back(write_atomic(c.outputs.directory, "eigenvalues.csv", eig.str()));
        out.files.push_back(write_atomic(c.outputs.directory, "multiplicities.csv", mult.str()));
    }
    if (c.wants("json")) {
        Json report{{"_header", json_header(hash, "spectrum")},
                    {"sequence", seq.describe()},
                    {"vertices", g.vertex_count()},
                    {"spectra", summary},
                    {"dirichlet_empty", !pd.has_value()}};
        out.files.push_back(write_atomic(c.outputs.directory, "spectrum.json", json_text(report)));
    }
    if (!residual_ok) {
        out.lines.push_back("FAILED: eigenpair residual above limit");
        out.exit_code = kExitViolation;
    }
    return out;
}

// ---------------------------------------------------------------------------
// counting

[[nodiscard]] inline CommandOutcome cmd_counting(const RunConfig& c) {
    CommandOutcome out;
    const std::string hash = config_hash(c);
    const MatchingSequence seq = make_sequence(c.sequence);
    const GraphApprox g = graph_for(c, seq);
    const SolverOptions opts = solver_options(c);
    const Backend backend = backend_of(c);
    const WindowPolicy policy = window_policy(c);
    const Pencil pn = assemble_neumann(g);
    const auto pd = dirichlet_pencil(pn, g);

    const std::vector<double> grid =
        c.grid.mode == "explicit" ? c.grid.points : auto_grid(pn, policy.eta, c.grid.per_decade, opts);
    std::vector<CountingSample> samples = counting_function(pn, pd, grid, backend, opts);

    std::vector<BracketingReport> brackets;
    for (auto j : c.bracketing) brackets.push_back(bracketing_check(g, j, grid, backend, opts));
    if (!brackets.empty())
        for (std::size_t i = 0; i < samples.size(); ++i) {
            samples[i].lower_sum = brackets.front().samples[i].lower_sum;
            samples[i].upper_sum = brackets.front().samples[i].upper_sum;
            samples[i].decouple_level = brackets.front().level;
        }

    std::size_t interlacing_bad = 0;
    for (const auto& s : samples)
        if (s.n_dirichlet > s.n_neumann || s.n_neumann > s.n_dirichlet + 3) ++interlacing_bad;

    const PredictionSet pred = predicted_dimensions(seq);
    const double x_cut = reliability_cutoff(pn, policy.eta, opts);
    const auto window = fit_window(samples, policy, x_cut);
    const FitResult fit =
        fit_samples(samples, window, policy, pred.counting_exponent_lower(), pred.counting_exponent_upper());
    const WeylSeries weyl = weyl_ratio(samples, pred.spectral_dimension_lower, window);

    // smallest sampled x from which C1 <= ratio <= C2 holds up to the window end
    double envelope_from = fit.x_hi;
    for (std::size_t i = window.back() + 1; i-- > 0;) {
        const double q = weyl.points[i].ratio;
        if (q < weyl.c1 || q > weyl.c2) break;
        envelope_from = samples[i].x;
    }

    CsvWriter csv(hash, {"x", "N_D", "N_N", "lowerSum", "upperSum", "weyl_ratio"});
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        csv.row_strings({fmt17(s.x), std::to_string(s.n_dirichlet), std::to_string(s.n_neumann),
                         s.lower_sum ? std::to_string(*s.lower_sum) : "", s.upper_sum ? std::to_string(*s.upper_sum) : "",
                         fmt17(weyl.points[i].ratio)});
    }
    std::size_t bracket_violations = 0;
    Json bracket_json = Json::array();
    for (const auto& b : brackets) {
        bracket_violations += b.violations.size();
        Json v = Json::array();
        for (const auto& e : b.violations)
            v.push_back(Json{{"x", e.x},
                             {"lowerSum", e.lower_sum},
                             {"N_D", e.n_dirichlet},
                             {"N_N", e.n_neumann},
                             {"upperSum", e.upper_sum},
                             {"what", e.what}});
        bracket_json.push_back(Json{{"level", b.level},
                                    {"neumann_components", b.neumann_components},
                                    {"dirichlet_components", b.dirichlet_components},
                                    {"violations", v}});
    }
    const bool pass = fit.passed() && interlacing_bad == 0 && bracket_violations == 0;

    if (c.wants("csv")) {
        out.files.push_back(write_atomic(c.outputs.directory, "counting.csv", csv.str()));
        if (brackets.size() > 1) {
            CsvWriter bc(hash, {"j", "x", "lowerSum", "N_D", "N_N", "upperSum"});
            for (const auto& b : brackets)
                for (const auto& s : b.samples)
                    bc.row_strings({std::to_string(b.level), fmt17(s.x), std::to_string(*s.lower_sum),
                                    std::to_string(s.n_dirichlet), std::to_string(s.n_neumann),
                                    std::to_string(*s.upper_sum)});
            out.files.push_back(write_atomic(c.outputs.directory, "bracketing.csv", bc.str()));
        }
    }
    if (c.wants("json")) {
        Json report{{"_header", json_header(hash, "counting")},
                    {"sequence", seq.describe()},
                    {"backend", to_string(backend)},
                    {"vertices", g.vertex_count()},
                    {"grid_points", grid.size()},
                    {"x_cut", x_cut},
                    {"fit",
                     {{"slope", fit.slope},
                      {"intercept", fit.intercept},
                      {"stderr", fit.stderr_slope},
                      {"x_lo", fit.x_lo},
                      {"x_hi", fit.x_hi},
                      {"n_points", fit.n_points},
                      {"predicted_lower", fit.predicted_lower},
                      {"predicted_upper", fit.predicted_upper},
                      {"deviation", fit.deviation()},
                      {"tolerance", fit.tolerance}}},
                    {"predictions", prediction_json(seq)},
                    {"weyl", {{"C1", weyl.c1}, {"C2", weyl.c2}, {"envelope_from_x", envelope_from}}},
                    {"interlacing_violations", interlacing_bad},
                    {"bracketing", bracket_json},
                    {"verdict", pass ? "pass" : "fail"}};
        out.files.push_back(write_atomic(c.outputs.directory, "report.json", json_text(report)));
    }
    if (c.wants("svg")) {
        SvgSeries s;
        for (const auto& smp : samples) {
            s.x.push_back(smp.x);
            s.n.push_back(double(smp.n_neumann));
        }
        s.fit_slope = fit.slope;
        s.fit_intercept = fit.intercept;
        s.guide_slope = 0.5 * (fit.predicted_lower + fit.predicted_upper);
        s.fit_x_lo = fit.x_lo;
        s.fit_x_hi = fit.x_hi;
        out.files.push_back(write_atomic(c.outputs.directory, "loglog.svg", loglog_svg(hash, s)));
    }
    out.lines.push_back("sequence: " + seq.describe() + ", " + std::to_string(pn.n()) + " vertices, " +
                        std::to_string(grid.size()) + " grid points (" + to_string(backend) + ")");
    out.lines.push_back("fitted exponent " + fmt17(fit.slope) + " +- " + fmt17(fit.stderr_slope) + " over " +
                        std::to_string(fit.n_points) + " points; predicted " + fmt17(fit.predicted_lower) +
                        (pred.is_band() ? " .. " + fmt17(fit.predicted_upper) : ""));
    out.lines.push_back("Weyl ratio envelope C1 = " + fmt17(weyl.c1) + ", C2 = " + fmt17(weyl.c2));
    if (interlacing_bad) out.lines.push_back("FAILED: interlacing violated at " + std::to_string(interlacing_bad) + " points");
    if (bracket_violations)
        out.lines.push_back("FAILED: " + std::to_string(bracket_violations) + " bracketing violations");
    out.lines.push_back(std::string("verdict: ") + (pass ? "pass" : "fail"));
    if (!pass) out.exit_code = kExitViolation;
    return out;
}

// ---------------------------------------------------------------------------
// resistance

[[nodiscard]] inline CommandOutcome cmd_resistance(const RunConfig& c) {
    CommandOutcome out;
    const std::string hash = config_hash(c);
    const MatchingSequence seq = make_sequence(c.sequence);
    const CompatibilityReport compat = compatibility_check(seq, c.resistance.m_max);

    CsvWriter ccsv(hash, {"m", "R12", "R23", "R13", "deviation"});
    for (const auto& row : compat.rows)
        ccsv.row_strings({std::to_string(row.level), fmt17(row.resistance[0]), fmt17(row.resistance[1]),
                          fmt17(row.resistance[2]), fmt17(row.deviation)});

    Json report{{"_header", json_header(hash, "resistance")},
                {"sequence", seq.describe()},
                {"compatibility",
                 {{"m_max", c.resistance.m_max},
                  {"max_deviation", compat.max_deviation},
                  {"tolerance", compat.tolerance},
                  {"passed", compat.passed()}}},
                {"predictions", prediction_json(seq)}};
    out.lines.push_back("compatibility: max |R - 2/3| = " + fmt17(compat.max_deviation) + " for m <= " +
                        std::to_string(c.resistance.m_max) + (compat.passed() ? " (pass)" : " (FAIL)"));

    bool dim_ok = true;
    CsvWriter dcsv(hash, {"j", "word", "diameter"});
    if (c.level >= 1) {
        const std::size_t j_max = c.resistance.j_max ? c.resistance.j_max : c.level - 1;
        const std::optional<std::size_t> from =
            j_max >= 1 ? std::optional<std::size_t>(std::min(c.resistance.fit_from, j_max - 1)) : std::nullopt;
        const DiameterScaling ds = cell_diameter_scaling(seq, c.level, j_max, from);
        for (const auto& lev : ds.levels)
            for (std::size_t i = 0; i < lev.per_cell.size(); ++i)
                dcsv.row_strings({std::to_string(lev.level), Word::from_index(i, lev.level).str(),
                                  fmt17(lev.per_cell[i])});
        Json levels = Json::array();
        for (const auto& lev : ds.levels)
            levels.push_back(Json{{"j", lev.level}, {"max", lev.max_diameter}, {"min", lev.min_diameter}});
        Json dj{{"graph_level", ds.graph_level}, {"levels", levels}};
        if (j_max >= 1) {
            double target_lo = 0, target_hi = 0;
            try {
                const PredictionSet p = predicted_dimensions(seq);
                target_lo = p.resistance_dimension_lower;
                target_hi = p.resistance_dimension_upper;
            } catch (const UnsupportedFamilyError&) {
            }
            double rel = 0.0;
            if (target_lo > 0) {
                if (ds.dimension < target_lo) rel = (target_lo - ds.dimension) / target_lo;
                if (ds.dimension > target_hi) rel = (ds.dimension - target_hi) / target_hi;
                dim_ok = rel <= c.resistance.dimension_tolerance;
            }
            dj["fit"] = Json{{"from", ds.fit_from},
                             {"to", ds.fit_to},
                             {"slope", ds.slope},
                             {"intercept", ds.intercept},
                             {"empirical_c", ds.constant()},
                             {"dimension", ds.dimension},
                             {"relative_error", rel},
                             {"tolerance", c.resistance.dimension_tolerance},
                             {"passed", dim_ok}};
            out.lines.push_back("cell-diameter fit over j = " + std::to_string(ds.fit_from) + ".." +
                                std::to_string(ds.fit_to) + ": slope " + fmt17(ds.slope) + ", dimension " +
                                fmt17(ds.dimension) + (dim_ok ? " (pass)" : " (FAIL)"));
        }
        report["diameters"] = dj;
    }

    if (c.resistance.diameter != "none") {
        const GraphApprox g = build_graph(seq, c.level, 1, c.beta);
        const Pencil p = assemble_neumann(g);
        const bool exact = c.resistance.diameter == "exact" ||
                           (c.resistance.diameter == "auto" && p.n() <= kExactDiameterLimit);
        const auto b = g.boundary_ids();
        const DiameterResult d =
            resistance_diameter(p, exact ? DiameterMode::Exact : DiameterMode::Sampled,
                                std::vector<std::size_t>(b.begin(), b.end()), c.resistance.samples, c.outputs.seed);
        report["resistance_diameter"] = Json{{"value", d.value},
                                             {"mode", exact ? "exact" : "sampled"},
                                             {"lower_bound", d.lower_bound},
                                             {"seed", exact ? Json(nullptr) : Json(d.seed)},
                                             {"pairs", d.pairs_evaluated},
                                             {"poincare_constant", d.value > 0 ? Json(1.0 / d.value) : Json(nullptr)}};
        out.lines.push_back(std::string("resistance diameter (") + (exact ? "exact" : "sampled") + "): " +
                            fmt17(d.value));
    }
    const bool pass = compat.passed() && dim_ok;
    report["verdict"] = pass ? "pass" : "fail";
    if (c.wants("csv")) {
        out.files.push_back(write_atomic(c.outputs.directory, "compatibility.csv", ccsv.str()));
        if (c.level >= 1) out.files.push_back(write_atomic(c.outputs.directory, "diameters.csv", dcsv.str()));
    }
    if (c.wants("json")) out.files.push_back(write_atomic(c.outputs.directory, "resistance.json", json_text(report)));
    if (!pass) out.exit_code = kExitViolation;
    return out;
}

/// Maps library errors onto CLI exit codes.
[[nodiscard]] inline int exit_code_for(const Error& e) {
    const std::string& k = e.kind();
    if (k == "config" || k == "domain" || k == "level" || k == "address" || k == "unsupported_family") return kExitConfig;
    return kExitNumerical;
}

}  // namespace hanoi
