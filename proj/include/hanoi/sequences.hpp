#pragma once

// Matching pairs and compatible sequences of matching pairs.
//
// A matching pair (r, rho) satisfies 5/3 r + rho = 1, which makes a triangle of
// three r-triangles joined by three rho-edges electrically equivalent to the
// unit triangle. A compatible sequence assigns one pair per refinement level;
// from it follow the cell resistances delta_m = r_1...r_m and the line
// resistances gamma_m = r_1...r_{m-1} rho_m.

#include "hanoi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace hanoi {

inline constexpr double kThreeFifths = 3.0 / 5.0;
inline constexpr double kOneThird = 1.0 / 3.0;

struct MatchingPair {
    double r = 0.0;
    double rho = 0.0;

    /// |5/3 r + rho - 1|
    [[nodiscard]] double matching_residual() const noexcept {
        return std::abs(5.0 / 3.0 * r + rho - 1.0);
    }
};

/// Pair with rho = 1 - 5/3 r. Requires 0 < r < 3/5.
[[nodiscard]] inline MatchingPair make_pair(double r) {
    if (!(r > 0.0 && r < kThreeFifths)) {
        std::ostringstream os;
        os.precision(17);
        os << "matching pair ratio r = " << r
           << " outside the admissible open interval (0, 3/5)";
        throw DomainError(os.str());
    }
    return MatchingPair{r, 1.0 - 5.0 / 3.0 * r};
}

enum class TailRule { None, RepeatLast, Periodic };

[[nodiscard]] inline const char* to_string(TailRule t) noexcept {
    switch (t) {
        case TailRule::None: return "none";
        case TailRule::RepeatLast: return "repeat_last";
        case TailRule::Periodic: return "periodic";
    }
    return "none";
}

struct ConstantFamily {
    double r = 0.5;
    bool operator==(const ConstantFamily&) const = default;
};

// r_i = r_limit * (1 - q^i)
struct GeometricToLimitFamily {
    double r_limit = kThreeFifths;
    double q = 0.5;
    bool operator==(const GeometricToLimitFamily&) const = default;
};

// Explicit list of r_i. When `rho` is non-empty it overrides the derived
// rho_i = 1 - 5/3 r_i, which allows non-matching (invalid) sequences to be
// represented and diagnosed.
struct ExplicitFamily {
    std::vector<double> r;
    std::vector<double> rho;
    TailRule tail = TailRule::None;
    bool operator==(const ExplicitFamily&) const = default;
};

class MatchingSequence {
public:
    using Family = std::variant<ConstantFamily, GeometricToLimitFamily, ExplicitFamily>;

    static MatchingSequence constant(double r) {
        (void)make_pair(r);
        return MatchingSequence(ConstantFamily{r});
    }

    static MatchingSequence geometric_to_limit(double r_limit, double q) {
        if (!(r_limit > 0.0 && r_limit <= kThreeFifths))
            throw DomainError("geometric_to_limit: limit r must lie in (0, 3/5]");
        if (!(q > 0.0 && q < 1.0))
            throw DomainError("geometric_to_limit: base q must lie in (0, 1)");
        return MatchingSequence(GeometricToLimitFamily{r_limit, q});
    }

    static MatchingSequence explicit_values(std::vector<double> r, TailRule tail,
                                            std::vector<double> rho = {}) {
        if (r.empty()) throw DomainError("explicit sequence needs at least one r_i");
        if (!rho.empty() && rho.size() != r.size())
            throw DomainError("explicit sequence: rho list length differs from r list length");
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (rho.empty()) {
                try {
                    (void)make_pair(r[i]);
                } catch (const DomainError& e) {
                    throw DomainError("explicit sequence index " + std::to_string(i + 1) + ": " +
                                      e.what());
                }
            } else if (!(r[i] > 0.0) || !(rho[i] > 0.0) || !std::isfinite(r[i]) ||
                       !std::isfinite(rho[i])) {
                throw DomainError("explicit sequence index " + std::to_string(i + 1) +
                                  ": resistances must be positive and finite");
            }
        }
        return MatchingSequence(ExplicitFamily{std::move(r), std::move(rho), tail});
    }

    [[nodiscard]] const Family& family() const noexcept { return family_; }

    /// Pair for level i >= 1.
    [[nodiscard]] MatchingPair pair(std::size_t i) const {
        if (i == 0) throw LevelError("matching pairs are indexed from level 1");
        return std::visit(
            [i](const auto& f) -> MatchingPair {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, ConstantFamily>) {
                    return make_pair(f.r);
                } else if constexpr (std::is_same_v<T, GeometricToLimitFamily>) {
                    const double qi = std::pow(f.q, static_cast<double>(i));
                    const double ri = f.r_limit * (1.0 - qi);
                    // 1 - 5/3 r_i cancels once q^i drops below machine epsilon
                    return MatchingPair{ri, (1.0 - 5.0 / 3.0 * f.r_limit) + 5.0 / 3.0 * f.r_limit * qi};
                } else {
                    std::size_t idx = i - 1;
                    if (idx >= f.r.size()) {
                        switch (f.tail) {
                            case TailRule::None:
                                throw LevelError("explicit sequence defines " +
                                                 std::to_string(f.r.size()) +
                                                 " pairs and has no tail rule; level " +
                                                 std::to_string(i) + " requested");
                            case TailRule::RepeatLast: idx = f.r.size() - 1; break;
                            case TailRule::Periodic: idx %= f.r.size(); break;
                        }
                    }
                    if (f.rho.empty()) return MatchingPair{f.r[idx], 1.0 - 5.0 / 3.0 * f.r[idx]};
                    return MatchingPair{f.r[idx], f.rho[idx]};
                }
            },
            family_);
    }

    /// Largest level for which pair() is defined, or nullopt when unbounded.
    [[nodiscard]] std::optional<std::size_t> defined_length() const {
        if (const auto* e = std::get_if<ExplicitFamily>(&family_); e && e->tail == TailRule::None)
            return e->r.size();
        return std::nullopt;
    }

    /// Declared limit r of a convergent family.
    [[nodiscard]] std::optional<double> limit_r() const {
        return std::visit(
            [](const auto& f) -> std::optional<double> {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, ConstantFamily>) {
                    return f.r;
                } else if constexpr (std::is_same_v<T, GeometricToLimitFamily>) {
                    return f.r_limit;
                } else {
                    if (f.tail == TailRule::RepeatLast) return f.r.back();
                    if (f.tail == TailRule::Periodic) {
                        const auto [lo, hi] = std::minmax_element(f.r.begin(), f.r.end());
                        if (*lo == *hi) return *lo;
                    }
                    return std::nullopt;
                }
            },
            family_);
    }

    /// Declared r* (limsup). Equals the limit for convergent families.
    [[nodiscard]] std::optional<double> limsup_r() const {
        if (auto l = limit_r()) return l;
        if (const auto* e = std::get_if<ExplicitFamily>(&family_); e && e->tail == TailRule::Periodic)
            return *std::max_element(e->r.begin(), e->r.end());
        return std::nullopt;
    }

    /// Declared r_* (liminf).
    [[nodiscard]] std::optional<double> liminf_r() const {
        if (auto l = limit_r()) return l;
        if (const auto* e = std::get_if<ExplicitFamily>(&family_); e && e->tail == TailRule::Periodic)
            return *std::min_element(e->r.begin(), e->r.end());
        return std::nullopt;
    }

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        std::visit(
            [&os](const auto& f) {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, ConstantFamily>) {
                    os << "constant(r=" << f.r << ")";
                } else if constexpr (std::is_same_v<T, GeometricToLimitFamily>) {
                    os << "geometric_to_limit(r=" << f.r_limit << ", q=" << f.q << ")";
                } else {
                    os << "explicit(n=" << f.r.size() << ", tail=" << to_string(f.tail)
                       << (f.rho.empty() ? "" : ", rho overridden") << ")";
                }
            },
            family_);
        return os.str();
    }

    bool operator==(const MatchingSequence&) const = default;

private:
    explicit MatchingSequence(Family f) : family_(std::move(f)) {}
    Family family_;
};

struct ScaleFactors {
    std::vector<double> delta;  // delta[k], k = 0..m, delta[0] = 1
    std::vector<double> gamma;  // gamma[k - 1] = gamma_k, k = 1..m
    std::vector<MatchingPair> pairs;  // pairs[k - 1] = (r_k, rho_k)
    /// Ratio the partial products are normalised by (limit, else limsup).
    std::optional<double> reference_r;
    std::vector<double> partial_products;  // a_k = prod_{i<=k} r_i / r, k = 1..m
    double kappa1 = 1.0;
    double kappa2 = 1.0;

    [[nodiscard]] std::size_t levels() const noexcept { return gamma.size(); }
    [[nodiscard]] double gamma_at(std::size_t k) const { return gamma.at(k - 1); }
    /// Last computed partial product, the finite-prefix proxy for R*.
    [[nodiscard]] double r_star_product() const {
        return partial_products.empty() ? 1.0 : partial_products.back();
    }
};

[[nodiscard]] inline ScaleFactors scale_factors(const MatchingSequence& seq, std::size_t m) {
    ScaleFactors sf;
    sf.delta.reserve(m + 1);
    sf.delta.push_back(1.0);
    sf.reference_r = seq.limsup_r();
    double a = 1.0;
    for (std::size_t k = 1; k <= m; ++k) {
        const MatchingPair p = seq.pair(k);
        sf.pairs.push_back(p);
        sf.gamma.push_back(sf.delta.back() * p.rho);
        sf.delta.push_back(sf.delta.back() * p.r);
        if (sf.reference_r) {
            a *= p.r / *sf.reference_r;
            sf.partial_products.push_back(a);
        }
    }
    if (!sf.partial_products.empty()) {
        const auto [lo, hi] =
            std::minmax_element(sf.partial_products.begin(), sf.partial_products.end());
        sf.kappa1 = *lo;
        sf.kappa2 = *hi;
    }
    return sf;
}

enum class ConditionVerdict {
    ConditionsHold,              // 1/3 <= r < 3/5, summable |r - r_i|
    ThreeFifthsConditionsHold,   // r = 3/5, summable rho_i, r_i increasing
    GeneralizedConditionsHold,   // limsup/liminf conditions
    DiagnosticsOnly,             // no tail rule, nothing can be concluded
    Violated,
};

[[nodiscard]] inline const char* to_string(ConditionVerdict v) noexcept {
    switch (v) {
        case ConditionVerdict::ConditionsHold: return "conditions hold";
        case ConditionVerdict::ThreeFifthsConditionsHold: return "r = 3/5 conditions hold";
        case ConditionVerdict::GeneralizedConditionsHold: return "generalized conditions hold";
        case ConditionVerdict::DiagnosticsOnly: return "diagnostics only";
        case ConditionVerdict::Violated: return "violated";
    }
    return "violated";
}

struct ConditionReport {
    std::string sequence;
    std::size_t prefix_len = 0;
    ConditionVerdict verdict = ConditionVerdict::DiagnosticsOnly;

    double sum_abs_deviation = 0.0;  // sum |r - r_i|; NaN without a declared limit
    double sum_rho = 0.0;
    bool monotone_increasing = true;

    double prefix_max_r = 0.0;
    double prefix_min_r = 0.0;
    double r_upper = 0.0;  // r* used for the sums below (declared, else prefix max)
    double r_lower = 0.0;  // r_*
    double sum_above = 0.0;  // sum over r_m > r* of |1 - r_m / r*|
    double sum_below = 0.0;  // sum over r_m < r_* of (1 - r_m / r_*)
    double kappa_upper = 1.0;  // max_k prod_{i<=k, r_i>r*} r_i / r*
    double kappa_lower = 1.0;  // min_k prod_{i<=k, r_i<r_*} r_i / r_*

    double max_matching_residual = 0.0;
    std::optional<std::size_t> first_matching_violation;  // 1-based level
    std::vector<std::string> warnings;

    [[nodiscard]] bool ok() const noexcept {
        return verdict != ConditionVerdict::Violated;
    }
};

inline constexpr double kMatchingTolerance = 1e-12;

[[nodiscard]] inline ConditionReport validate_conditions(const MatchingSequence& seq,
                                                         std::size_t prefix_len) {
    if (prefix_len == 0) throw DomainError("validate_conditions: prefix length must be >= 1");
    ConditionReport rep;
    rep.sequence = seq.describe();
    if (auto n = seq.defined_length(); n && *n < prefix_len) {
        rep.warnings.push_back("prefix truncated to the " + std::to_string(*n) +
                               " explicitly listed pairs");
        prefix_len = *n;
    }
    rep.prefix_len = prefix_len;

    std::vector<MatchingPair> pairs;
    pairs.reserve(prefix_len);
    for (std::size_t i = 1; i <= prefix_len; ++i) pairs.push_back(seq.pair(i));

    rep.prefix_max_r = pairs.front().r;
    rep.prefix_min_r = pairs.front().r;
    bool positive = true;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        rep.prefix_max_r = std::max(rep.prefix_max_r, p.r);
        rep.prefix_min_r = std::min(rep.prefix_min_r, p.r);
        rep.sum_rho += p.rho;
        if (i > 0 && p.r < pairs[i - 1].r) rep.monotone_increasing = false;
        const double res = p.matching_residual();
        rep.max_matching_residual = std::max(rep.max_matching_residual, res);
        if (res > kMatchingTolerance && !rep.first_matching_violation)
            rep.first_matching_violation = i + 1;
        if (!(p.r > 0.0) || !(p.rho > 0.0)) positive = false;
    }

    const auto limit = seq.limit_r();
    rep.sum_abs_deviation = std::numeric_limits<double>::quiet_NaN();
    if (limit) {
        rep.sum_abs_deviation = 0.0;
        for (const auto& p : pairs) rep.sum_abs_deviation += std::abs(*limit - p.r);
    }

    rep.r_upper = seq.limsup_r().value_or(rep.prefix_max_r);
    rep.r_lower = seq.liminf_r().value_or(rep.prefix_min_r);
    double prod_above = 1.0;
    double prod_below = 1.0;
    for (const auto& p : pairs) {
        if (p.r > rep.r_upper) {
            rep.sum_above += std::abs(1.0 - p.r / rep.r_upper);
            prod_above *= p.r / rep.r_upper;
        }
        if (p.r < rep.r_lower) {
            rep.sum_below += 1.0 - p.r / rep.r_lower;
            prod_below *= p.r / rep.r_lower;
        }
        rep.kappa_upper = std::max(rep.kappa_upper, prod_above);
        rep.kappa_lower = std::min(rep.kappa_lower, prod_below);
    }

    auto violate = [&rep](std::string why) {
        rep.verdict = ConditionVerdict::Violated;
        rep.warnings.push_back(std::move(why));
    };

    if (rep.first_matching_violation) {
        std::ostringstream os;
        os.precision(17);
        const auto& p = pairs[*rep.first_matching_violation - 1];
        os << "pair at index " << *rep.first_matching_violation << " violates 5/3 r + rho = 1 (r = "
           << p.r << ", rho = " << p.rho << ")";
        violate(os.str());
        return rep;
    }
    if (!positive) {
        violate("sequence contains a non-positive resistance factor");
        return rep;
    }

    const auto in_range = [](double r) { return r >= kOneThird && r <= kThreeFifths; };
    const auto& fam = seq.family();
    if (std::holds_alternative<GeometricToLimitFamily>(fam)) {
        const auto& g = std::get<GeometricToLimitFamily>(fam);
        if (!in_range(g.r_limit)) {
            violate("declared limit r lies outside [1/3, 3/5]");
        } else if (g.r_limit == kThreeFifths) {
            rep.verdict = ConditionVerdict::ThreeFifthsConditionsHold;
        } else {
            rep.verdict = ConditionVerdict::ConditionsHold;
        }
        return rep;
    }
    if (limit) {
        // Constant families and explicit ones with a constant tail: the
        // deviation sum is finite because only finitely many terms differ.
        if (!in_range(*limit) || *limit >= kThreeFifths)
            violate("declared limit r lies outside [1/3, 3/5)");
        else
            rep.verdict = ConditionVerdict::ConditionsHold;
        return rep;
    }
    if (seq.limsup_r() && seq.liminf_r()) {
        // Periodic tail: no term ever exceeds r* or undercuts r_*.
        if (!(*seq.limsup_r() < kThreeFifths) || !(*seq.liminf_r() >= kOneThird))
            violate("limsup r* must be < 3/5 and liminf r_* must be >= 1/3");
        else
            rep.verdict = ConditionVerdict::GeneralizedConditionsHold;
        return rep;
    }
    rep.verdict = ConditionVerdict::DiagnosticsOnly;
    rep.warnings.push_back("explicit sequence without tail rule: finite prefix gives diagnostics only");
    return rep;
}

/// Predicted dimensions. For convergent families lower == upper.
struct PredictionSet {
    double r_lower = 0.0;  // r_* (or r)
    double r_upper = 0.0;  // r* (or r)
    double spectral_dimension_lower = 0.0;  // ln 9 / (ln 3 - ln r_*)
    double spectral_dimension_upper = 0.0;  // ln 9 / (ln 3 - ln r*)
    double resistance_dimension_lower = 0.0;  // ln 3 / -ln r_*
    double resistance_dimension_upper = 0.0;  // ln 3 / -ln r*
    /// 2 dim / (dim + 1) evaluated at the lower resistance dimension; equals
    /// spectral_dimension_lower.
    double relation_check = 0.0;

    [[nodiscard]] bool is_band() const noexcept { return r_lower != r_upper; }
    [[nodiscard]] double spectral_dimension() const noexcept { return spectral_dimension_lower; }
    [[nodiscard]] double resistance_dimension() const noexcept { return resistance_dimension_lower; }
    [[nodiscard]] double counting_exponent_lower() const noexcept { return 0.5 * spectral_dimension_lower; }
    [[nodiscard]] double counting_exponent_upper() const noexcept { return 0.5 * spectral_dimension_upper; }
};

[[nodiscard]] inline double spectral_dimension(double r) {
    return std::log(9.0) / (std::log(3.0) - std::log(r));
}

[[nodiscard]] inline double resistance_dimension(double r) {
    return std::log(3.0) / -std::log(r);
}

[[nodiscard]] inline PredictionSet predicted_dimensions(const MatchingSequence& seq) {
    const auto lo = seq.liminf_r();
    const auto hi = seq.limsup_r();
    if (!lo || !hi)
        throw UnsupportedFamilyError("sequence " + seq.describe() +
                                     " declares neither a limit nor limsup/liminf");
    PredictionSet p;
    p.r_lower = *lo;
    p.r_upper = *hi;
    p.spectral_dimension_lower = spectral_dimension(*lo);
    p.spectral_dimension_upper = spectral_dimension(*hi);
    p.resistance_dimension_lower = resistance_dimension(*lo);
    p.resistance_dimension_upper = resistance_dimension(*hi);
    const double d = p.resistance_dimension_lower;
    p.relation_check = 2.0 * d / (d + 1.0);
    return p;
}

}  // namespace hanoi
