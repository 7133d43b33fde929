#pragma once

// Generalised symmetric eigenproblem L u = lambda M u.
//
// Two backends: a dense solver for the full spectrum (via the symmetric
// reduction M^{-1/2} L M^{-1/2}) and eigenvalue counting through the inertia
// of L - x M (Sylvester's law of inertia on a sparse LDL^T factorization).
// A shift-invert subspace iteration supplies the lowest eigenpairs of pencils
// above the dense limit.

#include "hanoi/assembly.hpp"
#include "hanoi/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

namespace hanoi {

struct SolverOptions {
    std::size_t dense_limit = 4000;
    /// Relative upward shift turning the strict inertia count into #{lambda <= x}.
    double eps_shift = 1e-9;
    /// Pivots below pivot_tol * ||L|| are treated as x sitting on an eigenvalue.
    double pivot_tol = 1e-12;
    int max_retries = 3;
    /// Worker threads for grid sweeps; 0 selects hardware concurrency.
    std::size_t threads = 0;
    std::size_t max_iterations = 2000;
};

struct Spectrum {
    std::vector<double> eigenvalues;  // nondecreasing
    Boundary boundary;
    /// max over computed pairs of ||L u - lambda M u|| / ||u||
    double residual_norm = 0.0;

    [[nodiscard]] std::size_t size() const noexcept { return eigenvalues.size(); }
    [[nodiscard]] double max() const { return eigenvalues.empty() ? 0.0 : eigenvalues.back(); }

    /// #{lambda <= x}
    [[nodiscard]] std::size_t count_at_most(double x) const {
        return static_cast<std::size_t>(
            std::upper_bound(eigenvalues.begin(), eigenvalues.end(), x) - eigenvalues.begin());
    }
};

namespace detail {

inline void check_masses(const Pencil& p) {
    for (Eigen::Index i = 0; i < p.mass.size(); ++i)
        if (!(p.mass[i] > 0.0))
            throw PencilError("mass entry " + std::to_string(i) + " is not positive");
}

/// Upper bound for the pencil spectrum: max_i sum_j |L_ij| / M_i.
inline double spectral_upper_bound(const Pencil& p) {
    Vector rows = Vector::Zero(p.stiffness.rows());
    for (int k = 0; k < p.stiffness.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(p.stiffness, k); it; ++it)
            rows[it.row()] += std::abs(it.value());
    return (rows.array() / p.mass.array()).maxCoeff();
}

}  // namespace detail

struct DenseResult {
    Spectrum spectrum;
    Eigen::MatrixXd vectors;  // columns are M-orthonormal eigenvectors
};

/// Full spectrum with eigenvectors.
[[nodiscard]] inline DenseResult eig_dense_vectors(const Pencil& p, const SolverOptions& opts = {}) {
    detail::check_masses(p);
    if (p.n() > opts.dense_limit)
        throw SizeError("pencil of size " + std::to_string(p.n()) + " exceeds the dense limit " +
                        std::to_string(opts.dense_limit) + "; use the inertia counting path");
    DenseResult out;
    out.spectrum.boundary = p.boundary;
    if (p.empty()) return out;

    const Vector inv_sqrt_m = p.mass.array().rsqrt();
    Eigen::MatrixXd s = Eigen::MatrixXd(p.stiffness);
    s = inv_sqrt_m.asDiagonal() * s * inv_sqrt_m.asDiagonal();
    s = 0.5 * (s + s.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed to converge");

    const Vector& vals = es.eigenvalues();
    out.vectors = inv_sqrt_m.asDiagonal() * es.eigenvectors();
    const Eigen::MatrixXd lu = p.stiffness * out.vectors;
    const Eigen::MatrixXd mu = p.mass.asDiagonal() * out.vectors;
    double res = 0.0;
    for (Eigen::Index j = 0; j < vals.size(); ++j) {
        const double r = (lu.col(j) - vals[j] * mu.col(j)).norm() / out.vectors.col(j).norm();
        res = std::max(res, r);
    }
    out.spectrum.eigenvalues.assign(vals.data(), vals.data() + vals.size());
    out.spectrum.residual_norm = res;
    return out;
}

/// Eigenvalues only (no eigenvectors, residual_norm left NaN). Much cheaper
/// than the full decomposition for counting.
[[nodiscard]] inline Spectrum eig_dense_values(const Pencil& p, const SolverOptions& opts = {}) {
    detail::check_masses(p);
    if (p.n() > opts.dense_limit)
        throw SizeError("pencil of size " + std::to_string(p.n()) + " exceeds the dense limit " +
                        std::to_string(opts.dense_limit) + "; use the inertia counting path");
    Spectrum out;
    out.boundary = p.boundary;
    out.residual_norm = std::numeric_limits<double>::quiet_NaN();
    if (p.empty()) return out;
    const Vector inv_sqrt_m = p.mass.array().rsqrt();
    Eigen::MatrixXd s = Eigen::MatrixXd(p.stiffness);
    s = inv_sqrt_m.asDiagonal() * s * inv_sqrt_m.asDiagonal();
    s = 0.5 * (s + s.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed to converge");
    out.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    return out;
}

[[nodiscard]] inline Spectrum eig_dense(const Pencil& p, const SolverOptions& opts = {}) {
    return eig_dense_vectors(p, opts).spectrum;
}

struct InertiaResult {
    double x = 0.0;       // requested threshold
    double x_used = 0.0;  // threshold actually factorized (after retries)
    std::size_t count = 0;  // #{lambda < x_used}
    bool factorization_ok = true;  // false when a retry was needed
    int retries = 0;
};

/// Reusable inertia evaluator for one pencil. The sparsity analysis (AMD
/// ordering, elimination tree) is done once; each threshold costs one
/// numeric LDL^T factorization. Not thread-safe; use one per thread.
class InertiaCounter {
public:
    explicit InertiaCounter(const Pencil& p, SolverOptions opts = {})
        : pencil_(&p), opts_(opts), norm_(p.stiffness_norm()) {
        detail::check_masses(p);
        if (p.empty()) return;
        a_ = p.stiffness;
        a_.makeCompressed();
        diag_pos_.resize(p.n());
        diag_.resize(Eigen::Index(p.n()));
        for (int k = 0; k < a_.outerSize(); ++k) {
            for (SparseMatrix::InnerIterator it(a_, k); it; ++it) {
                if (it.row() == it.col()) {
                    diag_pos_[std::size_t(k)] = &it.valueRef() - a_.valuePtr();
                    diag_[k] = it.value();
                }
            }
        }
        ldlt_.analyzePattern(a_);
    }

    /// Number of eigenvalues strictly below x, with the near-eigenvalue
    /// retry policy (x -> x (1 + 10^t eps_shift), t = 1..max_retries).
    [[nodiscard]] InertiaResult count_below(double x) {
        InertiaResult res;
        res.x = x;
        if (pencil_->empty()) {
            res.x_used = x;
            return res;
        }
        const double scale = x != 0.0 ? std::abs(x) : norm_ / pencil_->mass.maxCoeff();
        double bump = opts_.eps_shift;
        for (int attempt = 0; attempt <= opts_.max_retries; ++attempt) {
            const double xt = attempt == 0 ? x : x + bump * scale;
            if (attempt > 0) bump *= 10.0;
            std::size_t neg = 0;
            if (factorize_and_count(xt, neg)) {
                res.x_used = xt;
                res.count = neg;
                res.retries = attempt;
                res.factorization_ok = attempt == 0;
                return res;
            }
            if (attempt == 0) bump = 10.0 * opts_.eps_shift;
        }
        std::ostringstream os;
        os.precision(17);
        os << "threshold x = " << x << " sits on an eigenvalue of the " << pencil_->boundary.str()
           << " pencil (n = " << pencil_->n() << "): pivot below " << opts_.pivot_tol
           << " * ||L|| after " << opts_.max_retries << " shifted retries";
        throw ThresholdAtEigenvalueError(os.str());
    }

    /// #{lambda <= x} under the right-continuous convention.
    [[nodiscard]] std::size_t count_at_most(double x) {
        return count_below(x * (1.0 + opts_.eps_shift)).count;
    }

    [[nodiscard]] const Pencil& pencil() const noexcept { return *pencil_; }

private:
    bool factorize_and_count(double x, std::size_t& negatives) {
        double* values = a_.valuePtr();
        for (std::size_t i = 0; i < diag_pos_.size(); ++i)
            values[diag_pos_[i]] = diag_[Eigen::Index(i)] - x * pencil_->mass[Eigen::Index(i)];
        ldlt_.factorize(a_);
        if (ldlt_.info() != Eigen::Success) return false;
        const Vector& d = ldlt_.vectorD();
        const double tol = opts_.pivot_tol * norm_;
        negatives = 0;
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            if (!std::isfinite(d[i]) || std::abs(d[i]) < tol) return false;
            if (d[i] < 0.0) ++negatives;
        }
        return true;
    }

    const Pencil* pencil_;
    SolverOptions opts_;
    double norm_;
    SparseMatrix a_;
    std::vector<std::ptrdiff_t> diag_pos_;
    Vector diag_;
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

[[nodiscard]] inline InertiaResult count_below(const Pencil& p, double x, const SolverOptions& opts = {}) {
    InertiaCounter c(p, opts);
    return c.count_below(x);
}

[[nodiscard]] inline std::size_t resolve_threads(std::size_t requested, std::size_t work) {
    std::size_t t = requested ? requested : std::max<std::size_t>(1, std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, std::min(t, work));
}

/// Right-continuous counts #{lambda <= x} for every grid point. Grid points
/// are split in contiguous chunks over worker threads, each owning its own
/// factorization; results do not depend on the thread count.
[[nodiscard]] inline std::vector<std::size_t> count_grid(const Pencil& p, const std::vector<double>& xs,
                                                         const SolverOptions& opts = {}) {
    std::vector<std::size_t> out(xs.size(), 0);
    if (xs.empty() || p.empty()) return out;
    const std::size_t nt = resolve_threads(opts.threads, xs.size());
    std::vector<std::exception_ptr> errors(nt);
    auto work = [&](std::size_t t) {
        try {
            InertiaCounter c(p, opts);
            for (std::size_t i = t; i < xs.size(); i += nt) out[i] = c.count_at_most(xs[i]);
        } catch (...) {
            errors[t] = std::current_exception();
        }
    };
    if (nt == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(nt);
        for (std::size_t t = 0; t < nt; ++t) pool.emplace_back(work, t);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

/// k-th smallest eigenvalue (1-based) by bisection on inertia counts,
/// to relative tolerance `rel_tol`.
[[nodiscard]] inline double kth_eigenvalue(const Pencil& p, std::size_t k, const SolverOptions& opts = {},
                                           double rel_tol = 1e-12) {
    if (k < 1 || k > p.n()) throw DomainError("kth_eigenvalue: k outside [1, n]");
    InertiaCounter c(p, opts);
    const double hi0 = detail::spectral_upper_bound(p) * 1.01 + 1e-300;
    double lo = -1e-12 * hi0;
    double hi = hi0;
    // invariant: count_below(lo) < k <= count_below(hi)
    for (int it = 0; it < 200 && hi - lo > rel_tol * std::max(std::abs(hi), 1e-14 * hi0); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (c.count_below(mid).count >= k)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

/// The k lowest eigenvalues. Dense path up to the dense limit, otherwise a
/// shift-invert subspace iteration with Rayleigh-Ritz extraction.
[[nodiscard]] inline Spectrum eig_lowest(const Pencil& p, std::size_t k, const SolverOptions& opts = {}) {
    if (k < 1 || k > p.n()) throw DomainError("eig_lowest: k must lie in [1, n]");
    detail::check_masses(p);
    if (p.n() <= opts.dense_limit) {
        Spectrum s = eig_dense(p, opts);
        s.eigenvalues.resize(k);
        return s;
    }

    const Eigen::Index n = Eigen::Index(p.n());
    const Eigen::Index b = std::min<Eigen::Index>(n, Eigen::Index(std::max<std::size_t>(2 * k, k + 10)));
    const double lam_bound = detail::spectral_upper_bound(p);
    // Small negative shift keeps L - sigma M positive definite for singular
    // (Neumann) pencils.
    const double sigma = -1e-8 * lam_bound;
    SparseMatrix kmat = p.stiffness;
    for (Eigen::Index i = 0; i < n; ++i) kmat.coeffRef(i, i) -= sigma * p.mass[i];
    Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt(kmat);
    if (llt.info() != Eigen::Success)
        throw ConvergenceError("eig_lowest: shifted pencil is not positive definite");

    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd x(n, b);
    for (Eigen::Index j = 0; j < b; ++j)
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = nd(rng);

    Spectrum out;
    out.boundary = p.boundary;
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
        Eigen::MatrixXd y = llt.solve(p.mass.asDiagonal() * x);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, b);
        Eigen::MatrixXd ar = q.transpose() * (p.stiffness * q);
        Eigen::MatrixXd br = q.transpose() * p.mass.asDiagonal() * q;
        ar = 0.5 * (ar + ar.transpose()).eval();
        br = 0.5 * (br + br.transpose()).eval();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(ar, br);
        if (ges.info() != Eigen::Success) throw ConvergenceError("eig_lowest: Rayleigh-Ritz step failed");
        x = q * ges.eigenvectors();
        const Vector& theta = ges.eigenvalues();

        const double ref = std::max(theta[Eigen::Index(k) - 1], 1e-12 * lam_bound);
        worst = 0.0;
        for (Eigen::Index j = 0; j < Eigen::Index(k); ++j) {
            const Vector r = p.stiffness * x.col(j) - theta[j] * (p.mass.asDiagonal() * x.col(j));
            worst = std::max(worst, r.norm() / x.col(j).norm());
        }
        if (worst <= 1e-7 * ref) {
            out.eigenvalues.assign(theta.data(), theta.data() + Eigen::Index(k));
            out.residual_norm = worst;
            return out;
        }
    }
    std::ostringstream os;
    os << "eig_lowest: no convergence after " << opts.max_iterations
       << " iterations, attained residual " << worst;
    throw ConvergenceError(os.str());
}

struct Multiplicity {
    double value = 0.0;
    std::size_t count = 0;
};

/// Groups consecutive eigenvalues whose gap is within rel_gap of their
/// magnitude (absolute floor rel_gap * lambda_max for the zero cluster).
[[nodiscard]] inline std::vector<Multiplicity> multiplicities(const std::vector<double>& sorted,
                                                              double rel_gap = 1e-8) {
    std::vector<Multiplicity> out;
    if (sorted.empty()) return out;
    const double floor = rel_gap * std::max(std::abs(sorted.back()), std::abs(sorted.front()));
    double sum = sorted.front();
    std::size_t cnt = 1;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const double gap = sorted[i] - sorted[i - 1];
        if (gap <= std::max(rel_gap * std::abs(sorted[i]), floor)) {
            sum += sorted[i];
            ++cnt;
        } else {
            out.push_back(Multiplicity{sum / double(cnt), cnt});
            sum = sorted[i];
            cnt = 1;
        }
    }
    out.push_back(Multiplicity{sum / double(cnt), cnt});
    return out;
}

}  // namespace hanoi
