#pragma once

#include "mset/errors.hpp"
#include "mset/physics.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace mset {

struct SolverOptions {
    double gummel_tol_psi = 1e-5;       // V
    double gummel_tol_carrier = 1e-4;   // relative, i.e. 1e-4 V_T of quasi-Fermi shift
    int max_gummel = 200;
    double newton_tol = 1e-8;           // V
    int max_newton = 50;
    double psi_clamp = 0.025852;        // V per Newton update (one thermal voltage at 300 K)
    double linear_tol = 1e-10;          // relative residual
    double continuation_step_max = 0.25;  // V
    int anderson_depth = 5;             // 0 disables Gummel acceleration

    /// Throws InvalidArgument when a tolerance is non-positive or the clamp is below 0.1 V_T.
    void validate(const MaterialParams& material) const;
};

struct ConvergenceTrace {
    std::vector<double> psi_updates;      // V, per iteration
    std::vector<double> residuals;        // scaled Poisson residual 2-norm, per iteration
    std::vector<double> carrier_updates;  // relative, per Gummel iteration (empty for Newton traces)
    bool converged = false;
    int iterations = 0;
    bool monotone = true;                 // every accepted Newton step reduced the residual

    void write_csv(std::ostream& os) const;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, ConvergenceTrace trace, BiasSet bias = {})
        : Error(what), trace_(std::move(trace)), bias_(std::move(bias)) {}
    [[nodiscard]] const ConvergenceTrace& trace() const { return trace_; }
    /// Bias at which the failing solve was attempted (empty when unknown).
    [[nodiscard]] const BiasSet& bias() const { return bias_; }

private:
    ConvergenceTrace trace_;
    BiasSet bias_;
};

/// Keeps the symbolic LU analysis while the sparsity pattern is unchanged.
class LinearSolverCache {
public:
    LinearSolverCache();
    ~LinearSolverCache();
    LinearSolverCache(LinearSolverCache&&) noexcept;
    LinearSolverCache& operator=(LinearSolverCache&&) noexcept;

    struct Impl;
    Impl& impl() { return *impl_; }

private:
    std::unique_ptr<Impl> impl_;
};

/// Direct sparse LU with iterative refinement. Throws LinearSolveError on
/// breakdown or when ||Ax - b|| / ||b|| stays above `tol`.
Eigen::VectorXd solve_linear(const LinearSystem& system, double tol, LinearSolverCache* cache = nullptr);

/// Same contract as solve_linear for systems whose rows are either identity
/// rows (fixed unknowns) or satisfy A_kj s_j / s_k = A_jk s_k / s_j for the
/// given positive scale s. Fixed unknowns are eliminated and the similarity-
/// scaled remainder is factorized with LDL^T; falls back to LU when the
/// refined residual misses `tol`.
Eigen::VectorXd solve_linear_symmetrized(const LinearSystem& system, const Eigen::VectorXd& scale, double tol,
                                         LinearSolverCache* cache = nullptr);

struct SolveResult {
    FieldState state;
    ConvergenceTrace trace;
};

/// Damped Newton on the nonlinear Poisson equation with quasi-Fermi
/// potentials frozen at their values in `state`.
SolveResult newton_poisson(const Mesh& mesh, FieldState state, const BiasSet& bias, const SolverOptions& opts,
                           LinearSolverCache* cache = nullptr);

/// Gummel loop: nonlinear Poisson, then electron and hole continuity, until
/// self-consistent. The potential handed to continuity is Anderson-mixed over
/// the last opts.anderson_depth cycles. The returned carriers satisfy
/// continuity exactly at the returned potential.
SolveResult gummel_solve(const Mesh& mesh, FieldState state, const BiasSet& bias, const SolverOptions& opts);

struct ContinuationResult {
    FieldState state;
    int steps = 0;  // Gummel solves performed
};

/// Ramps every contact linearly from `from` to `to` in steps no larger than
/// opts.continuation_step_max, halving the step after a failed solve.
ContinuationResult continuation_solve(const Mesh& mesh, const BiasSet& from, const BiasSet& to,
                                      const SolverOptions& opts, const FieldState& warm);

}  // namespace mset
