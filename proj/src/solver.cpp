#include "mset/solver.hpp"

#include <Eigen/QR>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace mset {

void SolverOptions::validate(const MaterialParams& material) const {
    if (!(gummel_tol_psi > 0.0 && gummel_tol_carrier > 0.0 && newton_tol > 0.0 && linear_tol > 0.0 &&
          continuation_step_max > 0.0)) {
        throw InvalidArgument("solver tolerances and step sizes must be positive");
    }
    if (anderson_depth < 0) {
        throw InvalidArgument("anderson_depth must be non-negative");
    }
    if (max_gummel < 1 || max_newton < 1) {
        throw InvalidArgument("iteration limits must be at least 1");
    }
    if (!(psi_clamp >= 0.1 * material.thermal_voltage())) {
        throw InvalidArgument("psi_clamp must be at least 0.1 thermal voltages");
    }
}

void ConvergenceTrace::write_csv(std::ostream& os) const {
    os << "iteration,residual,update_norm_V,carrier_update\n";
    const std::size_t n = std::max({psi_updates.size(), residuals.size(), carrier_updates.size()});
    for (std::size_t i = 0; i < n; ++i) {
        os << i + 1 << ',';
        if (i < residuals.size()) os << residuals[i];
        os << ',';
        if (i < psi_updates.size()) os << psi_updates[i];
        os << ',';
        if (i < carrier_updates.size()) os << carrier_updates[i];
        os << '\n';
    }
}

struct LinearSolverCache::Impl {
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    std::vector<int> outer;
    std::vector<int> inner;
    bool analyzed = false;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt;
    std::vector<int> sym_outer;
    std::vector<int> sym_inner;
    bool sym_analyzed = false;

    static bool same(const Eigen::SparseMatrix<double>& a, const std::vector<int>& o, const std::vector<int>& i) {
        if (static_cast<std::size_t>(a.outerSize() + 1) != o.size() ||
            static_cast<std::size_t>(a.nonZeros()) != i.size()) {
            return false;
        }
        return std::equal(o.begin(), o.end(), a.outerIndexPtr()) && std::equal(i.begin(), i.end(), a.innerIndexPtr());
    }

    static void remember(const Eigen::SparseMatrix<double>& a, std::vector<int>& o, std::vector<int>& i) {
        o.assign(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1);
        i.assign(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros());
    }

    bool same_pattern(const Eigen::SparseMatrix<double>& a) const { return analyzed && same(a, outer, inner); }

    void analyze(const Eigen::SparseMatrix<double>& a) {
        lu.analyzePattern(a);
        remember(a, outer, inner);
        analyzed = true;
    }

    void factorize_symmetric(const Eigen::SparseMatrix<double>& a) {
        if (!sym_analyzed || !same(a, sym_outer, sym_inner)) {
            ldlt.analyzePattern(a);
            remember(a, sym_outer, sym_inner);
            sym_analyzed = true;
        }
        ldlt.factorize(a);
    }
};

LinearSolverCache::LinearSolverCache() : impl_(std::make_unique<Impl>()) {}
LinearSolverCache::~LinearSolverCache() = default;
LinearSolverCache::LinearSolverCache(LinearSolverCache&&) noexcept = default;
LinearSolverCache& LinearSolverCache::operator=(LinearSolverCache&&) noexcept = default;

Eigen::VectorXd solve_linear(const LinearSystem& system, double tol, LinearSolverCache* cache) {
    const Eigen::SparseMatrix<double>& a = system.matrix;
    if (a.rows() != a.cols() || a.rows() != system.rhs.size()) {
        throw LinearSolveError("linear system is not square or rhs size mismatches", INFINITY);
    }
    const double bnorm = system.rhs.norm();
    if (bnorm == 0.0) {
        return Eigen::VectorXd::Zero(a.rows());
    }
    LinearSolverCache local;
    LinearSolverCache::Impl& c = cache ? cache->impl() : local.impl();
    Eigen::SparseMatrix<double> compressed = a;
    compressed.makeCompressed();
    if (!c.same_pattern(compressed)) {
        c.analyze(compressed);
    }
    c.lu.factorize(compressed);
    if (c.lu.info() != Eigen::Success) {
        c.analyzed = false;
        throw LinearSolveError("sparse LU breakdown: " + c.lu.lastErrorMessage(), INFINITY);
    }
    Eigen::VectorXd x = c.lu.solve(system.rhs);
    double rel = INFINITY;
    for (int refine = 0; refine < 4; ++refine) {
        const Eigen::VectorXd r = system.rhs - compressed * x;
        rel = r.norm() / bnorm;
        if (!std::isfinite(rel)) {
            break;
        }
        if (rel <= tol) {
            return x;
        }
        x += c.lu.solve(r);
    }
    std::ostringstream os;
    os << "linear solve did not reach relative residual " << tol << " (achieved " << rel << ")";
    throw LinearSolveError(os.str(), rel);
}

Eigen::VectorXd solve_linear_symmetrized(const LinearSystem& system, const Eigen::VectorXd& scale, double tol,
                                         LinearSolverCache* cache) {
    const Eigen::SparseMatrix<double>& a = system.matrix;
    const Eigen::Index n = a.rows();
    if (a.cols() != n || system.rhs.size() != n || scale.size() != n) {
        throw LinearSolveError("linear system is not square or rhs/scale size mismatches", INFINITY);
    }
    const double bnorm = system.rhs.norm();
    if (bnorm == 0.0) {
        return Eigen::VectorXd::Zero(n);
    }
    Eigen::SparseMatrix<double> compressed = a;
    compressed.makeCompressed();

    std::vector<int> row_entries(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(compressed, c); it; ++it) {
            if (it.value() != 0.0) {
                ++row_entries[static_cast<std::size_t>(it.row())];
            }
            if (it.row() == c) {
                diag[c] += it.value();
            }
        }
    }
    std::vector<Eigen::Index> reduced(static_cast<std::size_t>(n), -1);
    std::vector<Eigen::Index> free_rows;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (row_entries[static_cast<std::size_t>(k)] == 1 && diag[k] != 0.0) {
            x[k] = system.rhs[k] / diag[k];
        } else {
            reduced[static_cast<std::size_t>(k)] = static_cast<Eigen::Index>(free_rows.size());
            free_rows.push_back(k);
        }
    }
    const auto nf = static_cast<Eigen::Index>(free_rows.size());
    Eigen::VectorXd rhs(nf);
    for (Eigen::Index r = 0; r < nf; ++r) {
        rhs[r] = system.rhs[free_rows[static_cast<std::size_t>(r)]];
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(compressed.nonZeros()));
    for (Eigen::Index c = 0; c < n; ++c) {
        const Eigen::Index rc = reduced[static_cast<std::size_t>(c)];
        for (Eigen::SparseMatrix<double>::InnerIterator it(compressed, c); it; ++it) {
            const Eigen::Index rr = reduced[static_cast<std::size_t>(it.row())];
            if (rr < 0) {
                continue;
            }
            if (rc < 0) {
                rhs[rr] -= it.value() * x[c];
            } else if (rr >= rc) {
                trip.emplace_back(rr, rc, it.value() * scale[c] / scale[it.row()]);
            }
        }
    }
    if (nf > 0) {
        LinearSolverCache local;
        LinearSolverCache::Impl& cimpl = cache ? cache->impl() : local.impl();
        Eigen::SparseMatrix<double> s(nf, nf);
        s.setFromTriplets(trip.begin(), trip.end());
        s.makeCompressed();
        cimpl.factorize_symmetric(s);
        if (cimpl.ldlt.info() == Eigen::Success) {
            Eigen::VectorXd w(nf);
            for (Eigen::Index r = 0; r < nf; ++r) {
                w[r] = rhs[r] / scale[free_rows[static_cast<std::size_t>(r)]];
            }
            for (int round = 0; round < 5; ++round) {
                const Eigen::VectorXd dw = cimpl.ldlt.solve(w);
                for (Eigen::Index r = 0; r < nf; ++r) {
                    const Eigen::Index k = free_rows[static_cast<std::size_t>(r)];
                    x[k] += dw[r] * scale[k];
                }
                const Eigen::VectorXd res = system.rhs - compressed * x;
                const double rel = res.norm() / bnorm;
                if (!std::isfinite(rel)) {
                    break;
                }
                if (rel <= tol) {
                    return x;
                }
                for (Eigen::Index r = 0; r < nf; ++r) {
                    const Eigen::Index k = free_rows[static_cast<std::size_t>(r)];
                    w[r] = res[k] / scale[k];
                }
            }
        }
    } else if ((system.rhs - compressed * x).norm() <= tol * bnorm) {
        return x;
    }
    return solve_linear(system, tol, cache);
}

namespace {

// Carriers at `psi` with quasi-Fermi potentials taken from `frozen`.
FieldState boltzmann_shift(const Mesh& mesh, const FieldState& frozen, const std::vector<double>& psi) {
    const double vt = mesh.material.thermal_voltage();
    FieldState s = frozen;
    s.psi = psi;
    for (std::size_t k = 0; k < psi.size(); ++k) {
        if (mesh.is_semiconductor(k)) {
            const double d = (psi[k] - frozen.psi[k]) / vt;
            s.n[k] = frozen.n[k] * std::exp(d);
            s.p[k] = frozen.p[k] * std::exp(-d);
        }
    }
    return s;
}

}  // namespace

SolveResult newton_poisson(const Mesh& mesh, FieldState state, const BiasSet& bias, const SolverOptions& opts,
                           LinearSolverCache* cache) {
    opts.validate(mesh.material);
    apply_contact_values(mesh, bias, state);
    const double vt = mesh.material.thermal_voltage();
    const double clamp = opts.psi_clamp / vt;
    const FieldState frozen = state;

    SolveResult out;
    ConvergenceTrace& trace = out.trace;
    std::vector<double> psi = state.psi;
    Eigen::VectorXd f = poisson_residual(mesh, frozen, psi, bias);
    double fnorm = f.norm();

    for (int it = 0; it < opts.max_newton; ++it) {
        const FieldState current = boltzmann_shift(mesh, frozen, psi);
        LinearSystem sys = assemble_poisson(mesh, current, bias);
        sys.rhs = -f;
        Eigen::VectorXd delta =
            solve_linear_symmetrized(sys, Eigen::VectorXd::Ones(sys.rhs.size()), opts.linear_tol, cache);
        const double raw_norm = delta.cwiseAbs().maxCoeff();
        Eigen::VectorXd clamped = delta;
        for (Eigen::Index k = 0; k < clamped.size(); ++k) {
            clamped[k] = std::clamp(clamped[k], -clamp, clamp);
        }

        // Backtrack on the residual norm along the clamped step, then along the
        // uniformly scaled Newton direction, which is always a descent direction.
        std::vector<double> trial(psi.size());
        Eigen::VectorXd f_trial;
        auto try_step = [&](const Eigen::VectorXd& d, int halvings) {
            double t = 1.0;
            for (int h = 0; h < halvings; ++h, t *= 0.5) {
                for (std::size_t k = 0; k < psi.size(); ++k) {
                    trial[k] = psi[k] + t * d[static_cast<Eigen::Index>(k)] * vt;
                }
                f_trial = poisson_residual(mesh, frozen, trial, bias);
                if (f_trial.norm() <= fnorm) {
                    return t * d.cwiseAbs().maxCoeff();
                }
            }
            return -1.0;
        };
        double step_norm = try_step(clamped, 4);
        if (step_norm < 0.0 && raw_norm > 0.0) {
            step_norm = try_step(delta * std::min(1.0, clamp / raw_norm), 40);
        }
        const bool moved = step_norm >= 0.0;
        if (moved) {
            psi.swap(trial);
            f = std::move(f_trial);
            fnorm = f.norm();
        }

        trace.psi_updates.push_back(moved ? step_norm * vt : 0.0);
        trace.residuals.push_back(fnorm);
        trace.iterations = it + 1;
        if (raw_norm * vt < opts.newton_tol) {
            trace.converged = true;
            break;
        }
        if (!moved) {
            break;
        }
    }
    out.state = boltzmann_shift(mesh, frozen, psi);
    if (!trace.converged) {
        throw ConvergenceError("nonlinear Poisson did not converge in " + std::to_string(opts.max_newton) +
                                   " Newton iterations",
                               trace, bias);
    }
    return out;
}

namespace {

// Type-II Anderson mixing of a fixed-point map x -> g(x).
class AndersonMixer {
public:
    explicit AndersonMixer(int depth) : depth_(depth) {}

    Eigen::VectorXd next(const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
        const Eigen::VectorXd f = g - x;
        const double fnorm = f.norm();
        if (has_prev_ && fnorm > 4.0 * best_) {
            df_.clear();
            dg_.clear();
        } else if (has_prev_) {
            df_.push_back(f - f_prev_);
            dg_.push_back(g - g_prev_);
            if (static_cast<int>(df_.size()) > depth_) {
                df_.erase(df_.begin());
                dg_.erase(dg_.begin());
            }
        }
        best_ = has_prev_ ? std::min(best_, fnorm) : fnorm;
        f_prev_ = f;
        g_prev_ = g;
        has_prev_ = true;
        if (df_.empty()) {
            return g;
        }
        const auto m = static_cast<Eigen::Index>(df_.size());
        Eigen::MatrixXd a(f.size(), m);
        Eigen::MatrixXd b(f.size(), m);
        for (Eigen::Index i = 0; i < m; ++i) {
            a.col(i) = df_[static_cast<std::size_t>(i)];
            b.col(i) = dg_[static_cast<std::size_t>(i)];
        }
        const Eigen::VectorXd gamma = a.colPivHouseholderQr().solve(f);
        if (!gamma.allFinite()) {
            df_.clear();
            dg_.clear();
            return g;
        }
        return g - b * gamma;
    }

private:
    int depth_;
    bool has_prev_ = false;
    double best_ = 0.0;
    Eigen::VectorXd f_prev_;
    Eigen::VectorXd g_prev_;
    std::vector<Eigen::VectorXd> df_;
    std::vector<Eigen::VectorXd> dg_;
};

Eigen::VectorXd as_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

SolveResult gummel_solve(const Mesh& mesh, FieldState state, const BiasSet& bias, const SolverOptions& opts) {
    opts.validate(mesh.material);
    apply_contact_values(mesh, bias, state);
    const MaterialParams& m = mesh.material;
    const double floor = 1e-200 * m.n_i;

    SolveResult out;
    ConvergenceTrace& trace = out.trace;
    LinearSolverCache poisson_cache;
    LinearSolverCache electron_cache;
    LinearSolverCache hole_cache;
    AndersonMixer mixer(opts.anderson_depth);

    auto poisson_step = [&](const FieldState& s, int it) {
        try {
            SolveResult r = newton_poisson(mesh, s, bias, opts, &poisson_cache);
            if (!r.trace.monotone) {
                trace.monotone = false;
            }
            return r;
        } catch (const ConvergenceError& e) {
            trace.iterations = it;
            throw ConvergenceError(std::string("Gummel iteration ") + std::to_string(it) + ": " + e.what(), trace,
                                   bias);
        }
    };

    // Warm carriers fix the quasi-Fermi potentials for the first Poisson solve.
    SolveResult poisson = poisson_step(state, 1);
    std::vector<double> n_prev = poisson.state.n;
    std::vector<double> p_prev = poisson.state.p;
    std::vector<double> x = poisson.state.psi;
    for (int it = 0; it < opts.max_gummel; ++it) {
        state = boltzmann_shift(mesh, poisson.state, x);
        double dcarrier = 0.0;
        for (Carrier c : {Carrier::electron, Carrier::hole}) {
            const LinearSystem sys = assemble_continuity(mesh, state, c, bias);
            const double sign = c == Carrier::electron ? 0.5 : -0.5;
            Eigen::VectorXd scale(static_cast<Eigen::Index>(sys.unknown_nodes.size()));
            for (std::size_t r = 0; r < sys.unknown_nodes.size(); ++r) {
                scale[static_cast<Eigen::Index>(r)] = std::exp(sign * state.psi[sys.unknown_nodes[r]] / m.thermal_voltage());
            }
            const Eigen::VectorXd sol = solve_linear_symmetrized(
                sys, scale, opts.linear_tol, c == Carrier::electron ? &electron_cache : &hole_cache);
            std::vector<double>& dens = c == Carrier::electron ? state.n : state.p;
            const std::vector<double>& old = c == Carrier::electron ? n_prev : p_prev;
            for (std::size_t r = 0; r < sys.unknown_nodes.size(); ++r) {
                const std::size_t k = sys.unknown_nodes[r];
                dens[k] = std::max(sol[static_cast<Eigen::Index>(r)] * m.n_i, floor);
                dcarrier = std::max(dcarrier, std::abs(dens[k] - old[k]) / std::max(old[k], m.n_i));
            }
        }
        n_prev = state.n;
        p_prev = state.p;

        poisson = poisson_step(state, it + 1);
        double dpsi = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            dpsi = std::max(dpsi, std::abs(poisson.state.psi[k] - x[k]));
        }
        trace.psi_updates.push_back(dpsi);
        trace.carrier_updates.push_back(dcarrier);
        trace.residuals.push_back(poisson.trace.residuals.empty() ? 0.0 : poisson.trace.residuals.back());
        trace.iterations = it + 1;
        if (dpsi < opts.gummel_tol_psi && dcarrier < opts.gummel_tol_carrier) {
            trace.converged = true;
            break;
        }
        if (opts.anderson_depth > 0) {
            const Eigen::VectorXd mixed = mixer.next(as_vector(x), as_vector(poisson.state.psi));
            x.assign(mixed.data(), mixed.data() + mixed.size());
        } else {
            x = poisson.state.psi;
        }
    }
    if (!trace.converged) {
        throw ConvergenceError("Gummel iteration did not converge in " + std::to_string(opts.max_gummel) +
                                   " cycles",
                               trace, bias);
    }
    out.state = std::move(state);
    return out;
}

namespace {

BiasSet interpolate(const BiasSet& from, const BiasSet& to, double t) {
    BiasSet b = to;
    for (auto& [name, v] : b) {
        auto it = from.find(name);
        const double v0 = it == from.end() ? v : it->second;
        v = v0 + (v - v0) * t;
    }
    return b;
}

}  // namespace

ContinuationResult continuation_solve(const Mesh& mesh, const BiasSet& from, const BiasSet& to,
                                      const SolverOptions& opts, const FieldState& warm) {
    check_bias(mesh, to);
    check_bias(mesh, from);
    double span = 0.0;
    for (const auto& [name, v] : to) {
        span = std::max(span, std::abs(v - from.at(name)));
    }
    ContinuationResult out;
    out.state = warm;
    if (span == 0.0) {
        return out;
    }
    const int n = std::max(1, static_cast<int>(std::ceil(span / opts.continuation_step_max - 1e-9)));
    const double dt_nominal = 1.0 / n;
    const double dt_min = dt_nominal / 64.0;

    double t = 0.0;
    double dt = dt_nominal;
    while (t < 1.0) {
        const double t_next = std::min(1.0, t + dt);
        const BiasSet b = interpolate(from, to, t_next);
        try {
            SolveResult r = gummel_solve(mesh, out.state, b, opts);
            out.state = std::move(r.state);
            ++out.steps;
            t = t_next;
            dt = std::min(dt_nominal, 2.0 * dt);
            // stay on the nominal grid when possible
            const double snapped = std::round(t / dt_nominal) * dt_nominal;
            if (std::abs(snapped - t) < 1e-12) {
                t = snapped;
            }
            if (std::abs(1.0 - t) < 1e-12) {
                t = 1.0;
            }
        } catch (const ConvergenceError& e) {
            dt *= 0.5;
            if (dt < dt_min) {
                throw ConvergenceError(std::string("continuation failed: ") + e.what(), e.trace(), b);
            }
        }
    }
    return out;
}

}  // namespace mset
