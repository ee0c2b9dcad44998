#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) least squares with parameter
// covariance. Every fit in the toolkit goes through least_squares().

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qdtk/errors.hpp"

namespace qdtk::numerics {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Fills `residuals` (pre-sized to the problem's residual count) at `params`.
using ResidualFn = std::function<void(const Vector& params, Vector& residuals)>;
/// Fills the m x p Jacobian of the residual vector at `params`.
using JacobianFn = std::function<void(const Vector& params, Matrix& jacobian)>;

struct FitProblem {
    ResidualFn residuals;
    JacobianFn jacobian;  // empty: forward differences
    Index num_residuals = 0;
    Vector initial;
    std::optional<Vector> lower;
    std::optional<Vector> upper;
    int max_iterations = 200;
    double tolerance = 1e-10;  // relative cost decrease or relative step
};

struct FitResult {
    Vector params;
    Vector std_errors;
    Matrix covariance;
    Matrix jacobian;  // residual Jacobian at the returned point
    double rss = 0.0;
    int iterations = 0;
    bool converged = false;
    bool singular = false;
    std::vector<std::string> warnings;

    Index num_residuals() const { return jacobian.rows(); }
    Index dof() const { return jacobian.rows() - params.size(); }
    /// Residual variance estimate s^2 = RSS / (m - p).
    double residual_variance() const { return rss / static_cast<double>(dof()); }
};

/// Forward-difference step used for parameter value `x`.
inline double difference_step(double x) {
    return std::sqrt(std::numeric_limits<double>::epsilon()) * std::max(std::abs(x), 1.0);
}

namespace detail {

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void project(Vector& x, const std::optional<Vector>& lo, const std::optional<Vector>& hi) {
    if (lo) x = x.cwiseMax(*lo);
    if (hi) x = x.cwiseMin(*hi);
}

inline void forward_difference(const FitProblem& pb, const Vector& x, const Vector& r, Matrix& jac) {
    const Index m = pb.num_residuals;
    const Index p = x.size();
    jac.resize(m, p);
    Vector xp = x;
    Vector rp(m);
    for (Index j = 0; j < p; ++j) {
        double h = difference_step(x[j]);
        if (pb.upper && x[j] + h > (*pb.upper)[j]) h = -h;
        const double shifted = x[j] + h;
        h = shifted - x[j];  // exactly representable step
        xp[j] = shifted;
        pb.residuals(xp, rp);
        jac.col(j) = (rp - r) / h;
        xp[j] = x[j];
    }
}

// Central differences at the optimum; the covariance needs more accuracy than
// the iteration does.
inline void central_difference(const FitProblem& pb, const Vector& x, Matrix& jac) {
    const Index m = pb.num_residuals;
    const Index p = x.size();
    jac.resize(m, p);
    Vector xp = x;
    Vector up(m);
    Vector down(m);
    for (Index j = 0; j < p; ++j) {
        const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(std::abs(x[j]), 1.0);
        const double hi = pb.upper ? std::min(x[j] + h, (*pb.upper)[j]) : x[j] + h;
        const double lo = pb.lower ? std::max(x[j] - h, (*pb.lower)[j]) : x[j] - h;
        xp[j] = hi;
        pb.residuals(xp, up);
        xp[j] = lo;
        pb.residuals(xp, down);
        xp[j] = x[j];
        if (!up.allFinite() || !down.allFinite() || hi <= lo) {
            jac.resize(0, 0);
            return;
        }
        jac.col(j) = (up - down) / (hi - lo);
    }
}

inline void evaluate_jacobian(const FitProblem& pb, const Vector& x, const Vector& r, Matrix& jac) {
    if (pb.jacobian) {
        jac.resize(pb.num_residuals, x.size());
        pb.jacobian(x, jac);
    } else {
        forward_difference(pb, x, r, jac);
    }
}

// (J^T J)^+ through the SVD of J; reports whether any direction was dropped.
inline std::pair<Matrix, bool> normal_pseudo_inverse(const Matrix& jac) {
    Eigen::JacobiSVD<Matrix> svd(jac, Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const Index p = jac.cols();
    const double cutoff = (s.size() > 0 ? s[0] : 0.0) * 1e-10;
    Vector inv_sq = Vector::Zero(p);
    bool singular = false;
    for (Index i = 0; i < s.size(); ++i) {
        if (s[i] > cutoff && s[i] > 0.0) {
            inv_sq[i] = 1.0 / (s[i] * s[i]);
        } else {
            singular = true;
        }
    }
    if (s.size() < p) singular = true;
    const Matrix& v = svd.matrixV();
    Matrix out = v * inv_sq.asDiagonal() * v.transpose();
    out = 0.5 * (out + out.transpose()).eval();
    return {out, singular};
}

}  // namespace detail

/// Minimizes the sum of squared residuals starting from `problem.initial`.
///
/// The covariance is s^2 (J^T J)^-1 with s^2 = RSS/(m-p), J taken at the
/// returned point. A singular normal matrix falls back to the pseudo-inverse
/// and sets `singular`. Running out of iterations returns the best point seen
/// with `converged == false`.
inline FitResult least_squares(const FitProblem& problem) {
    const Index p = problem.initial.size();
    const Index m = problem.num_residuals;
    if (!problem.residuals) throw InputError("least_squares: residual function is empty");
    if (p == 0) throw InputError("least_squares: no parameters");
    if (m <= p) {
        throw InputError("least_squares: underdetermined problem (" + std::to_string(m) +
                         " residuals for " + std::to_string(p) + " parameters)");
    }
    if (!detail::all_finite(problem.initial)) throw InputError("least_squares: initial parameters not finite");
    if (problem.lower && problem.lower->size() != p) throw InputError("least_squares: lower bound size mismatch");
    if (problem.upper && problem.upper->size() != p) throw InputError("least_squares: upper bound size mismatch");
    if (problem.lower && problem.upper && ((*problem.lower).array() > (*problem.upper).array()).any()) {
        throw InputError("least_squares: lower bound exceeds upper bound");
    }
    if ((problem.lower && (problem.initial.array() < problem.lower->array()).any()) ||
        (problem.upper && (problem.initial.array() > problem.upper->array()).any())) {
        throw InputError("least_squares: initial parameters outside bounds");
    }

    const double tol = problem.tolerance;
    Vector x = problem.initial;
    Vector r(m);
    problem.residuals(x, r);
    if (!detail::all_finite(r)) throw InputError("least_squares: residuals not finite at initial parameters");
    double cost = r.squaredNorm();

    Matrix jac;
    detail::evaluate_jacobian(problem, x, r, jac);
    Matrix normal = jac.transpose() * jac;
    Vector grad = jac.transpose() * r;
    Vector scale = normal.diagonal().cwiseMax(0.0);
    const double scale_floor = std::max(scale.maxCoeff(), 1.0) * 1e-14;
    scale = scale.cwiseMax(scale_floor);

    double mu = 1e-3 * scale.maxCoeff();
    double nu = 2.0;
    bool converged = cost == 0.0;
    int iterations = 0;

    Vector x_new(p);
    Vector r_new(m);
    while (!converged && iterations < problem.max_iterations) {
        ++iterations;
        Matrix damped = normal;
        damped.diagonal() += mu * scale;
        Eigen::LDLT<Matrix> ldlt(damped);
        Vector step = ldlt.solve(-grad);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            mu *= nu;
            nu *= 2.0;
            continue;
        }
        x_new = x + step;
        detail::project(x_new, problem.lower, problem.upper);
        step = x_new - x;

        const double step_norm = step.norm();
        const bool tiny_step = step_norm <= tol * (x.norm() + tol);

        problem.residuals(x_new, r_new);
        const double cost_new = detail::all_finite(r_new) ? r_new.squaredNorm()
                                                          : std::numeric_limits<double>::infinity();
        const double predicted = -(2.0 * grad.dot(step) + step.dot(normal * step));
        if (cost_new < cost) {
            const double actual = cost - cost_new;
            const double rho = predicted > 0.0 ? actual / predicted : 1.0;
            const double relative_decrease = actual / cost;
            x = x_new;
            r = r_new;
            cost = cost_new;
            detail::evaluate_jacobian(problem, x, r, jac);
            normal = jac.transpose() * jac;
            grad = jac.transpose() * r;
            scale = scale.cwiseMax(normal.diagonal());
            mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
            nu = 2.0;
            if (cost == 0.0 || relative_decrease < tol || tiny_step) converged = true;
        } else {
            if (tiny_step) {
                converged = true;
                break;
            }
            mu *= nu;
            nu *= 2.0;
            if (!std::isfinite(mu) || mu > 1e300) break;
        }
    }

    FitResult out;
    out.params = x;
    out.rss = cost;
    out.iterations = iterations;
    out.converged = converged;
    if (!problem.jacobian) {
        Matrix refined;
        detail::central_difference(problem, x, refined);
        if (refined.size() > 0) jac = std::move(refined);
    }
    out.jacobian = jac;
    auto [pinv, singular] = detail::normal_pseudo_inverse(jac);
    out.singular = singular;
    out.covariance = (cost / static_cast<double>(m - p)) * pinv;
    out.std_errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    if (!converged) {
        out.warnings.push_back("fit did not converge within " + std::to_string(problem.max_iterations) +
                               " iterations");
    }
    if (singular) out.warnings.push_back("singular normal matrix; pseudo-inverse used for covariance");
    return out;
}

struct CurveFitOptions {
    std::optional<Vector> lower;
    std::optional<Vector> upper;
    std::vector<double> sigma;  // optional per-point standard deviations
    int max_iterations = 200;
    double tolerance = 1e-10;
};

/// Fits a vectorized model to `data`.
///
/// `model(params, out)` writes the prediction for every data point into `out`.
/// `model_jacobian(params, jac)`, when given, writes d(model)/d(params).
template <class Model>
FitResult fit_curve(Model&& model, std::span<const double> data, const Vector& initial,
                    const CurveFitOptions& options = {},
                    std::function<void(const Vector&, Matrix&)> model_jacobian = {}) {
    const Index m = static_cast<Index>(data.size());
    if (!options.sigma.empty() && options.sigma.size() != data.size()) {
        throw InputError("fit_curve: sigma vector length differs from data length");
    }
    Vector y = Eigen::Map<const Vector>(data.data(), m);
    Vector inv_sigma = Vector::Ones(m);
    for (Index i = 0; i < static_cast<Index>(options.sigma.size()); ++i) {
        if (!(options.sigma[i] > 0.0)) throw InputError("fit_curve: sigma entries must be positive");
        inv_sigma[i] = 1.0 / options.sigma[i];
    }

    FitProblem problem;
    problem.num_residuals = m;
    problem.initial = initial;
    problem.lower = options.lower;
    problem.upper = options.upper;
    problem.max_iterations = options.max_iterations;
    problem.tolerance = options.tolerance;
    problem.residuals = [&model, y, inv_sigma](const Vector& p, Vector& res) {
        model(p, res);
        res = (res - y).cwiseProduct(inv_sigma);
    };
    if (model_jacobian) {
        problem.jacobian = [model_jacobian, inv_sigma](const Vector& p, Matrix& jac) {
            model_jacobian(p, jac);
            jac = inv_sigma.asDiagonal() * jac;
        };
    }
    return least_squares(problem);
}

/// Convenience wrapper for scalar models f(x, params).
template <class F>
FitResult fit_function(F&& f, std::span<const double> x, std::span<const double> y, const Vector& initial,
                       const CurveFitOptions& options = {}) {
    if (x.size() != y.size()) throw InputError("fit_function: x and y lengths differ");
    auto model = [&f, x](const Vector& p, Vector& out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[static_cast<Index>(i)] = f(x[i], p);
    };
    return fit_curve(model, y, initial, options);
}

/// Covariance of least-squares parameters when the residual noise is
/// stationary but correlated: (J^T J)^-1 J^T S J (J^T J)^-1, with S built from
/// the autocovariance `gamma` (gamma[k] at lag k, zero beyond the last lag).
/// `positions` gives the sample index of each residual row so gaps are honored.
inline Matrix sandwich_covariance(const Matrix& jac, std::span<const double> gamma,
                                  std::span<const long> positions) {
    const Index m = jac.rows();
    if (static_cast<Index>(positions.size()) != m) throw InputError("sandwich_covariance: position count mismatch");
    if (gamma.empty()) throw InputError("sandwich_covariance: empty autocovariance");
    const long max_lag = static_cast<long>(gamma.size()) - 1;
    Matrix sj = Matrix::Zero(m, jac.cols());
    for (Index i = 0; i < m; ++i) {
        for (Index k = 0; k < m; ++k) {
            const long lag = std::abs(positions[static_cast<std::size_t>(i)] - positions[static_cast<std::size_t>(k)]);
            if (lag <= max_lag) sj.row(i) += gamma[static_cast<std::size_t>(lag)] * jac.row(k);
        }
    }
    auto [bread, singular] = detail::normal_pseudo_inverse(jac);
    (void)singular;
    Matrix meat = jac.transpose() * sj;
    Matrix out = bread * meat * bread;
    return 0.5 * (out + out.transpose());
}

/// Delta-method variance of a scalar function of the fitted parameters.
template <class F>
double propagate_variance(F&& f, const Vector& params, const Matrix& covariance) {
    const Index p = params.size();
    Vector grad(p);
    Vector shifted = params;
    for (Index j = 0; j < p; ++j) {
        const double h = difference_step(params[j]) * 1e2;  // central difference, cube-root-ish step
        shifted[j] = params[j] + h;
        const double up = f(shifted);
        shifted[j] = params[j] - h;
        const double down = f(shifted);
        shifted[j] = params[j];
        grad[j] = (up - down) / (2.0 * h);
    }
    return std::max(0.0, grad.dot(covariance * grad));
}

}  // namespace qdtk::numerics
