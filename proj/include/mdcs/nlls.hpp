#pragma once

// Bound-constrained Levenberg-Marquardt least squares.
//
// A residual model is any callable returning the residual vector for a
// parameter vector. If it also provides `jacobian(p)`, the analytic Jacobian
// is used; otherwise forward differences are taken (stepping inward at bounds).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdcs/physics.hpp"

namespace mdcs {

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> params;
  std::vector<double> sigma;
  double residual_norm = 0.0;  // sum of squared residuals
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;
  double gradient_norm = 0.0;  // max |cos| between residual and Jacobian columns
  std::vector<std::string> notes;

  std::size_t index(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    throw std::out_of_range("FitResult: no parameter named " + std::string(name));
  }
  double value(std::string_view name) const { return params[index(name)]; }
  double error(std::string_view name) const { return sigma[index(name)]; }

  bool operator==(const FitResult&) const = default;
};

struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  static Bounds unbounded(std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    return {std::vector<double>(n, -inf), std::vector<double>(n, inf)};
  }
};

struct NllsOptions {
  int max_iterations = 500;
  double step_tol = 1e-10;      // relative parameter step
  double cost_tol = 1e-12;      // relative decrease of the sum of squares
  double gradient_tol = 1e-6;   // max |cos| between residual and any Jacobian column
  double fd_rel_step = 1e-7;
  bool absolute_sigma = false;  // true: residuals are already normalised by known errors
};

template <class M>
concept ResidualModel = requires(const M& m, const Eigen::VectorXd& p) {
  { m(p) } -> std::convertible_to<Eigen::VectorXd>;
};

template <class M>
concept WithJacobian = ResidualModel<M> && requires(const M& m, const Eigen::VectorXd& p) {
  { m.jacobian(p) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// Forward-difference Jacobian of `model` at `p`, stepping away from bounds.
template <ResidualModel M>
Eigen::MatrixXd finite_difference_jacobian(const M& model, const Eigen::VectorXd& p, const Eigen::VectorXd& r0,
                                           const Bounds& bounds, double rel_step) {
  Eigen::MatrixXd jac(r0.size(), p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double h = rel_step * std::max(std::abs(p[i]), 1.0);
    if (p[i] + h > bounds.upper[static_cast<std::size_t>(i)]) h = -h;
    Eigen::VectorXd q = p;
    q[i] += h;
    const Eigen::VectorXd r1 = model(q);
    jac.col(i) = (r1 - r0) / (q[i] - p[i]);
  }
  return jac;
}

namespace detail {

template <ResidualModel M>
Eigen::MatrixXd jacobian_of(const M& model, const Eigen::VectorXd& p, const Eigen::VectorXd& r,
                            const Bounds& b, const NllsOptions& opt) {
  if constexpr (WithJacobian<M>) {
    return model.jacobian(p);
  } else {
    return finite_difference_jacobian(model, p, r, b, opt.fd_rel_step);
  }
}

inline Eigen::VectorXd clamp_to(const Eigen::VectorXd& p, const Bounds& b) {
  Eigen::VectorXd q = p;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    q[i] = std::clamp(p[i], b.lower[static_cast<std::size_t>(i)], b.upper[static_cast<std::size_t>(i)]);
  return q;
}

inline bool at_lower(const Eigen::VectorXd& p, const Bounds& b, Eigen::Index i) {
  return p[i] <= b.lower[static_cast<std::size_t>(i)];
}
inline bool at_upper(const Eigen::VectorXd& p, const Bounds& b, Eigen::Index i) {
  return p[i] >= b.upper[static_cast<std::size_t>(i)];
}

// Largest |cos| between the residual and a Jacobian column, ignoring
// components that point out of an active bound and zero columns.
inline double projected_gradient_cosine(const Eigen::MatrixXd& jac, const Eigen::VectorXd& r,
                                        const Eigen::VectorXd& p, const Bounds& b) {
  const double rn = r.norm();
  if (rn == 0.0) return 0.0;
  const Eigen::VectorXd g = jac.transpose() * r;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double cn = jac.col(i).norm();
    if (cn == 0.0) continue;
    // descent direction is -g
    if (at_lower(p, b, i) && g[i] > 0.0) continue;
    if (at_upper(p, b, i) && g[i] < 0.0) continue;
    worst = std::max(worst, std::abs(g[i]) / (cn * rn));
  }
  return worst;
}

}  // namespace detail

/// Damped Gauss-Newton descent with Marquardt scaling and projection onto the
/// bounds. Deterministic. Parameters resting on a bound, and parameters with
/// an identically zero Jacobian column, are excluded from the covariance and
/// reported with zero uncertainty.
template <ResidualModel M>
FitResult nlls_fit(const M& model, std::span<const double> init, const Bounds& bounds,
                   std::vector<std::string> names, const NllsOptions& opt = {}) {
  const auto n = static_cast<Eigen::Index>(init.size());
  if (n == 0) throw DomainError("nlls_fit: no parameters");
  if (bounds.lower.size() != init.size() || bounds.upper.size() != init.size())
    throw DomainError("nlls_fit: bounds size mismatch");
  if (names.size() != init.size()) throw DomainError("nlls_fit: names size mismatch");
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!std::isfinite(init[k])) throw DomainError("nlls_fit: non-finite initial value");
    if (init[k] < bounds.lower[k] || init[k] > bounds.upper[k])
      throw DomainError("nlls_fit: initial value for " + names[k] + " outside bounds");
    x[i] = init[k];
  }

  Eigen::VectorXd r = model(x);
  if (r.size() < n) throw DomainError("nlls_fit: fewer residuals than parameters");
  if (!r.allFinite()) throw DomainError("nlls_fit: non-finite residual at initial point");
  double cost = r.squaredNorm();
  const double cost0 = cost;

  FitResult out;
  out.names = std::move(names);
  double lambda = 1e-3;
  bool small_step = false;
  bool stalled = false;
  Eigen::MatrixXd jac;
  int it = 0;

  for (;; ++it) {
    jac = detail::jacobian_of(model, x, r, bounds, opt);
    const double gcos = detail::projected_gradient_cosine(jac, r, x, bounds);
    out.gradient_norm = gcos;
    const bool tiny_cost = cost <= 1e-24 * std::max(cost0, 1e-300) || cost == 0.0;
    const bool grad_ok = gcos <= opt.gradient_tol || tiny_cost;
    if (grad_ok && (small_step || it == 0 || tiny_cost)) {
      out.converged = true;
      break;
    }
    if (stalled) {
      out.converged = grad_ok;
      if (!grad_ok) out.notes.push_back("no further decrease possible");
      break;
    }
    if (it >= opt.max_iterations) {
      out.notes.push_back("iteration limit reached");
      break;
    }

    Eigen::MatrixXd a = jac.transpose() * jac;
    Eigen::VectorXd g = jac.transpose() * r;
    // Coordinates held on a bound by the gradient are frozen for this step.
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool active = (detail::at_lower(x, bounds, i) && g[i] > 0.0) || (detail::at_upper(x, bounds, i) && g[i] < 0.0);
      if (!active) continue;
      a.row(i).setZero();
      a.col(i).setZero();
      a(i, i) = 1.0;
      g[i] = 0.0;
    }
    Eigen::VectorXd d = a.diagonal();
    const double dmax = std::max(d.maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < n; ++i) d[i] = std::max(d[i], 1e-12 * dmax);

    bool accepted = false;
    bool singular = false;
    while (!accepted) {
      Eigen::MatrixXd damped = a;
      damped.diagonal() += lambda * d;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      const Eigen::VectorXd delta = ldlt.solve(-g);
      if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
        singular = true;
        break;
      }
      const Eigen::VectorXd xn = detail::clamp_to(x + delta, bounds);
      const Eigen::VectorXd rn = model(xn);
      const double cn = rn.allFinite() ? rn.squaredNorm() : std::numeric_limits<double>::infinity();
      if (cn < cost) {
        const double step = (xn - x).norm();
        small_step = step <= opt.step_tol * (x.norm() + opt.step_tol) ||
                     (cost - cn) <= opt.cost_tol * cost;
        x = xn;
        r = rn;
        cost = cn;
        lambda = std::max(lambda / 3.0, 1e-15);
        accepted = true;
      } else {
        lambda *= 4.0;
        if (lambda > 1e16) break;
      }
    }
    if (singular) {
      out.notes.push_back("singular normal equations");
      break;
    }
    if (!accepted) stalled = true;
  }

  out.iterations = it;
  out.residual_norm = cost;
  out.params.assign(x.data(), x.data() + n);
  out.sigma.assign(static_cast<std::size_t>(n), 0.0);

  // Covariance over the free, identifiable parameters.
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (detail::at_lower(x, bounds, i) || detail::at_upper(x, bounds, i)) continue;
    if (jac.col(i).norm() == 0.0) continue;
    free.push_back(i);
  }
  if (!free.empty()) {
    Eigen::MatrixXd jf(jac.rows(), static_cast<Eigen::Index>(free.size()));
    for (std::size_t k = 0; k < free.size(); ++k) jf.col(static_cast<Eigen::Index>(k)) = jac.col(free[k]);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jf, Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    const double thresh = s.size() ? s[0] * 1e-13 * static_cast<double>(std::max(jf.rows(), jf.cols())) : 0.0;
    Eigen::VectorXd inv_s2 = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index k = 0; k < s.size(); ++k)
      if (s[k] > thresh) inv_s2[k] = 1.0 / (s[k] * s[k]);
    const Eigen::MatrixXd cov = svd.matrixV() * inv_s2.asDiagonal() * svd.matrixV().transpose();
    const auto dof = static_cast<double>(r.size()) - static_cast<double>(free.size());
    const double scale = opt.absolute_sigma ? 1.0 : (dof > 0.0 ? cost / dof : 0.0);
    for (std::size_t k = 0; k < free.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      out.sigma[static_cast<std::size_t>(free[k])] = std::sqrt(std::max(cov(kk, kk) * scale, 0.0));
    }
  }
  return out;
}

}  // namespace mdcs
