#pragma once

// Reference solvers shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "quadmpc/qp_solver.hpp"

namespace quadmpc::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Feasible random problem with a strictly convex Hessian.
inline QpProblem random_problem(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dn(1, 8), dm(0, 12), kind(0, 9);
  std::uniform_real_distribution<double> u(-1, 1), w(0, 1), eps(0.01, 1.0);
  const int n = dn(rng), m = dm(rng);
  MatrixXd mm(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) mm(i, j) = u(rng);
  QpProblem p;
  p.H = mm.transpose() * mm;
  p.H.diagonal().array() += eps(rng);
  p.H = 0.5 * (p.H + p.H.transpose());
  p.g.resize(n);
  for (int i = 0; i < n; ++i) p.g(i) = 3 * u(rng);
  VectorXd x0(n);
  for (int i = 0; i < n; ++i) x0(i) = u(rng);
  p.C.resize(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) p.C(i, j) = u(rng);
  p.lb.resize(m);
  p.ub.resize(m);
  int equalities = 0;
  for (int i = 0; i < m; ++i) {
    const double c = p.C.row(i).dot(x0);
    p.lb(i) = c - w(rng);
    p.ub(i) = c + w(rng);
    const int k = kind(rng);
    if (k == 0) p.lb(i) = -std::numeric_limits<double>::infinity();
    if (k == 1) p.ub(i) = std::numeric_limits<double>::infinity();
    if (k == 2 && equalities < 2 && equalities < n - 1) {
      p.lb(i) = p.ub(i) = c;
      ++equalities;
    }
  }
  return p;
}

// Accelerated projected gradient ascent on the dual, run to convergence.
// Independent of the solver under test: only needs H^-1 and a box projection.
inline double dual_gradient_oracle(const QpProblem& p, VectorXd* x_out = nullptr) {
  const Eigen::Index n = p.g.size(), m = p.lb.size();
  const Eigen::LDLT<MatrixXd> hinv(p.H);
  auto primal = [&](const VectorXd& mu, const VectorXd& nu) {
    VectorXd rhs = -p.g;
    if (m > 0) rhs -= p.C.transpose() * (mu - nu);
    return VectorXd(hinv.solve(rhs));
  };
  if (m == 0) {
    const VectorXd x = primal(VectorXd(), VectorXd());
    if (x_out) *x_out = x;
    return p.objective(x);
  }
  const MatrixXd g = p.C * hinv.solve(p.C.transpose());
  const double lip = 2.0 * Eigen::SelfAdjointEigenSolver<MatrixXd>(g).eigenvalues().cwiseAbs().maxCoeff() + 1e-12;
  auto clip = [&](VectorXd& mu, VectorXd& nu) {
    for (Eigen::Index i = 0; i < m; ++i) {
      mu(i) = std::isfinite(p.ub(i)) ? std::max(mu(i), 0.0) : 0.0;
      nu(i) = std::isfinite(p.lb(i)) ? std::max(nu(i), 0.0) : 0.0;
    }
  };
  auto dual_value = [&](const VectorXd& mu, const VectorXd& nu, const VectorXd& x) {
    double v = p.objective(x) + mu.dot((p.C * x - p.ub).unaryExpr([](double d) { return std::isfinite(d) ? d : 0.0; }));
    v += nu.dot((p.lb - p.C * x).unaryExpr([](double d) { return std::isfinite(d) ? d : 0.0; }));
    return v;
  };
  VectorXd mu = VectorXd::Zero(m), nu = VectorXd::Zero(m), mu_prev = mu, nu_prev = nu;
  double t = 1.0;
  VectorXd x = primal(mu, nu);
  for (int it = 0; it < 400000; ++it) {
    const double t_next = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
    const double beta = (t - 1) / t_next;
    VectorXd ymu = mu + beta * (mu - mu_prev), ynu = nu + beta * (nu - nu_prev);
    const VectorXd xy = primal(ymu, ynu);
    const VectorXd cx = p.C * xy;
    mu_prev = mu;
    nu_prev = nu;
    for (Eigen::Index i = 0; i < m; ++i) {
      mu(i) = ymu(i) + (std::isfinite(p.ub(i)) ? cx(i) - p.ub(i) : 0.0) / lip;
      nu(i) = ynu(i) + (std::isfinite(p.lb(i)) ? p.lb(i) - cx(i) : 0.0) / lip;
    }
    clip(mu, nu);
    // gradient-based restart
    if ((ymu - mu).dot(mu - mu_prev) + (ynu - nu).dot(nu - nu_prev) > 0) t = 1.0;
    else t = t_next;
    x = primal(mu, nu);
    if (it % 50 == 0) {
      const VectorXd c = p.C * x;
      double viol = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) viol = std::max({viol, c(i) - p.ub(i), p.lb(i) - c(i)});
      const double f = p.objective(x);
      if (viol < 1e-13 && std::abs(f - dual_value(mu, nu, x)) < 1e-13 * (1 + std::abs(f))) break;
    }
  }
  if (x_out) *x_out = x;
  return p.objective(x);
}

// RK4 on the augmented [[A, B], [0, 0]] flow, many substeps.
inline MatrixXd fine_flow(const MatrixXd& m, double dt, int steps) {
  const double h = dt / steps;
  MatrixXd phi = MatrixXd::Identity(m.rows(), m.cols());
  for (int i = 0; i < steps; ++i) {
    const MatrixXd k1 = m * phi;
    const MatrixXd k2 = m * (phi + 0.5 * h * k1);
    const MatrixXd k3 = m * (phi + 0.5 * h * k2);
    const MatrixXd k4 = m * (phi + h * k3);
    phi += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return phi;
}

}  // namespace quadmpc::oracle
