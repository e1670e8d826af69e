#include "quadmpc/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace quadmpc {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoEqualityFactor = 1e3;
constexpr double kRegularizationThreshold = 1e-9;
constexpr double kPolishDelta = 1e-7;
constexpr int kPolishRefinement = 10;
constexpr int kPolishEvery = 50;
constexpr int kPenaltyProbes = 3;
constexpr int kProbeLength = 25;

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double min_eigenvalue(const MatrixXd& sym) {
  if (sym.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

double primal_violation(const VectorXd& cx, const VectorXd& lb, const VectorXd& ub) {
  double v = 0.0;
  for (Index i = 0; i < cx.size(); ++i) v = std::max({v, cx(i) - ub(i), lb(i) - cx(i)});
  return v;
}

VectorXd project_box(const VectorXd& v, const VectorXd& lb, const VectorXd& ub) {
  return v.cwiseMax(lb).cwiseMin(ub);
}

// Problem data after Ruiz equilibration: Hs = c D H D, Cs = E C D, gs = c D g.
struct Scaled {
  MatrixXd H;
  VectorXd g;
  MatrixXd C;
  VectorXd lb;
  VectorXd ub;
  VectorXd d;
  VectorXd e;
  double c = 1.0;
};

Scaled equilibrate(const MatrixXd& h, const VectorXd& g, const QpProblem& prob, int iterations) {
  const Index n = g.size(), m = prob.num_constraints();
  Scaled s{h, g, prob.C, prob.lb, prob.ub, VectorXd::Ones(n), VectorXd::Ones(m), 1.0};

  auto safe = [](double norm) {
    if (norm < kMinScaling) return 1.0;
    return std::clamp(1.0 / std::sqrt(norm), 1.0 / kMaxScaling, kMaxScaling);
  };

  for (int it = 0; it < iterations; ++it) {
    VectorXd dx(n), de(m);
    for (Index j = 0; j < n; ++j) {
      double norm = s.H.col(j).cwiseAbs().maxCoeff();
      if (m > 0) norm = std::max(norm, s.C.col(j).cwiseAbs().maxCoeff());
      dx(j) = safe(norm);
    }
    for (Index i = 0; i < m; ++i) de(i) = safe(n > 0 ? s.C.row(i).cwiseAbs().maxCoeff() : 0.0);
    s.H = dx.asDiagonal() * s.H * dx.asDiagonal();
    s.C = de.asDiagonal() * s.C * dx.asDiagonal();
    s.g = dx.cwiseProduct(s.g);
    s.d = s.d.cwiseProduct(dx);
    s.e = s.e.cwiseProduct(de);

    double mean_col = 0.0;
    for (Index j = 0; j < n; ++j) mean_col += s.H.col(j).cwiseAbs().maxCoeff();
    mean_col = n > 0 ? mean_col / static_cast<double>(n) : 0.0;
    double gamma = std::max(mean_col, inf_norm(s.g));
    gamma = gamma < kMinScaling ? 1.0 : std::clamp(1.0 / gamma, 1.0 / kMaxScaling, kMaxScaling);
    s.H *= gamma;
    s.g *= gamma;
    s.c *= gamma;
  }
  s.lb = s.e.cwiseProduct(prob.lb);
  s.ub = s.e.cwiseProduct(prob.ub);
  return s;
}

struct Iterate {
  VectorXd x;  // unscaled
  VectorXd y;
  double residual = kInf;
};

// Solves the equality-constrained problem on a guessed active set and returns
// the unscaled primal/dual pair.
std::optional<Iterate> polish(const QpProblem& prob, const Scaled& s, const VectorXd& /*xs*/,
                              const VectorXd& zs, const VectorXd& ys) {
  const Index n = s.g.size(), m = s.lb.size();
  std::vector<Index> active;
  VectorXd target(m);
  for (Index i = 0; i < m; ++i) {
    const bool lower = std::isfinite(s.lb(i)) && zs(i) - s.lb(i) < -ys(i);
    const bool upper = std::isfinite(s.ub(i)) && s.ub(i) - zs(i) < ys(i);
    if (s.lb(i) == s.ub(i) || lower || upper) {
      active.push_back(i);
      target(i) = (upper && !lower) ? s.ub(i) : s.lb(i);
      if (s.lb(i) == s.ub(i)) target(i) = s.lb(i);
    }
  }
  const Index a = static_cast<Index>(active.size());
  MatrixXd kkt = MatrixXd::Zero(n + a, n + a);
  VectorXd rhs(n + a);
  kkt.topLeftCorner(n, n) = s.H;
  rhs.head(n) = -s.g;
  for (Index k = 0; k < a; ++k) {
    kkt.block(n + k, 0, 1, n) = s.C.row(active[k]);
    kkt.block(0, n + k, n, 1) = s.C.row(active[k]).transpose();
    rhs(n + k) = target(active[k]);
  }
  MatrixXd reg = kkt;
  reg.topLeftCorner(n, n).diagonal().array() += kPolishDelta;
  reg.bottomRightCorner(a, a).diagonal().array() -= kPolishDelta;
  Eigen::PartialPivLU<MatrixXd> lu(reg);
  VectorXd sol = lu.solve(rhs);
  for (int it = 0; it < kPolishRefinement; ++it) sol += lu.solve(rhs - kkt * sol);
  if (!sol.allFinite()) return std::nullopt;

  VectorXd ysp = VectorXd::Zero(m);
  for (Index k = 0; k < a; ++k) ysp(active[k]) = sol(n + k);
  Iterate out;
  out.x = s.d.cwiseProduct(sol.head(n));
  out.y = s.e.cwiseProduct(ysp) / s.c;
  out.residual = kkt_residual(prob, out.x, out.y);
  return out;
}

}  // namespace

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal:
      return "optimal";
    case QpStatus::MaxIter:
      return "max_iter";
    case QpStatus::Infeasible:
      return "infeasible";
  }
  return "unknown";
}

void QpProblem::validate() const {
  const Index n = g.size(), m = lb.size();
  if (H.rows() != n || H.cols() != n) throw DimensionMismatch("QP Hessian must be n x n");
  if (C.rows() != m || (m > 0 && C.cols() != n)) throw DimensionMismatch("QP constraint matrix must be m x n");
  if (ub.size() != m) throw DimensionMismatch("QP bound vectors must have equal length");
  if (!H.allFinite() || !g.allFinite() || !C.allFinite()) throw Error("QP data must be finite");
  if (n > 0 && (H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw Error("QP Hessian is not symmetric");
  for (Index i = 0; i < m; ++i) {
    if (std::isnan(lb(i)) || std::isnan(ub(i)) || lb(i) > ub(i)) throw Error("QP bounds must satisfy lb <= ub");
  }
  if (n > 0 && min_eigenvalue(0.5 * (H + H.transpose())) < -1e-8) throw Error("QP Hessian is not PSD");
}

double QpProblem::objective(const VectorXd& x) const { return 0.5 * x.dot(H * x) + g.dot(x); }

double kkt_residual(const QpProblem& prob, const VectorXd& x, const VectorXd& y) {
  const Index m = prob.num_constraints();
  if (x.size() != prob.num_variables() || y.size() != m)
    throw DimensionMismatch("kkt_residual: primal/dual sizes do not match the problem");
  VectorXd grad = prob.H * x + prob.g;
  VectorXd cx = VectorXd::Zero(m);
  if (m > 0) {
    grad += prob.C.transpose() * y;
    cx = prob.C * x;
  }
  double comp = 0.0;
  for (Index i = 0; i < m; ++i) {
    const double up = std::max(y(i), 0.0), lo = std::max(-y(i), 0.0);
    comp = std::max(comp, std::isfinite(prob.ub(i)) ? up * std::abs(prob.ub(i) - cx(i)) : up);
    comp = std::max(comp, std::isfinite(prob.lb(i)) ? lo * std::abs(cx(i) - prob.lb(i)) : lo);
  }
  return std::max({inf_norm(grad), primal_violation(cx, prob.lb, prob.ub), comp});
}

QpSolver::QpSolver(QpOptions options) : options_(options) {}

QpSolution QpSolver::solve(const QpProblem& prob) {
  const WarmStart* warm = nullptr;
  if (last_ && last_->x.size() == prob.num_variables() && last_->y.size() == prob.num_constraints())
    warm = &*last_;
  return run(prob, warm);
}

QpSolution QpSolver::solve(const QpProblem& prob, const WarmStart& warm) {
  if (warm.x.size() != prob.num_variables() || warm.y.size() != prob.num_constraints())
    throw DimensionMismatch("warm start does not match the problem dimensions");
  return run(prob, &warm);
}

QpSolution QpSolver::run(const QpProblem& prob, const WarmStart* warm) {
  prob.validate();
  const Index n = prob.num_variables(), m = prob.num_constraints();
  const QpOptions& opt = options_;

  QpSolution sol;
  if (n == 0) {
    sol.x = VectorXd::Zero(0);
    sol.y = VectorXd::Zero(m);
    const bool feasible = (prob.lb.array() <= 0.0).all() && (prob.ub.array() >= 0.0).all();
    sol.status = feasible ? QpStatus::Optimal : QpStatus::Infeasible;
    sol.kkt_residual = feasible ? 0.0 : kInf;
    last_ = WarmStart{sol.x, sol.y};
    return sol;
  }

  MatrixXd h = 0.5 * (prob.H + prob.H.transpose());
  if (min_eigenvalue(h) < kRegularizationThreshold) h.diagonal().array() += kRegularizationThreshold;

  const Scaled s = equilibrate(h, prob.g, prob, opt.scaling_iterations);

  VectorXd xs = VectorXd::Zero(n), ys = VectorXd::Zero(m);
  if (warm) {
    xs = warm->x.cwiseQuotient(s.d);
    ys = s.c * warm->y.cwiseQuotient(s.e);
  }
  VectorXd zs = m > 0 ? project_box(s.C * xs, s.lb, s.ub) : VectorXd::Zero(0);

  VectorXd rho(m);
  Eigen::LLT<MatrixXd> llt;
  auto set_penalty = [&](double base) {
    for (Index i = 0; i < m; ++i) {
      if (!std::isfinite(s.lb(i)) && !std::isfinite(s.ub(i)))
        rho(i) = kRhoMin;
      else if (s.lb(i) == s.ub(i))
        rho(i) = kRhoEqualityFactor * base;
      else
        rho(i) = base;
    }
    MatrixXd k = s.H;
    k.diagonal().array() += opt.sigma;
    if (m > 0) k += s.C.transpose() * rho.asDiagonal() * s.C;
    llt.compute(k);
    if (llt.info() != Eigen::Success) throw Error("QP reduced KKT factorization failed");
  };

  // One over-relaxed ADMM sweep; returns the fixed-point residual.
  auto sweep = [&]() {
    VectorXd rhs = opt.sigma * xs - s.g;
    if (m > 0) rhs += s.C.transpose() * (rho.cwiseProduct(zs) - ys);
    const VectorXd xt = llt.solve(rhs);
    const VectorXd x_new = opt.alpha * xt + (1.0 - opt.alpha) * xs;
    VectorXd z_new = zs, y_new = ys;
    if (m > 0) {
      const VectorXd z_relax = opt.alpha * (s.C * xt) + (1.0 - opt.alpha) * zs;
      z_new = project_box(z_relax + ys.cwiseQuotient(rho), s.lb, s.ub);
      y_new = ys + rho.cwiseProduct(z_relax - z_new);
    }
    const VectorXd dv = (z_new - zs) + (y_new - ys).cwiseQuotient(rho);
    const double fp = opt.sigma * (x_new - xs).squaredNorm() + dv.dot(rho.cwiseProduct(dv));
    xs = x_new;
    zs = z_new;
    ys = y_new;
    return fp;
  };

  // Penalty selection: a few short probes balance the scaled primal and dual
  // residuals, then the penalty is frozen for the solve proper.
  int iter = 0;
  double rho_base = opt.rho > 0.0 ? opt.rho : 0.1;
  set_penalty(rho_base);
  if (opt.rho <= 0.0 && m > 0) {
    for (int probe = 0; probe < kPenaltyProbes && iter < opt.max_iter; ++probe) {
      for (int i = 0; i < kProbeLength && iter < opt.max_iter; ++i, ++iter) sweep();
      const VectorXd cx = s.C * xs, hx = s.H * xs, cty = s.C.transpose() * ys;
      const double rp = inf_norm(cx - zs) / std::max({inf_norm(cx), inf_norm(zs), 1e-12});
      const double rd = inf_norm(hx + s.g + cty) / std::max({inf_norm(hx), inf_norm(cty), inf_norm(s.g), 1e-12});
      if (rp <= 0.0 || rd <= 0.0) break;
      const double next = std::clamp(rho_base * std::sqrt(rp / rd), 1e-6, 1e6);
      if (next > 5.0 * rho_base || next < 0.2 * rho_base) {
        rho_base = next;
        set_penalty(rho_base);
      }
    }
  }

  Iterate best;
  VectorXd ys_check = ys;
  bool converged = false;
  int last_polish = -kPolishEvery;
  const int check = std::max(1, opt.check_interval);

  auto consider = [&](Iterate cand) {
    if (cand.residual < best.residual) best = std::move(cand);
  };

  for (++iter; iter <= opt.max_iter; ++iter) {
    const double fp = sweep();
    if (opt.record_trace) sol.trace.push_back(fp);

    if (iter % check != 0 && iter != opt.max_iter) continue;

    Iterate cur{s.d.cwiseProduct(xs), s.e.cwiseProduct(ys) / s.c, 0.0};
    cur.residual = kkt_residual(prob, cur.x, cur.y);

    // ADMM primal/dual residuals, unscaled, with relative tolerances.
    const VectorXd z = m > 0 ? VectorXd(zs.cwiseQuotient(s.e)) : VectorXd::Zero(0);
    const VectorXd cx = m > 0 ? VectorXd(prob.C * cur.x) : VectorXd::Zero(0);
    const VectorXd hx = prob.H * cur.x;
    const VectorXd cty = m > 0 ? VectorXd(prob.C.transpose() * cur.y) : VectorXd::Zero(n);
    const double r_prim = inf_norm(cx - z);
    const double r_dual = inf_norm(hx + prob.g + cty);
    const double eps_prim = opt.tol * (1.0 + std::max(inf_norm(cx), inf_norm(z)));
    const double eps_dual = opt.tol * (1.0 + std::max({inf_norm(hx), inf_norm(cty), inf_norm(prob.g)}));
    const bool admm_done = r_prim <= eps_prim && r_dual <= eps_dual;

    if (admm_done && opt.polish && iter - last_polish >= kPolishEvery) {
      last_polish = iter;
      if (auto pol = polish(prob, s, xs, zs, ys); pol && pol->residual <= opt.tol) {
        consider(std::move(*pol));
        sol.polished = true;
        converged = true;
        break;
      }
    }
    const double cur_residual = cur.residual;
    consider(std::move(cur));
    if (admm_done && cur_residual <= opt.tol) {
      converged = true;
      break;
    }

    // Primal infeasibility certificate from the dual increment.
    if (m > 0) {
      VectorXd dy = s.e.cwiseProduct(ys - ys_check) / s.c;
      ys_check = ys;
      for (Index i = 0; i < m; ++i) {
        if ((dy(i) > 0.0 && !std::isfinite(prob.ub(i))) || (dy(i) < 0.0 && !std::isfinite(prob.lb(i)))) dy(i) = 0.0;
      }
      const double norm = inf_norm(dy);
      if (norm > 1e-30) {
        dy /= norm;
        double support = 0.0;
        for (Index i = 0; i < m; ++i) support += dy(i) > 0.0 ? prob.ub(i) * dy(i) : prob.lb(i) * dy(i);
        if (inf_norm(prob.C.transpose() * dy) <= opt.infeasibility_tol && support < -opt.infeasibility_tol) {
          sol.status = QpStatus::Infeasible;
          sol.x = s.d.cwiseProduct(xs);
          sol.y = dy;
          sol.objective = prob.objective(sol.x);
          sol.kkt_residual = kkt_residual(prob, sol.x, s.e.cwiseProduct(ys) / s.c);
          sol.iterations = iter;
          last_.reset();
          return sol;
        }
      }
    }
  }

  if (!converged && opt.polish) {
    if (auto pol = polish(prob, s, xs, zs, ys); pol && pol->residual <= opt.tol) {
      consider(std::move(*pol));
      sol.polished = true;
      converged = true;
    }
  }

  if (best.x.size() != n) {
    best = Iterate{s.d.cwiseProduct(xs), s.e.cwiseProduct(ys) / s.c, 0.0};
    best.residual = kkt_residual(prob, best.x, best.y);
  }
  sol.x = best.x;
  sol.y = best.y;
  sol.kkt_residual = best.residual;
  sol.objective = prob.objective(sol.x);
  sol.status = converged ? QpStatus::Optimal : QpStatus::MaxIter;
  sol.iterations = std::min(iter, opt.max_iter);
  last_ = WarmStart{sol.x, sol.y};
  return sol;
}

void write_qp_dump(const QpProblem& prob, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open QP dump file: " + path.string());
  out.precision(17);
  auto block = [&out](const char* name, const MatrixXd& mat) {
    out << name << ' ' << mat.rows() << ' ' << mat.cols() << '\n';
    for (Index i = 0; i < mat.rows(); ++i) {
      for (Index j = 0; j < mat.cols(); ++j) out << (j ? " " : "") << mat(i, j);
      out << '\n';
    }
  };
  block("H", prob.H);
  block("g", prob.g);
  block("C", prob.C);
  block("lb", prob.lb);
  block("ub", prob.ub);
  if (!out) throw Error("failed writing QP dump file: " + path.string());
}

}  // namespace quadmpc
