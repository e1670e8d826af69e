#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "quadmpc/types.hpp"

namespace quadmpc {

/// minimize 1/2 x'Hx + g'x  subject to  lb <= Cx <= ub.
/// Bounds may be +-infinity; lb == ub encodes an equality row.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd C;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  Eigen::Index num_variables() const { return g.size(); }
  Eigen::Index num_constraints() const { return lb.size(); }

  /// Throws DimensionMismatch or Error when the problem is malformed.
  void validate() const;
  double objective(const Eigen::VectorXd& x) const;
};

enum class QpStatus { Optimal, MaxIter, Infeasible };

const char* to_string(QpStatus status);

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // multipliers, positive at upper bounds, negative at lower bounds
  double objective = 0.0;
  QpStatus status = QpStatus::MaxIter;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool polished = false;
  // Per-iteration fixed-point residual, only filled when QpOptions::record_trace is set.
  std::vector<double> trace;
};

struct QpOptions {
  int max_iter = 4000;
  double tol = 1e-6;
  double rho = 0.0;  // fixed penalty; <= 0 selects it from short probe runs before the solve
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  int scaling_iterations = 10;
  bool polish = true;
  int check_interval = 5;
  double infeasibility_tol = 1e-6;
  bool record_trace = false;
};

struct WarmStart {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

/// max(stationarity, primal violation, complementarity violation) for the
/// multiplier convention H x + g + C' y = 0.
double kkt_residual(const QpProblem& prob, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Dense operator-splitting QP solver with a fixed penalty and over-relaxation.
///
/// The solver keeps the last solution and uses it as a warm start whenever the
/// next problem has the same dimensions. One instance is not reentrant.
class QpSolver {
 public:
  explicit QpSolver(QpOptions options = {});

  QpSolution solve(const QpProblem& prob);
  QpSolution solve(const QpProblem& prob, const WarmStart& warm);

  void reset() { last_.reset(); }
  const QpOptions& options() const { return options_; }

 private:
  QpSolution run(const QpProblem& prob, const WarmStart* warm);

  QpOptions options_;
  std::optional<WarmStart> last_;
};

/// Plain-text dump of H, g, C, lb, ub for offline inspection.
void write_qp_dump(const QpProblem& prob, const std::filesystem::path& path);

}  // namespace quadmpc
