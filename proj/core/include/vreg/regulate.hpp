#pragma once

#include "vreg/grid.hpp"
#include "vreg/icnn.hpp"

#include <functional>
#include <vector>

namespace vreg {

struct BoundsInverted : std::runtime_error {
  explicit BoundsInverted(const std::string& what)
      : std::runtime_error(what) {}
};
struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what)
      : std::runtime_error(what) {}
};

/// Elementwise clamp; the Euclidean projection onto the box [lo, hi].
Eigen::VectorXd project_box(const Eigen::VectorXd& q, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi);

struct BoxPgdConfig {
  double step = 0.05;
  double grad_tol = 1e-6;
  int max_iter = 5000;
  /// Halve the step whenever it fails to decrease the objective; keeps the
  /// trace non-increasing for any initial step.
  bool backtracking = true;
};

struct BoxPgdResult {
  Eigen::VectorXd x;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
};

/// Projected gradient descent on a box: x <- clamp(x - step * grad(x)).
/// Stops when the unit-step projected gradient ||x - clamp(x - grad)||_inf
/// falls below grad_tol.
BoxPgdResult minimize_box(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
    const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
    const Eigen::VectorXd& hi, const BoxPgdConfig& cfg);

struct RegulateConfig {
  double step = 0.05;
  double grad_tol = 1e-6;
  int max_iter = 5000;
  Eigen::VectorXd q_lower;
  Eigen::VectorXd q_upper;
  Eigen::VectorXd alpha;     // objective weights, empty = all ones
  double softplus_t = 50.0;  // smoothing used for regulation-time gradients
};

struct RegulationResult {
  Eigen::VectorXd q_star;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  Eigen::VectorXd predicted_deviation;   // ICNN outputs at q_star
  Eigen::VectorXd realized_deviation;    // empty unless filled by the caller
};

/// Minimizes sum_i alpha_i f_i(p, q) over the box by PGD, with p held fixed.
/// The trained model is evaluated with softplus activation for smooth
/// gradients. q0 outside the box is clamped first.
RegulationResult regulate(const IcnnModel& model, const Eigen::VectorXd& p,
                          const Eigen::VectorXd& q0, const RegulateConfig& cfg);

/// Solves true power flow at (p, q_star) and returns, per threshold, the
/// fraction of buses whose |V - V0| exceeds it.
std::vector<double> evaluate_regulation(const Network& net,
                                        const Eigen::VectorXd& p,
                                        const Eigen::VectorXd& q_star,
                                        const std::vector<double>& thresholds);

}  // namespace vreg
