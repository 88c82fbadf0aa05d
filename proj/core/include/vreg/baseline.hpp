#pragma once

#include "vreg/dataset.hpp"
#include "vreg/regulate.hpp"

#include <vector>

namespace vreg {

struct TooManyDimensions : std::runtime_error {
  explicit TooManyDimensions(const std::string& what)
      : std::runtime_error(what) {}
};

/// Linear surrogate: deviation ~= A [p; q] + c.
struct LinearModel {
  Eigen::MatrixXd A;  // n_buses x 2 n_buses
  Eigen::VectorXd c;
  bool rank_deficient = false;
  double fit_residual = 0.0;  // RMS training residual
};

/// Ordinary least squares via normal equations with ridge 1e-8. Rows may
/// restrict the fit to a subset of the dataset (empty = all rows).
LinearModel fit_linear(const Dataset& data, const std::vector<int>& rows = {});

Eigen::VectorXd predict_linear(const LinearModel& model,
                               const Eigen::VectorXd& p,
                               const Eigen::VectorXd& q);

double linear_mae(const LinearModel& model, const Dataset& data,
                  const std::vector<int>& rows);

/// Minimizes sum_i alpha_i |A_i [p; q] + c_i| over the box. Solved by the
/// same box PGD as regulate, on a softplus-smoothed |.| with the sharpness
/// increased in stages so kink optima resolve tightly.
RegulationResult regulate_linear(const LinearModel& model,
                                 const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& q0,
                                 const RegulateConfig& cfg);

struct OracleResult {
  Eigen::VectorXd q_best;
  double objective = 0.0;  // true power-flow objective at q_best
};

/// Exhaustive grid over the free reactive coordinates (those with lo < hi),
/// exact power flow per grid point. Ground truth for small instances; throws
/// TooManyDimensions beyond 4 free coordinates.
OracleResult oracle_regulate(const Network& net, const Eigen::VectorXd& p,
                             const Eigen::VectorXd& q_lower,
                             const Eigen::VectorXd& q_upper,
                             const Eigen::VectorXd& alpha, int grid_points);

/// True regulation objective sum_i alpha_i |V_i - V0| at an injection.
double true_objective(const Network& net, const Eigen::VectorXd& p,
                      const Eigen::VectorXd& q, const Eigen::VectorXd& alpha);

}  // namespace vreg
