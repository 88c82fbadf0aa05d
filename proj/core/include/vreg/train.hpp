#pragma once

#include "vreg/dataset.hpp"
#include "vreg/icnn.hpp"

#include <cstdint>
#include <vector>

namespace vreg {

struct DivergedLoss : std::runtime_error {
  explicit DivergedLoss(const std::string& what) : std::runtime_error(what) {}
};
struct EmptyDataset : std::runtime_error {
  explicit EmptyDataset(const std::string& what) : std::runtime_error(what) {}
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int n_iterations = 20000;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;
  /// Disable to train a plain (non-convex) network for comparison.
  bool project = true;
};

struct TrainReport {
  std::vector<double> train_loss_curve;  // per-iteration batch loss
  double val_mae = 0.0;                  // held-out MAE in p.u. of nominal
  IcnnModel final_model;
};

/// (1/N) * ||target - pred||^2.
double mse_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);

/// Projected stochastic gradient descent on the batch MSE. Every step ends
/// with the nonnegative-weight projection, so all iterates are feasible.
TrainReport train(const IcnnModel& model, const Dataset& data,
                  const TrainConfig& cfg);

/// Mean absolute prediction error of a model over the given dataset rows.
double model_mae(const IcnnModel& model, const Dataset& data,
                 const std::vector<int>& row_indices);

/// Deterministic train/validation row split used by train().
void split_rows(int n_rows, double validation_fraction, std::uint64_t seed,
                std::vector<int>& train_rows, std::vector<int>& val_rows);

}  // namespace vreg
