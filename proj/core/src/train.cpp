#include "vreg/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace vreg {

double mse_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  if (pred.size() != target.size())
    throw ShapeMismatch("mse_loss length mismatch");
  return (target - pred).squaredNorm() / static_cast<double>(pred.size());
}

void split_rows(int n_rows, double validation_fraction, std::uint64_t seed,
                std::vector<int>& train_rows, std::vector<int>& val_rows) {
  std::vector<int> idx(n_rows);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5e3d1u);
  std::shuffle(idx.begin(), idx.end(), rng);
  const int n_val = static_cast<int>(validation_fraction * n_rows);
  val_rows.assign(idx.begin(), idx.begin() + n_val);
  train_rows.assign(idx.begin() + n_val, idx.end());
}

double model_mae(const IcnnModel& model, const Dataset& data,
                 const std::vector<int>& row_indices) {
  if (row_indices.empty()) return 0.0;
  const int n = data.n_buses;
  Eigen::MatrixXd U(2 * n, row_indices.size());
  Eigen::MatrixXd T(n, row_indices.size());
  for (size_t c = 0; c < row_indices.size(); ++c) {
    U.col(c).head(n) = data.p().row(row_indices[c]).transpose();
    U.col(c).tail(n) = data.q().row(row_indices[c]).transpose();
    T.col(c) = data.dv().row(row_indices[c]).transpose();
  }
  const Eigen::MatrixXd pred = forward_batch(model, U);
  return (pred - T).cwiseAbs().mean();
}

TrainReport train(const IcnnModel& model, const Dataset& data,
                  const TrainConfig& cfg) {
  if (data.n_samples() == 0) throw EmptyDataset("dataset has no rows");
  if (cfg.learning_rate <= 0.0 || cfg.batch_size < 1 || cfg.n_iterations < 0)
    throw std::invalid_argument("bad training configuration");
  const int n = data.n_buses;
  if (model.in_dim != 2 * n || model.out_dim != n)
    throw ShapeMismatch("model dimensions do not match the dataset");

  std::vector<int> train_rows, val_rows;
  split_rows(data.n_samples(), cfg.validation_fraction, cfg.seed, train_rows,
             val_rows);
  if (train_rows.empty()) throw EmptyDataset("no training rows after split");

  IcnnModel m = cfg.project ? project_weights(model) : model;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick(0,
                                          static_cast<int>(train_rows.size()) - 1);

  TrainReport report;
  report.train_loss_curve.reserve(cfg.n_iterations);
  const int T = cfg.batch_size;
  Eigen::MatrixXd U(2 * n, T), Tg(n, T);

  for (int iter = 0; iter < cfg.n_iterations; ++iter) {
    for (int c = 0; c < T; ++c) {
      const int row = train_rows[pick(rng)];
      U.col(c).head(n) = data.p().row(row).transpose();
      U.col(c).tail(n) = data.q().row(row).transpose();
      Tg.col(c) = data.dv().row(row).transpose();
    }
    const Eigen::MatrixXd pred = forward_batch(m, U);
    const Eigen::MatrixXd err = pred - Tg;
    const double loss = err.squaredNorm() / static_cast<double>(n * T);
    if (!std::isfinite(loss))
      throw DivergedLoss("training loss became non-finite at iteration " +
                         std::to_string(iter));
    report.train_loss_curve.push_back(loss);

    // d(batch MSE)/d(pred) = 2 err / (N T)
    const Eigen::MatrixXd upstream = (2.0 / (n * T)) * err;
    const ParamGrads grads = grad_params_batch(m, U, upstream);
    for (int l = 0; l < m.n_layers(); ++l) {
      m.layers[l].W -= cfg.learning_rate * grads.layers[l].W;
      if (m.layers[l].has_passthrough())
        m.layers[l].D -= cfg.learning_rate * grads.layers[l].D;
      m.layers[l].b -= cfg.learning_rate * grads.layers[l].b;
    }
    if (cfg.project) m = project_weights(m);
  }

  report.val_mae = model_mae(m, data, val_rows);
  report.final_model = std::move(m);
  return report;
}

}  // namespace vreg
