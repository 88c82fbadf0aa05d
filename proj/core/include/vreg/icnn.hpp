#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vreg {

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};

enum class ActivationKind { relu, softplus };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  double t = 50.0;  // softplus sharpness, ignored for relu
};

/// Numerically stable softplus g_t(x) = ln(1 + e^{tx}) / t.
double softplus(double x, double t);
/// d/dx softplus = logistic(t x).
double softplus_deriv(double x, double t);

/// One layer. W maps the previous layer (or the expanded input on layer 1);
/// D, when present, is the passthrough from the expanded input. Layers after
/// the first must keep W entrywise nonnegative for input convexity.
struct LayerParams {
  Eigen::MatrixXd W;
  Eigen::MatrixXd D;  // 0x0 when absent
  Eigen::VectorXd b;

  bool has_passthrough() const { return D.size() > 0; }
};

/// Input convex neural network over the expanded input [u; -u]. The final
/// layer is linear; all earlier layers apply the activation.
struct IcnnModel {
  int in_dim = 0;   // raw input dimension d; the network consumes 2d
  int out_dim = 0;
  Activation activation;
  std::vector<LayerParams> layers;

  int n_layers() const { return static_cast<int>(layers.size()); }
  void validate() const;  // throws ShapeMismatch on a broken shape chain

  /// Max violation of the W_{2:m} >= 0 constraint (0 when feasible).
  double weight_negativity() const;
};

/// Gradients in the same shapes as the model parameters.
struct ParamGrads {
  std::vector<LayerParams> layers;
};

Eigen::VectorXd expand_input(const Eigen::VectorXd& u);

Eigen::VectorXd forward(const IcnnModel& model, const Eigen::VectorXd& u);
/// Forward on an already-expanded input of length 2d.
Eigen::VectorXd forward_expanded(const IcnnModel& model,
                                 const Eigen::VectorXd& u_hat);
/// Columns are samples: U is d x B, result out_dim x B.
Eigen::MatrixXd forward_batch(const IcnnModel& model, const Eigen::MatrixXd& U);

/// Jacobian of the outputs with respect to the raw input u (out_dim x d).
/// Exact for softplus; a subgradient selection for ReLU (derivative 0 at 0).
Eigen::MatrixXd grad_input(const IcnnModel& model, const Eigen::VectorXd& u);

/// Gradient of <w, forward(u)> with respect to u; one reverse pass.
Eigen::VectorXd grad_input_weighted(const IcnnModel& model,
                                    const Eigen::VectorXd& u,
                                    const Eigen::VectorXd& w);

/// Reverse-mode gradients of <upstream, forward(u)> w.r.t. every W, D, b.
ParamGrads grad_params(const IcnnModel& model, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& upstream);

/// Batched variant: gradients of sum_b <upstream_col_b, forward(u_col_b)>.
ParamGrads grad_params_batch(const IcnnModel& model, const Eigen::MatrixXd& U,
                             const Eigen::MatrixXd& upstream);

/// Entrywise clamp of W_l to [0, inf) for l >= 2; W_1, D, b untouched.
IcnnModel project_weights(const IcnnModel& model);

/// Random model with the layer-2+ constraint satisfied at initialization.
IcnnModel random_model(int in_dim, int out_dim, int n_hidden, int width,
                       Activation act, std::uint64_t seed);

/// Same parameters, different activation (used at regulation time to swap
/// ReLU for softplus).
IcnnModel with_activation(const IcnnModel& model, Activation act);

std::string model_to_json(const IcnnModel& model);
IcnnModel model_from_json(const std::string& text);
void save_model(const IcnnModel& model, const std::string& path);
IcnnModel load_model(const std::string& path);

}  // namespace vreg
