#include "vreg/icnn.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <random>

namespace vreg {

double softplus(double x, double t) {
  if (t <= 0.0) throw std::invalid_argument("softplus sharpness must be > 0");
  const double tx = t * x;
  if (tx > 30.0) return x + std::log1p(std::exp(-tx)) / t;
  return std::log1p(std::exp(tx)) / t;
}

double softplus_deriv(double x, double t) {
  const double tx = t * x;
  if (tx > 0.0) return 1.0 / (1.0 + std::exp(-tx));
  const double e = std::exp(tx);
  return e / (1.0 + e);
}

namespace {

void apply_activation(const Activation& act, Eigen::MatrixXd& s) {
  if (act.kind == ActivationKind::relu) {
    s = s.cwiseMax(0.0);
  } else {
    s = s.unaryExpr([t = act.t](double v) { return softplus(v, t); });
  }
}

Eigen::MatrixXd activation_deriv(const Activation& act,
                                 const Eigen::MatrixXd& s) {
  if (act.kind == ActivationKind::relu)
    return (s.array() > 0.0).cast<double>().matrix();
  return s.unaryExpr([t = act.t](double v) { return softplus_deriv(v, t); });
}

struct Trace {
  Eigen::MatrixXd u_hat;              // 2d x B
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
  std::vector<Eigen::MatrixXd> post;  // activations per layer (last = output)
};

Trace run_forward(const IcnnModel& model, const Eigen::MatrixXd& U_hat) {
  const int m = model.n_layers();
  Trace tr;
  tr.u_hat = U_hat;
  tr.pre.resize(m);
  tr.post.resize(m);
  for (int l = 0; l < m; ++l) {
    const LayerParams& lp = model.layers[l];
    Eigen::MatrixXd s = lp.W * (l == 0 ? U_hat : tr.post[l - 1]);
    if (lp.has_passthrough()) s += lp.D * U_hat;
    s.colwise() += lp.b;
    tr.pre[l] = s;
    if (l + 1 < m) apply_activation(model.activation, s);
    tr.post[l] = std::move(s);
  }
  return tr;
}

/// Reverse pass through a completed trace. Fills param gradients when grads
/// is non-null and accumulates the expanded-input gradient when g_uhat is
/// non-null. upstream is out_dim x B.
void run_backward(const IcnnModel& model, const Trace& tr,
                  const Eigen::MatrixXd& upstream, ParamGrads* grads,
                  Eigen::MatrixXd* g_uhat) {
  const int m = model.n_layers();
  if (g_uhat) g_uhat->setZero(tr.u_hat.rows(), tr.u_hat.cols());
  Eigen::MatrixXd delta = upstream;
  for (int l = m - 1; l >= 0; --l) {
    const LayerParams& lp = model.layers[l];
    Eigen::MatrixXd gamma =
        (l + 1 < m) ? delta.cwiseProduct(activation_deriv(model.activation,
                                                          tr.pre[l]))
                    : std::move(delta);
    const Eigen::MatrixXd& input = (l == 0) ? tr.u_hat : tr.post[l - 1];
    if (grads) {
      LayerParams& g = grads->layers[l];
      g.W = gamma * input.transpose();
      if (lp.has_passthrough()) g.D = gamma * tr.u_hat.transpose();
      g.b = gamma.rowwise().sum();
    }
    if (g_uhat && lp.has_passthrough()) *g_uhat += lp.D.transpose() * gamma;
    if (l == 0) {
      if (g_uhat) *g_uhat += lp.W.transpose() * gamma;
    } else {
      delta = lp.W.transpose() * gamma;
    }
  }
}

ParamGrads zero_like(const IcnnModel& model) {
  ParamGrads g;
  g.layers.resize(model.layers.size());
  for (size_t l = 0; l < model.layers.size(); ++l) {
    const LayerParams& lp = model.layers[l];
    g.layers[l].W = Eigen::MatrixXd::Zero(lp.W.rows(), lp.W.cols());
    if (lp.has_passthrough())
      g.layers[l].D = Eigen::MatrixXd::Zero(lp.D.rows(), lp.D.cols());
    g.layers[l].b = Eigen::VectorXd::Zero(lp.b.size());
  }
  return g;
}

}  // namespace

void IcnnModel::validate() const {
  if (layers.empty()) throw ShapeMismatch("model has no layers");
  if (in_dim < 1 || out_dim < 1) throw ShapeMismatch("bad model dimensions");
  Eigen::Index prev = 2 * in_dim;
  for (int l = 0; l < n_layers(); ++l) {
    const LayerParams& lp = layers[l];
    if (lp.W.cols() != (l == 0 ? 2 * in_dim : prev))
      throw ShapeMismatch("W column count broken at layer " +
                          std::to_string(l + 1));
    if (l == 0 && lp.has_passthrough())
      throw ShapeMismatch("layer 1 must not carry a passthrough");
    if (lp.has_passthrough() &&
        (lp.D.rows() != lp.W.rows() || lp.D.cols() != 2 * in_dim))
      throw ShapeMismatch("passthrough shape broken at layer " +
                          std::to_string(l + 1));
    if (lp.b.size() != lp.W.rows())
      throw ShapeMismatch("bias length broken at layer " +
                          std::to_string(l + 1));
    prev = lp.W.rows();
  }
  if (prev != out_dim) throw ShapeMismatch("final layer width != out_dim");
}

double IcnnModel::weight_negativity() const {
  double worst = 0.0;
  for (int l = 1; l < n_layers(); ++l)
    worst = std::max(worst, std::max(0.0, -layers[l].W.minCoeff()));
  return worst;
}

Eigen::VectorXd expand_input(const Eigen::VectorXd& u) {
  Eigen::VectorXd u_hat(2 * u.size());
  u_hat << u, -u;
  return u_hat;
}

Eigen::VectorXd forward(const IcnnModel& model, const Eigen::VectorXd& u) {
  if (u.size() != model.in_dim) throw ShapeMismatch("input length != in_dim");
  return forward_expanded(model, expand_input(u));
}

Eigen::VectorXd forward_expanded(const IcnnModel& model,
                                 const Eigen::VectorXd& u_hat) {
  if (u_hat.size() != 2 * model.in_dim)
    throw ShapeMismatch("expanded input length != 2*in_dim");
  return run_forward(model, u_hat).post.back().col(0);
}

Eigen::MatrixXd forward_batch(const IcnnModel& model,
                              const Eigen::MatrixXd& U) {
  if (U.rows() != model.in_dim) throw ShapeMismatch("batch row count != in_dim");
  Eigen::MatrixXd U_hat(2 * U.rows(), U.cols());
  U_hat << U, -U;
  return run_forward(model, U_hat).post.back();
}

Eigen::VectorXd grad_input_weighted(const IcnnModel& model,
                                    const Eigen::VectorXd& u,
                                    const Eigen::VectorXd& w) {
  if (u.size() != model.in_dim) throw ShapeMismatch("input length != in_dim");
  if (w.size() != model.out_dim) throw ShapeMismatch("weight length != out_dim");
  const Trace tr = run_forward(model, expand_input(u));
  Eigen::MatrixXd g_uhat;
  run_backward(model, tr, w, nullptr, &g_uhat);
  return g_uhat.col(0).head(model.in_dim) - g_uhat.col(0).tail(model.in_dim);
}

Eigen::MatrixXd grad_input(const IcnnModel& model, const Eigen::VectorXd& u) {
  if (u.size() != model.in_dim) throw ShapeMismatch("input length != in_dim");
  const Trace tr = run_forward(model, expand_input(u));
  Eigen::MatrixXd jac(model.out_dim, model.in_dim);
  for (int i = 0; i < model.out_dim; ++i) {
    Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(model.out_dim, 1);
    upstream(i, 0) = 1.0;
    Eigen::MatrixXd g_uhat;
    run_backward(model, tr, upstream, nullptr, &g_uhat);
    jac.row(i) = (g_uhat.col(0).head(model.in_dim) -
                  g_uhat.col(0).tail(model.in_dim))
                     .transpose();
  }
  return jac;
}

ParamGrads grad_params(const IcnnModel& model, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& upstream) {
  if (upstream.size() != model.out_dim)
    throw ShapeMismatch("upstream length != out_dim");
  return grad_params_batch(model, u, upstream);
}

ParamGrads grad_params_batch(const IcnnModel& model, const Eigen::MatrixXd& U,
                             const Eigen::MatrixXd& upstream) {
  if (U.rows() != model.in_dim) throw ShapeMismatch("batch row count != in_dim");
  if (upstream.rows() != model.out_dim || upstream.cols() != U.cols())
    throw ShapeMismatch("upstream shape mismatch");
  Eigen::MatrixXd U_hat(2 * U.rows(), U.cols());
  U_hat << U, -U;
  const Trace tr = run_forward(model, U_hat);
  ParamGrads grads = zero_like(model);
  run_backward(model, tr, upstream, &grads, nullptr);
  return grads;
}

IcnnModel project_weights(const IcnnModel& model) {
  IcnnModel out = model;
  for (int l = 1; l < out.n_layers(); ++l)
    out.layers[l].W = out.layers[l].W.cwiseMax(0.0);
  return out;
}

IcnnModel random_model(int in_dim, int out_dim, int n_hidden, int width,
                       Activation act, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto mat = [&](Eigen::Index rows, Eigen::Index cols, double sd, bool nonneg) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        double v = sd * gauss(rng);
        m(i, j) = nonneg ? std::abs(v) : v;
      }
    return m;
  };

  IcnnModel model;
  model.in_dim = in_dim;
  model.out_dim = out_dim;
  model.activation = act;
  const int d2 = 2 * in_dim;
  int prev = d2;
  for (int l = 0; l < n_hidden + 1; ++l) {
    const bool last = (l == n_hidden);
    const int rows = last ? out_dim : width;
    LayerParams lp;
    lp.W = mat(rows, prev, 1.0 / std::sqrt(double(prev)), l > 0);
    if (l > 0) lp.D = mat(rows, d2, 1.0 / std::sqrt(double(d2)), false);
    lp.b = mat(rows, 1, 0.01, false).col(0);
    model.layers.push_back(std::move(lp));
    prev = rows;
  }
  model.validate();
  return model;
}

IcnnModel with_activation(const IcnnModel& model, Activation act) {
  IcnnModel out = model;
  out.activation = act;
  return out;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  return m;
}

}  // namespace

std::string model_to_json(const IcnnModel& model) {
  nlohmann::json j;
  j["in_dim"] = model.in_dim;
  j["out_dim"] = model.out_dim;
  j["activation"] = {
      {"kind",
       model.activation.kind == ActivationKind::relu ? "relu" : "softplus"},
      {"t", model.activation.t}};
  j["layers"] = nlohmann::json::array();
  for (const LayerParams& lp : model.layers) {
    nlohmann::json lj;
    lj["W"] = matrix_to_json(lp.W);
    lj["D"] = lp.has_passthrough() ? matrix_to_json(lp.D) : nlohmann::json();
    lj["b"] = std::vector<double>(lp.b.data(), lp.b.data() + lp.b.size());
    j["layers"].push_back(std::move(lj));
  }
  return j.dump(2);
}

IcnnModel model_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  IcnnModel model;
  model.in_dim = j.at("in_dim").get<int>();
  model.out_dim = j.at("out_dim").get<int>();
  const auto& aj = j.at("activation");
  model.activation.kind = aj.at("kind").get<std::string>() == "relu"
                              ? ActivationKind::relu
                              : ActivationKind::softplus;
  model.activation.t = aj.value("t", 50.0);
  for (const auto& lj : j.at("layers")) {
    LayerParams lp;
    lp.W = matrix_from_json(lj.at("W"));
    if (!lj.at("D").is_null()) lp.D = matrix_from_json(lj.at("D"));
    const auto bv = lj.at("b").get<std::vector<double>>();
    lp.b = Eigen::Map<const Eigen::VectorXd>(bv.data(), bv.size());
    model.layers.push_back(std::move(lp));
  }
  model.validate();
  return model;
}

void save_model(const IcnnModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << model_to_json(model) << "\n";
}

IcnnModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace vreg
