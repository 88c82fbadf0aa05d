#include "vreg/maxaffine.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace vreg {

double eval_max_affine(const MaxAffine& f, const Eigen::VectorXd& x) {
  if (x.size() != f.a.cols())
    throw ShapeMismatch("max-affine dimension mismatch");
  return (f.a * x + f.b).maxCoeff();
}

namespace {

/// Rewrites h . x as a nonnegative row over the expanded input [x; -x].
Eigen::RowVectorXd expand_nonneg(const Eigen::VectorXd& h) {
  const Eigen::Index d = h.size();
  Eigen::RowVectorXd row(2 * d);
  row.head(d) = h.cwiseMax(0.0).transpose();
  row.tail(d) = (-h).cwiseMax(0.0).transpose();
  return row;
}

}  // namespace

IcnnModel icnn_from_max_affine(const MaxAffine& f) {
  const int K = f.n_pieces();
  const int d = f.dim();
  if (K < 1) throw std::invalid_argument("max-affine needs at least one piece");

  IcnnModel model;
  model.in_dim = d;
  model.out_dim = 1;
  model.activation = Activation{ActivationKind::relu, 50.0};

  if (K == 1) {
    LayerParams lp;
    lp.W = expand_nonneg(f.a.row(0).transpose());
    lp.b = Eigen::VectorXd::Constant(1, f.b[0]);
    model.layers.push_back(std::move(lp));
    model.validate();
    return model;
  }

  // z_1 = relu((a_1 - a_2).x + b_1 - b_2), z_l = relu(z_{l-1} + (a_l - a_{l+1}).x
  // + b_l - b_{l+1}), final linear z_K = z_{K-1} + a_K.x + b_K.
  LayerParams first;
  first.W = expand_nonneg((f.a.row(0) - f.a.row(1)).transpose());
  first.b = Eigen::VectorXd::Constant(1, f.b[0] - f.b[1]);
  model.layers.push_back(std::move(first));
  for (int l = 1; l < K - 1; ++l) {
    LayerParams lp;
    lp.W = Eigen::MatrixXd::Ones(1, 1);
    lp.D = expand_nonneg((f.a.row(l) - f.a.row(l + 1)).transpose());
    lp.b = Eigen::VectorXd::Constant(1, f.b[l] - f.b[l + 1]);
    model.layers.push_back(std::move(lp));
  }
  LayerParams last;
  last.W = Eigen::MatrixXd::Ones(1, 1);
  last.D = expand_nonneg(f.a.row(K - 1).transpose());
  last.b = Eigen::VectorXd::Constant(1, f.b[K - 1]);
  model.layers.push_back(std::move(last));
  model.validate();
  return model;
}

namespace {

struct OneLayerView {
  Eigen::MatrixXd w0;     // K x d raw first-layer coefficients
  Eigen::VectorXd b0;     // K
  Eigen::VectorXd w_out;  // K, nonnegative
  double b_out = 0.0;
};

OneLayerView one_layer_view(const IcnnModel& model) {
  model.validate();
  if (model.n_layers() != 2 || model.out_dim != 1)
    throw std::invalid_argument(
        "piece enumeration needs a one-hidden-layer scalar model");
  const LayerParams& h = model.layers[0];
  const LayerParams& o = model.layers[1];
  if (o.has_passthrough() && o.D.cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("passthrough weights must be zero");
  if (o.W.minCoeff() < 0.0)
    throw std::invalid_argument("output weights must be nonnegative");
  const int d = model.in_dim;
  OneLayerView v;
  v.w0 = h.W.leftCols(d) - h.W.rightCols(d);
  v.b0 = h.b;
  v.w_out = o.W.row(0).transpose();
  v.b_out = o.b[0];
  return v;
}

}  // namespace

std::uint32_t activation_pattern(const IcnnModel& model,
                                 const Eigen::VectorXd& x) {
  const OneLayerView v = one_layer_view(model);
  const Eigen::VectorXd pre = v.w0 * x + v.b0;
  std::uint32_t mask = 0;
  for (int i = 0; i < pre.size(); ++i)
    if (pre[i] >= 0.0) mask |= (1u << i);
  return mask;
}

PieceEnumeration enumerate_pieces(const IcnnModel& model, int n_samples) {
  const OneLayerView v = one_layer_view(model);
  const int K = static_cast<int>(v.b0.size());
  if (K > 20) throw TooManyUnits("enumeration bounded at 20 hidden units");
  const int d = model.in_dim;
  const std::uint32_t n_patterns = 1u << K;

  PieceEnumeration out;
  out.candidates.a.resize(n_patterns, d);
  out.candidates.b.resize(n_patterns);
  out.patterns.resize(n_patterns);
  out.realized.assign(n_patterns, false);
  for (std::uint32_t mask = 0; mask < n_patterns; ++mask) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(d);
    double b = v.b_out;
    for (int i = 0; i < K; ++i)
      if (mask & (1u << i)) {
        a += v.w_out[i] * v.w0.row(i).transpose();
        b += v.w_out[i] * v.b0[i];
      }
    out.candidates.a.row(mask) = a.transpose();
    out.candidates.b[mask] = b;
    out.patterns[mask] = mask;
  }

  // Kronecker low-discrepancy sweep of the unit box [-1, 1]^d.
  static const double primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29,
                                  31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
  Eigen::VectorXd step(d);
  for (int j = 0; j < d; ++j) {
    const double s = std::sqrt(primes[j % 20]);
    step[j] = s - std::floor(s);
  }
  Eigen::VectorXd x(d);
  for (int s = 0; s < n_samples; ++s) {
    for (int j = 0; j < d; ++j) {
      const double frac = std::fmod(0.5 + (s + 1) * step[j], 1.0);
      x[j] = 2.0 * frac - 1.0;
    }
    const Eigen::VectorXd pre = v.w0 * x + v.b0;
    std::uint32_t mask = 0;
    for (int i = 0; i < K; ++i)
      if (pre[i] >= 0.0) mask |= (1u << i);
    out.realized[mask] = true;
  }
  return out;
}

namespace {

/// Affine least squares with a small ridge for conditioning.
std::pair<Eigen::VectorXd, double> affine_ls(const Eigen::MatrixXd& X,
                                             const Eigen::VectorXd& y,
                                             const std::vector<int>& rows) {
  const Eigen::Index d = X.cols();
  Eigen::MatrixXd Z(rows.size(), d + 1);
  Eigen::VectorXd t(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    Z.row(r).head(d) = X.row(rows[r]);
    Z(r, d) = 1.0;
    t[r] = y[rows[r]];
  }
  Eigen::MatrixXd G = Z.transpose() * Z;
  G.diagonal().array() += 1e-9;
  const Eigen::VectorXd theta = G.ldlt().solve(Z.transpose() * t);
  return {theta.head(d), theta[d]};
}

}  // namespace

MaxAffine fit_max_affine(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         int K, std::uint64_t seed) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (n < K) throw std::invalid_argument("need at least K samples");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // k-means++ seeding on the inputs.
  std::vector<int> centers{static_cast<int>(unif(rng) * n) % n};
  Eigen::VectorXd dist2 =
      (X.rowwise() - X.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < K) {
    const double total = dist2.sum();
    int pick = n - 1;
    if (total > 0.0) {
      double r = unif(rng) * total, acc = 0.0;
      for (int s = 0; s < n; ++s) {
        acc += dist2[s];
        if (acc >= r) {
          pick = s;
          break;
        }
      }
    } else {
      pick = static_cast<int>(unif(rng) * n) % n;
    }
    centers.push_back(pick);
    dist2 = dist2.cwiseMin(
        (X.rowwise() - X.row(pick)).rowwise().squaredNorm());
  }

  std::vector<int> assign(n);
  for (int s = 0; s < n; ++s) {
    int best = 0;
    double best_d = (X.row(s) - X.row(centers[0])).squaredNorm();
    for (int k = 1; k < K; ++k) {
      const double dk = (X.row(s) - X.row(centers[k])).squaredNorm();
      if (dk < best_d) {
        best_d = dk;
        best = k;
      }
    }
    assign[s] = best;
  }

  // Local tangent plane: least squares on the nearest neighbors of sample s.
  auto local_fit = [&](int s) {
    const int m = std::min(n, std::max(d + 1, 8));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::nth_element(order.begin(), order.begin() + m - 1, order.end(),
                     [&](int a, int b) {
                       return (X.row(a) - X.row(s)).squaredNorm() <
                              (X.row(b) - X.row(s)).squaredNorm();
                     });
    order.resize(m);
    return affine_ls(X, y, order);
  };

  MaxAffine f;
  f.a.setZero(K, d);
  f.b.setZero(K);
  // Seed every piece from the neighborhood of its k-means++ center so no
  // piece starts degenerate.
  for (int k = 0; k < K; ++k) {
    auto [a, b] = local_fit(centers[k]);
    f.a.row(k) = a.transpose();
    f.b[k] = b;
  }

  auto refit = [&]() {
    for (int k = 0; k < K; ++k) {
      std::vector<int> rows;
      for (int s = 0; s < n; ++s)
        if (assign[s] == k) rows.push_back(s);
      // Under-determined pieces keep their previous plane; ridge-fitting a
      // near-empty piece can produce a spurious dominating plane.
      if (static_cast<int>(rows.size()) < d + 1) continue;
      auto [a, b] = affine_ls(X, y, rows);
      f.a.row(k) = a.transpose();
      f.b[k] = b;
    }
  };
  refit();

  for (int pass = 0; pass < 100; ++pass) {
    const Eigen::MatrixXd vals =
        (X * f.a.transpose()).rowwise() + f.b.transpose();
    std::vector<int> next(n);
    std::vector<int> count(K, 0);
    for (int s = 0; s < n; ++s) {
      Eigen::Index arg;
      vals.row(s).maxCoeff(&arg);
      next[s] = static_cast<int>(arg);
      ++count[next[s]];
    }
    // Reseed empty pieces with a tangent plane fitted around the sample the
    // current model underestimates the most.
    bool reseeded = false;
    for (int k = 0; k < K; ++k) {
      if (count[k] > 0) continue;
      int worst = 0;
      double worst_gap = -std::numeric_limits<double>::infinity();
      for (int s = 0; s < n; ++s) {
        const double gap = y[s] - vals.row(s).maxCoeff();
        if (gap > worst_gap) {
          worst_gap = gap;
          worst = s;
        }
      }
      auto [a, b] = local_fit(worst);
      f.a.row(k) = a.transpose();
      f.b[k] = b;
      next[worst] = k;
      reseeded = true;
    }
    if (!reseeded && next == assign) break;
    assign = std::move(next);
    refit();
  }
  return f;
}

double max_affine_mse(const MaxAffine& f, const Eigen::MatrixXd& X,
                      const Eigen::VectorXd& y) {
  const Eigen::VectorXd pred =
      ((X * f.a.transpose()).rowwise() + f.b.transpose()).rowwise().maxCoeff();
  return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

std::string max_affine_to_json(const MaxAffine& f) {
  nlohmann::json j;
  j["pieces"] = nlohmann::json::array();
  for (int k = 0; k < f.n_pieces(); ++k) {
    nlohmann::json pj;
    pj["a"] = std::vector<double>(f.a.row(k).begin(), f.a.row(k).end());
    pj["b"] = f.b[k];
    j["pieces"].push_back(std::move(pj));
  }
  return j.dump(2);
}

MaxAffine max_affine_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const auto& pieces = j.at("pieces");
  const int K = static_cast<int>(pieces.size());
  const int d = K ? static_cast<int>(pieces[0].at("a").size()) : 0;
  MaxAffine f;
  f.a.resize(K, d);
  f.b.resize(K);
  for (int k = 0; k < K; ++k) {
    const auto av = pieces[k].at("a").get<std::vector<double>>();
    f.a.row(k) = Eigen::Map<const Eigen::VectorXd>(av.data(), av.size());
    f.b[k] = pieces[k].at("b").get<double>();
  }
  return f;
}

}  // namespace vreg
