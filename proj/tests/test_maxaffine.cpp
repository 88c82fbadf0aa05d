#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vreg/maxaffine.hpp"

#include <cmath>
#include <random>

using namespace vreg;

namespace {

MaxAffine abs_fn() {
  MaxAffine f;
  f.a = Eigen::MatrixXd{{1.0}, {-1.0}};
  f.b = Eigen::VectorXd::Zero(2);
  return f;
}

MaxAffine random_max_affine(int K, int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  MaxAffine f;
  f.a.resize(K, d);
  f.b.resize(K);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < d; ++j) f.a(k, j) = unif(rng);
    f.b[k] = unif(rng);
  }
  return f;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

}  // namespace

TEST_CASE("max-affine evaluation") {
  CHECK(eval_max_affine(abs_fn(), vec({-3.0})) == 3.0);
  CHECK(eval_max_affine(abs_fn(), vec({0.0})) == 0.0);

  MaxAffine single;
  single.a = Eigen::MatrixXd{{2.0, -1.0}};
  single.b = Eigen::VectorXd::Constant(1, 0.5);
  CHECK(eval_max_affine(single, vec({1.0, 1.0})) == doctest::Approx(1.5));

  // Double implementation: naive loop.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const MaxAffine f = random_max_affine(4, 3, rng);
    Eigen::VectorXd x(3);
    for (int j = 0; j < 3; ++j) x[j] = unif(rng);
    double naive = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 4; ++k) {
      double v = f.b[k];
      for (int j = 0; j < 3; ++j) v += f.a(k, j) * x[j];
      naive = std::max(naive, v);
    }
    CHECK(eval_max_affine(f, x) == doctest::Approx(naive).epsilon(1e-14));
  }

  CHECK_THROWS_AS(eval_max_affine(abs_fn(), vec({1.0, 2.0})), ShapeMismatch);
}

TEST_CASE("construction reproduces |x|") {
  const IcnnModel m = icnn_from_max_affine(abs_fn());
  CHECK(forward(m, vec({3.0}))[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(forward(m, vec({-2.0}))[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(forward(m, vec({0.0}))[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("construction reproduces the 3-piece textbook example") {
  // f(u) = max{-u, u, 2u - 1} on [-1, 2].
  MaxAffine f;
  f.a = Eigen::MatrixXd{{-1.0}, {1.0}, {2.0}};
  f.b = Eigen::VectorXd{{0.0, 0.0, -1.0}};
  const IcnnModel m = icnn_from_max_affine(f);
  const double us[] = {-1, 0, 1, 2};
  const double fs[] = {1, 0, 1, 3};
  for (int i = 0; i < 4; ++i)
    CHECK(forward(m, vec({us[i]}))[0] ==
          doctest::Approx(fs[i]).epsilon(1e-12));
}

TEST_CASE("random constructions are exact with the K-layer structure") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_int_distribution<int> kpick(1, 10), dpick(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const int K = kpick(rng), d = dpick(rng);
    const MaxAffine f = random_max_affine(K, d, rng);
    const IcnnModel m = icnn_from_max_affine(f);

    // Structure: exactly K layers, one unit in every hidden layer, and the
    // input-convexity weight constraint holds by construction.
    CHECK(m.n_layers() == K);
    for (int l = 0; l + 1 < m.n_layers(); ++l) CHECK(m.layers[l].W.rows() == 1);
    CHECK(m.weight_negativity() == 0.0);

    Eigen::VectorXd x(d);
    for (int pt = 0; pt < 1000; ++pt) {
      for (int j = 0; j < d; ++j) x[j] = unif(rng);
      CHECK(std::abs(forward(m, x)[0] - eval_max_affine(f, x)) <= 1e-10);
    }
  }
}

TEST_CASE("single-relu enumeration gives pieces {0, x}") {
  IcnnModel m;
  m.in_dim = 1;
  m.out_dim = 1;
  m.activation = {ActivationKind::relu, 50.0};
  LayerParams h;
  h.W = Eigen::MatrixXd{{1.0, 0.0}};  // x over [x; -x]
  h.b = Eigen::VectorXd::Zero(1);
  LayerParams o;
  o.W = Eigen::MatrixXd{{1.0}};
  o.b = Eigen::VectorXd::Zero(1);
  m.layers = {h, o};

  const PieceEnumeration pe = enumerate_pieces(m, 1000);
  REQUIRE(pe.candidates.n_pieces() == 2);
  CHECK(pe.candidates.a(0, 0) == 0.0);  // empty pattern: constant 0
  CHECK(pe.candidates.b[0] == 0.0);
  CHECK(pe.candidates.a(1, 0) == 1.0);  // active pattern: x
  CHECK(pe.realized[0]);
  CHECK(pe.realized[1]);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int pt = 0; pt < 100; ++pt) {
    const Eigen::VectorXd x = vec({unif(rng)});
    CHECK(forward(m, x)[0] ==
          doctest::Approx(eval_max_affine(pe.candidates, x)).epsilon(1e-12));
  }
}

TEST_CASE("K=3 enumeration emits exactly 8 candidates") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  IcnnModel m;
  m.in_dim = 2;
  m.out_dim = 1;
  m.activation = {ActivationKind::relu, 50.0};
  LayerParams h;
  h.W.resize(3, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) h.W(i, j) = std::abs(gauss(rng));
  h.b = Eigen::VectorXd{{0.1, -0.2, 0.05}};
  LayerParams o;
  o.W = Eigen::MatrixXd{{0.7, 0.2, 1.1}};
  o.b = Eigen::VectorXd::Constant(1, -0.3);
  m.layers = {h, o};

  const PieceEnumeration pe = enumerate_pieces(m, 5000);
  CHECK(pe.candidates.n_pieces() == 8);
  CHECK(pe.patterns.size() == 8);
}

TEST_CASE("realized pieces support the function from below") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    IcnnModel m;
    m.in_dim = 2;
    m.out_dim = 1;
    m.activation = {ActivationKind::relu, 50.0};
    LayerParams h;
    h.W.resize(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) h.W(i, j) = gauss(rng);
    h.W = h.W.cwiseMax(0.0);
    h.b = Eigen::VectorXd::NullaryExpr(4, [&](Eigen::Index) {
      return 0.3 * gauss(rng);
    });
    LayerParams o;
    o.W = Eigen::MatrixXd::NullaryExpr(1, 4, [&](Eigen::Index, Eigen::Index) {
      return std::abs(gauss(rng));
    });
    o.b = Eigen::VectorXd::Constant(1, 0.1 * gauss(rng));
    m.layers = {h, o};

    const PieceEnumeration pe = enumerate_pieces(m, 20000);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int pt = 0; pt < 200; ++pt) {
      const Eigen::VectorXd x = vec({unif(rng), unif(rng)});
      const double fx = forward(m, x)[0];
      // Active pattern's piece is tight.
      const std::uint32_t mask = activation_pattern(m, x);
      const double active =
          pe.candidates.a.row(mask).dot(x) + pe.candidates.b[mask];
      CHECK(fx == doctest::Approx(active).epsilon(1e-10));
      // Every realized piece lies on or below the function.
      for (int k = 0; k < pe.candidates.n_pieces(); ++k) {
        if (!pe.realized[k]) continue;
        const double piece = pe.candidates.a.row(k).dot(x) + pe.candidates.b[k];
        CHECK(piece <= fx + 1e-10);
      }
    }
  }
}

TEST_CASE("enumeration rejects oversized or malformed models") {
  const IcnnModel big =
      project_weights(random_model(2, 1, 1, 21, {ActivationKind::relu, 50.0}, 1));
  // Zero out the passthrough-free requirement violations first: a 1-hidden
  // model from random_model has D on the output layer.
  IcnnModel clean = big;
  clean.layers[1].D.setZero();
  CHECK_THROWS_AS(enumerate_pieces(clean, 10), TooManyUnits);

  IcnnModel with_pass =
      project_weights(random_model(2, 1, 1, 3, {ActivationKind::relu, 50.0}, 2));
  CHECK_THROWS_AS(enumerate_pieces(with_pass, 10), std::invalid_argument);

  const IcnnModel deep =
      project_weights(random_model(2, 1, 2, 3, {ActivationKind::relu, 50.0}, 3));
  CHECK_THROWS_AS(enumerate_pieces(deep, 10), std::invalid_argument);
}

TEST_CASE("fit recovers |x| with two pieces") {
  const int n = 400;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n);
  for (int s = 0; s < n; ++s) {
    X(s, 0) = -1.0 + 2.0 * s / (n - 1);
    y[s] = std::abs(X(s, 0));
  }
  const MaxAffine f = fit_max_affine(X, y, 2, 3);
  std::vector<double> slopes{f.a(0, 0), f.a(1, 0)};
  std::sort(slopes.begin(), slopes.end());
  CHECK(slopes[0] == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(slopes[1] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(max_affine_mse(f, X, y) < 1e-6);
}

TEST_CASE("K=1 fit is ordinary least squares") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int n = 200;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int s = 0; s < n; ++s) {
    X(s, 0) = unif(rng);
    X(s, 1) = unif(rng);
    y[s] = 0.7 * X(s, 0) - 0.4 * X(s, 1) + 0.2 + 0.01 * unif(rng);
  }
  const MaxAffine f = fit_max_affine(X, y, 1, 5);

  // Normal-equations OLS oracle.
  Eigen::MatrixXd Z(n, 3);
  Z.leftCols(2) = X;
  Z.col(2).setOnes();
  const Eigen::VectorXd theta =
      (Z.transpose() * Z).ldlt().solve(Z.transpose() * y);
  CHECK(f.a(0, 0) == doctest::Approx(theta[0]).epsilon(1e-6));
  CHECK(f.a(0, 1) == doctest::Approx(theta[1]).epsilon(1e-6));
  CHECK(f.b[0] == doctest::Approx(theta[2]).epsilon(1e-6));
}

TEST_CASE("more pieces never hurt on data from a wide ICNN") {
  // Samples from an 8-unit one-hidden-layer ICNN; 64 pieces must fit at
  // least as well as 4.
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  IcnnModel gen;
  gen.in_dim = 2;
  gen.out_dim = 1;
  gen.activation = {ActivationKind::relu, 50.0};
  LayerParams h;
  h.W = Eigen::MatrixXd::NullaryExpr(8, 4, [&](Eigen::Index, Eigen::Index) {
    return std::abs(gauss(rng));
  });
  h.b = Eigen::VectorXd::NullaryExpr(8, [&](Eigen::Index) {
    return 0.3 * gauss(rng);
  });
  LayerParams o;
  o.W = Eigen::MatrixXd::NullaryExpr(1, 8, [&](Eigen::Index, Eigen::Index) {
    return std::abs(gauss(rng));
  });
  o.b = Eigen::VectorXd::Zero(1);
  gen.layers = {h, o};

  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int n = 1500;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int s = 0; s < n; ++s) {
    X(s, 0) = unif(rng);
    X(s, 1) = unif(rng);
    y[s] = forward(gen, X.row(s).transpose())[0];
  }
  const MaxAffine f4 = fit_max_affine(X, y, 4, 9);
  const MaxAffine f64 = fit_max_affine(X, y, 64, 9);
  CHECK(max_affine_mse(f64, X, y) <= max_affine_mse(f4, X, y));
}

TEST_CASE("sup error on a smooth convex target improves with pieces") {
  // x -> x^2 on [-1, 1]; denser max-affine fits approximate better.
  const int n = 1000;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n);
  for (int s = 0; s < n; ++s) {
    X(s, 0) = -1.0 + 2.0 * s / (n - 1);
    y[s] = X(s, 0) * X(s, 0);
  }
  double prev = std::numeric_limits<double>::infinity();
  for (int K : {2, 4, 8, 16}) {
    const MaxAffine f = fit_max_affine(X, y, K, 13);
    double sup = 0.0;
    for (int s = 0; s < n; ++s)
      sup = std::max(sup, std::abs(eval_max_affine(f, X.row(s).transpose()) -
                                   y[s]));
    CHECK(sup < prev);
    prev = sup;
  }
  CHECK(prev < 5e-3);  // 16 pieces track x^2 closely
}

TEST_CASE("fit argument validation") {
  Eigen::MatrixXd X(3, 1);
  X << -1, 0, 1;
  Eigen::VectorXd y(3);
  y << 1, 0, 1;
  CHECK_THROWS_AS(fit_max_affine(X, y, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(fit_max_affine(X, y, 5, 1), std::invalid_argument);
}

TEST_CASE("max-affine json round-trips") {
  std::mt19937_64 rng(41);
  const MaxAffine f = random_max_affine(5, 3, rng);
  const MaxAffine back = max_affine_from_json(max_affine_to_json(f));
  CHECK(back.a == f.a);
  CHECK(back.b == f.b);
}
