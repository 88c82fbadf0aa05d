#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vreg/dataset.hpp"
#include "vreg/grid.hpp"

#include <cmath>
#include <random>

using namespace vreg;

namespace {

Network two_bus(double r = 0.01, double x = 0.01) {
  Network net;
  net.n_buses = 2;
  net.parent = {-1, 0};
  net.lines = {{0, 1, r, x}};
  return net;
}

Network path(int n, double r = 0.02, double x = 0.03) {
  Network net;
  net.n_buses = n;
  net.parent.resize(n);
  net.parent[0] = -1;
  for (int k = 1; k < n; ++k) {
    net.parent[k] = k - 1;
    net.lines.push_back({k - 1, k, r, x});
  }
  return net;
}

/// Closed-form single-line solution: substituting the current equation into
/// the voltage equation leaves a quadratic in l whose smaller root is the
/// physical operating point.
struct TwoBusOracle {
  double l, v2, p_flow, q_flow;
};

TwoBusOracle solve_two_bus(double r, double x, double p2, double q2,
                           double v0 = 1.0) {
  const double z2 = r * r + x * x;
  const double v02 = v0 * v0;
  // z2 l^2 - (v02 + 2 (r p2 + x q2)) l + (p2^2 + q2^2) = 0
  const double bq = -(v02 + 2.0 * (r * p2 + x * q2));
  const double cq = p2 * p2 + q2 * q2;
  const double disc = bq * bq - 4.0 * z2 * cq;
  const double l = (-bq - std::sqrt(disc)) / (2.0 * z2);
  TwoBusOracle sol;
  sol.l = l;
  sol.p_flow = -p2 + r * l;
  sol.q_flow = -q2 + x * l;
  sol.v2 = v02 - 2.0 * (r * sol.p_flow + x * sol.q_flow) + z2 * l;
  return sol;
}

}  // namespace

TEST_CASE("no-load case is the flat voltage profile") {
  const Network net = two_bus();
  const Injection inj{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
  const auto sol = solve_power_flow(net, inj);
  CHECK(sol.converged);
  CHECK(sol.v[0] == 1.0);
  CHECK(sol.v[1] == 1.0);
  CHECK(sol.p_flow[0] == 0.0);
  CHECK(sol.q_flow[0] == 0.0);
  CHECK(sol.l[0] == 0.0);
}

TEST_CASE("two-bus sweep matches the closed-form quadratic") {
  const double r = 0.01, x = 0.01, p2 = -0.1, q2 = -0.1;
  const Network net = two_bus(r, x);
  Injection inj{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
  inj.p[1] = p2;
  inj.q[1] = q2;
  const auto sol = solve_power_flow(net, inj);
  const auto oracle = solve_two_bus(r, x, p2, q2);
  CHECK(sol.converged);
  CHECK(sol.v[1] == doctest::Approx(std::sqrt(oracle.v2)).epsilon(1e-10));
  CHECK(sol.l[0] == doctest::Approx(oracle.l).epsilon(1e-10));
  CHECK(sol.p_flow[0] == doctest::Approx(oracle.p_flow).epsilon(1e-10));
}

TEST_CASE("four-bus path has tiny residuals under random loads") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> load(-0.1, 0.0);
  const Network net = path(4);
  for (int trial = 0; trial < 20; ++trial) {
    Injection inj{Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4)};
    for (int k = 1; k < 4; ++k) {
      inj.p[k] = load(rng);
      inj.q[k] = load(rng);
    }
    const auto sol = solve_power_flow(net, inj);
    CHECK(sol.converged);
    CHECK(power_flow_residual(net, inj, sol) < 1e-8);
  }
}

TEST_CASE("monotone loading weakly decreases the receiving voltage") {
  const Network net = two_bus();
  double prev = 2.0;
  for (int step = 0; step < 20; ++step) {
    Injection inj{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
    inj.q[1] = -0.02 * step;
    const auto sol = solve_power_flow(net, inj);
    CHECK(sol.converged);
    CHECK(sol.v[1] <= prev + 1e-12);
    prev = sol.v[1];
  }
}

TEST_CASE("network validation rejects broken topologies") {
  Network net = path(4);
  net.lines[2].r = -0.01;
  CHECK_THROWS_AS(net.validate(), InvalidNetwork);

  Network cyc = path(3);
  cyc.parent[1] = 2;
  cyc.lines[0].from = 2;
  CHECK_THROWS_AS(cyc.validate(), InvalidNetwork);

  Network wrong = path(3);
  wrong.lines.pop_back();
  CHECK_THROWS_AS(wrong.validate(), InvalidNetwork);
}

TEST_CASE("voltage collapse is flagged as infeasible") {
  const Network net = two_bus(0.2, 0.2);
  Injection inj{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
  inj.p[1] = -3.0;
  inj.q[1] = -3.0;
  CHECK_THROWS_AS(solve_power_flow(net, inj), VoltageCollapse);
}

TEST_CASE("test feeders are valid and deterministic") {
  const Network p13 = make_path_13();
  CHECK(p13.n_buses == 13);
  CHECK(p13.lines.size() == 12);
  CHECK_NOTHROW(p13.validate());

  const Network t1 = make_random_tree(123, 9);
  CHECK(t1.n_buses == 123);
  CHECK(t1.lines.size() == 122);
  CHECK_NOTHROW(t1.validate());

  const Network t2 = make_random_tree(123, 9);
  for (size_t e = 0; e < t1.lines.size(); ++e) {
    CHECK(t1.lines[e].to == t2.lines[e].to);
    CHECK(t1.lines[e].r == t2.lines[e].r);
  }
}

TEST_CASE("network json round-trips") {
  const Network net = make_random_tree(17, 3);
  const Network back = network_from_json(network_to_json(net));
  CHECK(back.n_buses == net.n_buses);
  for (size_t e = 0; e < net.lines.size(); ++e) {
    CHECK(back.lines[e].from == net.lines[e].from);
    CHECK(back.lines[e].r == net.lines[e].r);
    CHECK(back.lines[e].x == net.lines[e].x);
  }
}

TEST_CASE("zero-variance zero-base profile gives all-zero deviations") {
  LoadProfileConfig profile;
  profile.base_p_min = profile.base_p_max = 0.0;
  profile.q_jitter = 0.0;
  const Dataset data = generate_dataset(make_path_13(), profile, 1, 5);
  CHECK(data.dv().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dataset generation is deterministic and re-solvable") {
  const Network net = make_path_13();
  const LoadProfileConfig profile;
  const Dataset a = generate_dataset(net, profile, 50, 11);
  const Dataset b = generate_dataset(net, profile, 50, 11);
  CHECK(a.rows == b.rows);

  // Each row's deviation must reproduce the exact solve at its (p, q).
  for (int s = 0; s < a.n_samples(); ++s) {
    const Injection inj{a.p().row(s).transpose(), a.q().row(s).transpose()};
    const auto sol = solve_power_flow(net, inj);
    REQUIRE(sol.converged);
    const Eigen::VectorXd dv = (sol.v.array() - net.slack_voltage).abs();
    CHECK((dv - a.dv().row(s).transpose()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("dataset csv round-trips") {
  const Dataset data = generate_dataset(make_path_13(), {}, 8, 23);
  const std::string path = "test_dataset_roundtrip.csv";
  save_dataset_csv(data, path);
  const Dataset back = load_dataset_csv(path);
  CHECK(back.n_buses == data.n_buses);
  CHECK((back.rows - data.rows).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}
