#include "vreg/grid.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace vreg {

void Network::validate() const {
  if (n_buses < 1) throw InvalidNetwork("network needs at least one bus");
  if (static_cast<int>(parent.size()) != n_buses)
    throw InvalidNetwork("parent map size != n_buses");
  if (static_cast<int>(lines.size()) != n_buses - 1)
    throw InvalidNetwork("a tree on n buses has n-1 lines");
  if (parent[0] != -1) throw InvalidNetwork("bus 0 must be the root");
  for (int k = 1; k < n_buses; ++k) {
    if (parent[k] < 0 || parent[k] >= n_buses || parent[k] == k)
      throw InvalidNetwork("invalid parent for bus " + std::to_string(k));
  }
  std::vector<int> line_of(n_buses, -1);
  for (int e = 0; e < static_cast<int>(lines.size()); ++e) {
    const Line& ln = lines[e];
    if (ln.r <= 0.0 || ln.x <= 0.0)
      throw InvalidNetwork("line impedance must be positive");
    if (ln.to <= 0 || ln.to >= n_buses || ln.from != parent[ln.to])
      throw InvalidNetwork("line orientation disagrees with parent map");
    if (line_of[ln.to] != -1)
      throw InvalidNetwork("duplicate line into bus " + std::to_string(ln.to));
    line_of[ln.to] = e;
  }
  // Connectivity: every bus must reach the root through parent links.
  for (int k = 1; k < n_buses; ++k) {
    int cur = k, steps = 0;
    while (cur != 0) {
      cur = parent[cur];
      if (++steps > n_buses) throw InvalidNetwork("cycle in parent map");
    }
  }
}

std::vector<int> Network::topological_order() const {
  std::vector<int> depth(n_buses, 0);
  std::vector<int> order(n_buses);
  for (int k = 1; k < n_buses; ++k) {
    int cur = k;
    while (cur != 0) {
      cur = parent[cur];
      ++depth[k];
    }
  }
  for (int k = 0; k < n_buses; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return depth[a] < depth[b]; });
  return order;
}

std::vector<int> Network::line_of_bus() const {
  std::vector<int> line_of(n_buses, -1);
  for (int e = 0; e < static_cast<int>(lines.size()); ++e)
    line_of[lines[e].to] = e;
  return line_of;
}

double power_flow_residual(const Network& net, const Injection& inj,
                           const PowerFlowSolution& sol) {
  const int n = net.n_buses;
  const auto line_of = net.line_of_bus();
  std::vector<std::vector<int>> child_lines(n);
  for (int e = 0; e < static_cast<int>(net.lines.size()); ++e)
    child_lines[net.lines[e].from].push_back(e);

  double worst = 0.0;
  for (int k = 1; k < n; ++k) {
    const int e = line_of[k];
    const Line& ln = net.lines[e];
    double down_p = 0.0, down_q = 0.0;
    for (int ce : child_lines[k]) {
      down_p += sol.p_flow[ce];
      down_q += sol.q_flow[ce];
    }
    const double vi2 = sol.v[ln.from] * sol.v[ln.from];
    const double vk2 = sol.v[k] * sol.v[k];
    const double res_p =
        inj.p[k] + sol.p_flow[e] - ln.r * sol.l[e] - down_p;
    const double res_q =
        inj.q[k] + sol.q_flow[e] - ln.x * sol.l[e] - down_q;
    const double res_v =
        vk2 - vi2 + 2.0 * (ln.r * sol.p_flow[e] + ln.x * sol.q_flow[e]) -
        (ln.r * ln.r + ln.x * ln.x) * sol.l[e];
    const double res_l =
        sol.l[e] -
        (sol.p_flow[e] * sol.p_flow[e] + sol.q_flow[e] * sol.q_flow[e]) / vi2;
    worst = std::max({worst, std::abs(res_p), std::abs(res_q),
                      std::abs(res_v), std::abs(res_l)});
  }
  return worst;
}

PowerFlowSolution solve_power_flow(const Network& net, const Injection& inj,
                                   double tol, int max_iter) {
  net.validate();
  if (tol <= 0.0) throw std::invalid_argument("tol must be positive");
  const int n = net.n_buses;
  const int n_lines = n - 1;
  if (inj.p.size() != n || inj.q.size() != n)
    throw std::invalid_argument("injection length != n_buses");

  const auto order = net.topological_order();
  const auto line_of = net.line_of_bus();
  std::vector<std::vector<int>> child_lines(n);
  for (int e = 0; e < n_lines; ++e)
    child_lines[net.lines[e].from].push_back(e);

  PowerFlowSolution sol;
  sol.v = Eigen::VectorXd::Constant(n, net.slack_voltage);
  sol.p_flow = Eigen::VectorXd::Zero(n_lines);
  sol.q_flow = Eigen::VectorXd::Zero(n_lines);
  sol.l = Eigen::VectorXd::Zero(n_lines);

  Eigen::VectorXd v2 = Eigen::VectorXd::Constant(n, net.slack_voltage * net.slack_voltage);

  for (int it = 1; it <= max_iter; ++it) {
    // Backward: accumulate sending-end flows leaf-to-root with lagged l.
    for (int oi = n - 1; oi >= 1; --oi) {
      const int k = order[oi];
      const int e = line_of[k];
      const Line& ln = net.lines[e];
      double down_p = 0.0, down_q = 0.0;
      for (int ce : child_lines[k]) {
        down_p += sol.p_flow[ce];
        down_q += sol.q_flow[ce];
      }
      sol.p_flow[e] = -inj.p[k] + ln.r * sol.l[e] + down_p;
      sol.q_flow[e] = -inj.q[k] + ln.x * sol.l[e] + down_q;
    }
    // Forward: propagate squared voltages root-to-leaf.
    for (int oi = 1; oi < n; ++oi) {
      const int k = order[oi];
      const int e = line_of[k];
      const Line& ln = net.lines[e];
      v2[k] = v2[ln.from] -
              2.0 * (ln.r * sol.p_flow[e] + ln.x * sol.q_flow[e]) +
              (ln.r * ln.r + ln.x * ln.x) * sol.l[e];
      if (v2[k] <= 0.0)
        throw VoltageCollapse("squared voltage nonpositive at bus " +
                              std::to_string(k));
    }
    // Squared-current update from the sending-end voltage.
    for (int e = 0; e < n_lines; ++e) {
      const double vi2 = v2[net.lines[e].from];
      sol.l[e] =
          (sol.p_flow[e] * sol.p_flow[e] + sol.q_flow[e] * sol.q_flow[e]) / vi2;
    }
    sol.v = v2.cwiseSqrt();
    sol.iterations = it;
    sol.residual = power_flow_residual(net, inj, sol);
    if (sol.residual <= tol) {
      sol.converged = true;
      return sol;
    }
  }
  sol.converged = false;
  return sol;
}

Network make_path_13() {
  // Balanced single-phase-equivalent feeder: a main path with two laterals,
  // representative impedances only.
  Network net;
  net.n_buses = 13;
  net.slack_voltage = 1.0;
  net.parent = {-1, 0, 1, 2, 3, 4, 5, 3, 7, 8, 5, 10, 11};
  const double rs[] = {0.016, 0.020, 0.014, 0.018, 0.016, 0.020,
                       0.012, 0.016, 0.014, 0.018, 0.016, 0.014};
  const double xs[] = {0.032, 0.036, 0.028, 0.034, 0.030, 0.036,
                       0.026, 0.030, 0.028, 0.034, 0.030, 0.026};
  for (int k = 1; k < net.n_buses; ++k)
    net.lines.push_back({net.parent[k], k, rs[k - 1], xs[k - 1]});
  net.validate();
  return net;
}

Network make_random_tree(int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("random tree needs n >= 2");
  std::mt19937_64 rng(seed);
  Network net;
  net.n_buses = n;
  net.parent.assign(n, -1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double lo = std::log(0.005), hi = std::log(0.05);
  for (int k = 1; k < n; ++k) {
    std::uniform_int_distribution<int> pick(0, k - 1);
    net.parent[k] = pick(rng);
    const double r = std::exp(lo + (hi - lo) * unif(rng));
    const double x = std::exp(lo + (hi - lo) * unif(rng));
    net.lines.push_back({net.parent[k], k, r, x});
  }
  net.validate();
  return net;
}

std::string network_to_json(const Network& net) {
  nlohmann::json j;
  j["n_buses"] = net.n_buses;
  j["slack_voltage"] = net.slack_voltage;
  j["lines"] = nlohmann::json::array();
  for (const Line& ln : net.lines)
    j["lines"].push_back(
        {{"from", ln.from}, {"to", ln.to}, {"r", ln.r}, {"x", ln.x}});
  return j.dump(2);
}

Network network_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Network net;
  net.n_buses = j.at("n_buses").get<int>();
  net.slack_voltage = j.value("slack_voltage", 1.0);
  net.parent.assign(net.n_buses, -1);
  for (const auto& lj : j.at("lines")) {
    Line ln;
    ln.from = lj.at("from").get<int>();
    ln.to = lj.at("to").get<int>();
    ln.r = lj.at("r").get<double>();
    ln.x = lj.at("x").get<double>();
    net.lines.push_back(ln);
    if (ln.to >= 0 && ln.to < net.n_buses) net.parent[ln.to] = ln.from;
  }
  net.validate();
  return net;
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << network_to_json(net) << "\n";
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return network_from_json(text);
}

}  // namespace vreg
