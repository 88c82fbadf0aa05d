#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vreg {

struct InvalidNetwork : std::runtime_error {
  explicit InvalidNetwork(const std::string& what) : std::runtime_error(what) {}
};

struct VoltageCollapse : std::runtime_error {
  explicit VoltageCollapse(const std::string& what) : std::runtime_error(what) {}
};

/// One line of a radial feeder, oriented parent -> child.
struct Line {
  int from = 0;
  int to = 0;
  double r = 0.0;  // p.u. resistance, > 0
  double x = 0.0;  // p.u. reactance, > 0
};

/// Radial (tree) distribution network rooted at bus 0 (the slack bus).
/// All quantities are per-unit.
struct Network {
  int n_buses = 0;
  double slack_voltage = 1.0;
  std::vector<Line> lines;
  std::vector<int> parent;  // parent[0] == -1, parent[k] for k >= 1

  /// Throws InvalidNetwork if the topology is not a connected tree rooted at
  /// bus 0, a line has nonpositive impedance, or lines disagree with parent.
  void validate() const;

  /// Buses ordered root-first so that parents precede children.
  std::vector<int> topological_order() const;

  /// line_of_bus()[k] is the index into lines of the line feeding bus k
  /// (undefined for the slack bus, stored as -1).
  std::vector<int> line_of_bus() const;
};

/// Per-bus injections. Negative entries are loads, positive are generation.
/// The slack entry is ignored by the power flow.
struct Injection {
  Eigen::VectorXd p;
  Eigen::VectorXd q;
};

struct PowerFlowSolution {
  Eigen::VectorXd v;       // bus voltage magnitudes
  Eigen::VectorXd p_flow;  // per-line sending-end active flow p_ik
  Eigen::VectorXd q_flow;  // per-line sending-end reactive flow q_ik
  Eigen::VectorXd l;       // per-line squared current magnitude
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;   // max absolute branch-flow equation violation
};

/// Backward/forward sweep DistFlow solver. The squared-current estimate is
/// lagged one iteration; the sweep is repeated until the max equation residual
/// drops below tol. Returns converged=false after max_iter (with the residual
/// reported); throws VoltageCollapse if a squared voltage goes nonpositive.
PowerFlowSolution solve_power_flow(const Network& net, const Injection& inj,
                                   double tol = 1e-10, int max_iter = 200);

/// Max absolute violation of the four branch-flow equations at a candidate
/// solution. Independent of the sweep; usable as a certificate.
double power_flow_residual(const Network& net, const Injection& inj,
                           const PowerFlowSolution& sol);

/// Fixed 13-bus balanced single-phase-equivalent test feeder.
Network make_path_13();

/// Uniformly random rooted tree on n buses; impedances log-uniform in
/// [0.005, 0.05] p.u. Deterministic given seed.
Network make_random_tree(int n, std::uint64_t seed);

std::string network_to_json(const Network& net);
Network network_from_json(const std::string& text);
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace vreg
