#pragma once

#include "vreg/regulate.hpp"

#include <map>
#include <vector>

namespace vreg {

struct NoConsensus : std::runtime_error {
  explicit NoConsensus(const std::string& what) : std::runtime_error(what) {}
};

/// Undirected communication graph; may differ from the grid topology.
struct CommGraph {
  int n_agents = 0;
  std::vector<std::pair<int, int>> edges;

  bool connected() const;
  std::vector<std::vector<int>> neighbors() const;
};

CommGraph tree_comm_graph(const Network& net);
CommGraph ring_comm_graph(int n);
std::string graph_to_json(const CommGraph& g);
CommGraph graph_from_json(const std::string& text);

/// What an agent reveals to one neighbor after a round: its full estimate
/// vector and the dual vector it owns on the shared edge. Consensus is
/// enforced coordinate-wise on every edge (q^i = q^j), so each directed edge
/// carries one multiplier per coordinate; pricing only the endpoints' own
/// coordinates would leave distant couplings unpriced and the relaxed
/// problem strictly looser than the consensus problem.
struct NeighborMessage {
  Eigen::VectorXd q_estimate;  // q^j, the sender's full local estimate
  Eigen::VectorXd dual;        // lambda_{ji} vector, owned by the sender
};

struct AgentState {
  int id = 0;
  Eigen::VectorXd q_local;  // this agent's copy of the full q vector
  std::map<int, Eigen::VectorXd> dual_out;  // lambda_{ij} keyed by neighbor j
};

struct DistributedConfig {
  double dual_step0 = 1.0;      // alpha_t = dual_step0 / t^dual_step_pow
  double dual_step_pow = 0.75;  // decay exponent of the dual step schedule
  double consensus_tol = 1e-3;
  int max_rounds = 200;
  BoxPgdConfig subproblem;     // inner PGD settings
  Eigen::VectorXd q_lower;
  Eigen::VectorXd q_upper;
  Eigen::VectorXd alpha;       // objective weights, empty = ones
  double softplus_t = 50.0;
};

struct DistributedResult {
  Eigen::MatrixXd per_agent_q;       // row i = agent i's final q_local
  Eigen::VectorXd q_consensus;       // coordinate i taken from agent i
  std::vector<double> gap_trace;     // max edge disagreement per round
  std::vector<double> objective_trace;  // surrogate objective at consensus
  int rounds = 0;
  bool converged = false;
};

/// One agent's local solve: minimize
///   alpha_i f_i(q) + sum_j (lambda_ij - lambda_ji) . q
/// over the box, where f_i is the i-th output of the shared ICNN and the
/// incoming duals come from the latest neighbor messages. Warm-started from
/// the agent's current q_local, which is updated in place and returned.
Eigen::VectorXd agent_subproblem(AgentState& agent, const IcnnModel& model,
                                 const Eigen::VectorXd& p,
                                 const std::map<int, NeighborMessage>& inbox,
                                 const DistributedConfig& cfg);

/// Dual ascent step: lambda_ij + alpha_t (q_i^i - q_i^j).
double dual_update(double lambda_ij, double q_i_at_i, double q_i_at_j,
                   double alpha_t);

/// Bulk-synchronous rounds of local solves, neighbor exchange, and dual
/// updates. Agents read only their own state and their neighbors' messages.
DistributedResult run_distributed(const IcnnModel& model,
                                  const Eigen::VectorXd& p,
                                  const Eigen::VectorXd& q0,
                                  const CommGraph& graph,
                                  const DistributedConfig& cfg);

}  // namespace vreg
