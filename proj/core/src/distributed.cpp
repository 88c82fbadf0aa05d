#include "vreg/distributed.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace vreg {

bool CommGraph::connected() const {
  if (n_agents <= 0) return false;
  const auto nbrs = neighbors();
  std::vector<bool> seen(n_agents, false);
  std::vector<int> stack{0};
  seen[0] = true;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : nbrs[v])
      if (!seen[w]) {
        seen[w] = true;
        ++count;
        stack.push_back(w);
      }
  }
  return count == n_agents;
}

std::vector<std::vector<int>> CommGraph::neighbors() const {
  std::vector<std::vector<int>> nbrs(n_agents);
  for (auto [i, j] : edges) {
    nbrs[i].push_back(j);
    nbrs[j].push_back(i);
  }
  return nbrs;
}

CommGraph tree_comm_graph(const Network& net) {
  CommGraph g;
  g.n_agents = net.n_buses;
  for (const Line& ln : net.lines) g.edges.emplace_back(ln.from, ln.to);
  return g;
}

CommGraph ring_comm_graph(int n) {
  CommGraph g;
  g.n_agents = n;
  for (int i = 0; i < n; ++i) g.edges.emplace_back(i, (i + 1) % n);
  if (n == 1) g.edges.clear();
  if (n == 2) g.edges.resize(1);
  return g;
}

std::string graph_to_json(const CommGraph& g) {
  nlohmann::json j;
  j["n"] = g.n_agents;
  j["edges"] = nlohmann::json::array();
  for (auto [a, b] : g.edges) j["edges"].push_back({a, b});
  return j.dump(2);
}

CommGraph graph_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CommGraph g;
  g.n_agents = j.at("n").get<int>();
  for (const auto& e : j.at("edges"))
    g.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  return g;
}

double dual_update(double lambda_ij, double q_i_at_i, double q_i_at_j,
                   double alpha_t) {
  if (alpha_t <= 0.0) throw std::invalid_argument("dual step must be > 0");
  return lambda_ij + alpha_t * (q_i_at_i - q_i_at_j);
}

Eigen::VectorXd agent_subproblem(AgentState& agent, const IcnnModel& model,
                                 const Eigen::VectorXd& p,
                                 const std::map<int, NeighborMessage>& inbox,
                                 const DistributedConfig& cfg) {
  const Eigen::Index n = agent.q_local.size();
  const int i = agent.id;
  const Eigen::VectorXd alpha =
      cfg.alpha.size() ? cfg.alpha : Eigen::VectorXd::Ones(model.out_dim);
  const IcnnModel smooth = with_activation(
      model, Activation{ActivationKind::softplus, cfg.softplus_t});

  // Linear price term from the edge multipliers: the agent pays its own
  // outgoing duals and earns its neighbors' incoming ones, coordinate-wise.
  Eigen::VectorXd price = Eigen::VectorXd::Zero(n);
  for (const auto& [j, lam] : agent.dual_out) price += lam;
  for (const auto& [j, msg] : inbox) price -= msg.dual;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(model.out_dim);
  w[i] = alpha[i];
  auto assemble = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd u(2 * n);
    u << p, q;
    return u;
  };
  auto objective = [&](const Eigen::VectorXd& q) {
    return alpha[i] * forward(smooth, assemble(q))[i] + price.dot(q);
  };
  auto gradient = [&](const Eigen::VectorXd& q) {
    return Eigen::VectorXd(grad_input_weighted(smooth, assemble(q), w).tail(n) +
                           price);
  };

  const BoxPgdResult res = minimize_box(objective, gradient, agent.q_local,
                                        cfg.q_lower, cfg.q_upper,
                                        cfg.subproblem);
  agent.q_local = res.x;
  return agent.q_local;
}

DistributedResult run_distributed(const IcnnModel& model,
                                  const Eigen::VectorXd& p,
                                  const Eigen::VectorXd& q0,
                                  const CommGraph& graph,
                                  const DistributedConfig& cfg) {
  if (!graph.connected())
    throw std::invalid_argument("communication graph must be connected");
  const int n = graph.n_agents;
  if (q0.size() != n || p.size() != n)
    throw DimensionMismatch("run_distributed: vector length != n_agents");
  const auto nbrs = graph.neighbors();
  const Eigen::VectorXd alpha =
      cfg.alpha.size() ? cfg.alpha : Eigen::VectorXd::Ones(model.out_dim);
  const IcnnModel smooth = with_activation(
      model, Activation{ActivationKind::softplus, cfg.softplus_t});

  std::vector<AgentState> agents(n);
  const Eigen::VectorXd q_start = project_box(q0, cfg.q_lower, cfg.q_upper);
  for (int i = 0; i < n; ++i) {
    agents[i].id = i;
    agents[i].q_local = q_start;
    for (int j : nbrs[i]) agents[i].dual_out[j] = Eigen::VectorXd::Zero(n);
  }

  auto surrogate_objective = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd u(2 * n);
    u << p, q;
    return alpha.dot(forward(smooth, u));
  };

  DistributedResult out;
  // Round-start messages (all-zero duals, shared initial estimates).
  std::vector<std::map<int, NeighborMessage>> inbox(n);
  auto exchange = [&]() {
    for (int j = 0; j < n; ++j)
      for (int i : nbrs[j])
        inbox[i][j] =
            NeighborMessage{agents[j].q_local, agents[j].dual_out.at(i)};
  };
  exchange();

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    // All subproblems run against the round-start dual values.
    for (int i = 0; i < n; ++i)
      agent_subproblem(agents[i], model, p, inbox[i], cfg);
    exchange();

    double gap = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j : nbrs[i])
        gap = std::max(gap, (agents[i].q_local - inbox[i].at(j).q_estimate)
                                .cwiseAbs()
                                .maxCoeff());

    const double alpha_t = cfg.dual_step0 / std::pow(double(round), cfg.dual_step_pow);
    for (int i = 0; i < n; ++i)
      for (int j : nbrs[i])
        for (int k = 0; k < n; ++k)
          agents[i].dual_out[j][k] =
              dual_update(agents[i].dual_out[j][k], agents[i].q_local[k],
                          inbox[i].at(j).q_estimate[k], alpha_t);

    // Estimate exchange: adopt each neighbor's self-estimate as the local
    // copy of that coordinate, so the next round starts from shared values.
    for (int i = 0; i < n; ++i)
      for (int j : nbrs[i]) agents[i].q_local[j] = inbox[i].at(j).q_estimate[j];
    exchange();

    Eigen::VectorXd consensus(n);
    for (int i = 0; i < n; ++i) consensus[i] = agents[i].q_local[i];
    out.gap_trace.push_back(gap);
    out.objective_trace.push_back(surrogate_objective(consensus));
    out.rounds = round;
    if (gap <= cfg.consensus_tol) {
      out.converged = true;
      break;
    }
  }

  out.per_agent_q.resize(n, n);
  out.q_consensus.resize(n);
  for (int i = 0; i < n; ++i) {
    out.per_agent_q.row(i) = agents[i].q_local.transpose();
    out.q_consensus[i] = agents[i].q_local[i];
  }
  return out;
}

}  // namespace vreg
