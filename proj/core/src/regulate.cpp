#include "vreg/regulate.hpp"

#include <cmath>

namespace vreg {

Eigen::VectorXd project_box(const Eigen::VectorXd& q, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi) {
  if (q.size() != lo.size() || q.size() != hi.size())
    throw DimensionMismatch("box bounds length mismatch");
  if ((lo.array() > hi.array()).any())
    throw BoundsInverted("box lower bound exceeds upper bound");
  return q.cwiseMax(lo).cwiseMin(hi);
}

BoxPgdResult minimize_box(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
    const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
    const Eigen::VectorXd& hi, const BoxPgdConfig& cfg) {
  BoxPgdResult res;
  res.x = project_box(x0, lo, hi);
  double step = cfg.step;
  double f = objective(res.x);
  res.objective_trace.push_back(f);

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Eigen::VectorXd g = gradient(res.x);
    // Stationarity: unit-step projected gradient.
    const double pg_norm =
        (res.x - project_box(res.x - g, lo, hi)).lpNorm<Eigen::Infinity>();
    if (pg_norm < cfg.grad_tol) {
      res.converged = true;
      res.iterations = it - 1;
      return res;
    }
    Eigen::VectorXd cand = project_box(res.x - step * g, lo, hi);
    double f_cand = objective(cand);
    if (cfg.backtracking) {
      while (f_cand > f && step > 1e-14) {
        step *= 0.5;
        cand = project_box(res.x - step * g, lo, hi);
        f_cand = objective(cand);
      }
      if (f_cand > f) {  // step floor hit, no descent direction left
        res.converged = true;
        res.iterations = it;
        return res;
      }
    }
    res.x = std::move(cand);
    f = f_cand;
    res.objective_trace.push_back(f);
    res.iterations = it;
    // Let the step recover after a successful move so one deep backtrack
    // does not pin all later iterations to a microscopic step.
    step = std::min(cfg.step, 2.0 * step);
  }
  res.converged = false;
  return res;
}

RegulationResult regulate(const IcnnModel& model, const Eigen::VectorXd& p,
                          const Eigen::VectorXd& q0,
                          const RegulateConfig& cfg) {
  const Eigen::Index n = q0.size();
  if (p.size() != n || model.in_dim != 2 * n)
    throw DimensionMismatch("regulate: model expects in_dim == 2 * n_buses");
  if (cfg.q_lower.size() != n || cfg.q_upper.size() != n)
    throw DimensionMismatch("regulate: bounds length != n_buses");
  Eigen::VectorXd alpha =
      cfg.alpha.size() ? cfg.alpha : Eigen::VectorXd::Ones(model.out_dim);
  if (alpha.size() != model.out_dim)
    throw DimensionMismatch("regulate: alpha length != out_dim");

  const IcnnModel smooth = with_activation(
      model, Activation{ActivationKind::softplus, cfg.softplus_t});

  auto assemble = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd u(2 * n);
    u << p, q;
    return u;
  };
  auto objective = [&](const Eigen::VectorXd& q) {
    return alpha.dot(forward(smooth, assemble(q)));
  };
  auto gradient = [&](const Eigen::VectorXd& q) {
    return Eigen::VectorXd(
        grad_input_weighted(smooth, assemble(q), alpha).tail(n));
  };

  BoxPgdConfig pgd;
  pgd.step = cfg.step;
  pgd.grad_tol = cfg.grad_tol;
  pgd.max_iter = cfg.max_iter;
  const BoxPgdResult inner = minimize_box(objective, gradient, q0, cfg.q_lower,
                                          cfg.q_upper, pgd);

  RegulationResult res;
  res.q_star = inner.x;
  res.objective_trace = inner.objective_trace;
  res.iterations = inner.iterations;
  res.converged = inner.converged;
  res.predicted_deviation = forward(smooth, assemble(inner.x));
  return res;
}

std::vector<double> evaluate_regulation(const Network& net,
                                        const Eigen::VectorXd& p,
                                        const Eigen::VectorXd& q_star,
                                        const std::vector<double>& thresholds) {
  const PowerFlowSolution sol = solve_power_flow(net, {p, q_star});
  const Eigen::ArrayXd dev = (sol.v.array() - net.slack_voltage).abs();
  std::vector<double> fractions;
  fractions.reserve(thresholds.size());
  for (double th : thresholds)
    fractions.push_back((dev > th).cast<double>().mean());
  return fractions;
}

}  // namespace vreg
