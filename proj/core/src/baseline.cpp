#include "vreg/baseline.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace vreg {

LinearModel fit_linear(const Dataset& data, const std::vector<int>& rows_in) {
  const int n = data.n_buses;
  std::vector<int> rows = rows_in;
  if (rows.empty()) {
    rows.resize(data.n_samples());
    std::iota(rows.begin(), rows.end(), 0);
  }
  if (static_cast<int>(rows.size()) < 2 * n + 1)
    throw std::invalid_argument("fit_linear needs at least 2N+1 rows");

  Eigen::MatrixXd Z(rows.size(), 2 * n + 1);
  Eigen::MatrixXd T(rows.size(), n);
  for (size_t r = 0; r < rows.size(); ++r) {
    Z.row(r).head(n) = data.p().row(rows[r]);
    Z.row(r).segment(n, n) = data.q().row(rows[r]);
    Z(r, 2 * n) = 1.0;
    T.row(r) = data.dv().row(rows[r]);
  }
  Eigen::MatrixXd G = Z.transpose() * Z;
  G.diagonal().array() += 1e-8;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  const Eigen::MatrixXd theta = ldlt.solve(Z.transpose() * T);  // (2n+1) x n

  LinearModel model;
  model.A = theta.topRows(2 * n).transpose();
  model.c = theta.row(2 * n).transpose();
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
  model.rank_deficient = qr.rank() < Z.cols();
  model.fit_residual =
      std::sqrt((Z * theta - T).squaredNorm() / double(T.size()));
  return model;
}

Eigen::VectorXd predict_linear(const LinearModel& model,
                               const Eigen::VectorXd& p,
                               const Eigen::VectorXd& q) {
  Eigen::VectorXd u(p.size() + q.size());
  u << p, q;
  return model.A * u + model.c;
}

double linear_mae(const LinearModel& model, const Dataset& data,
                  const std::vector<int>& rows) {
  if (rows.empty()) return 0.0;
  double acc = 0.0;
  for (int r : rows) {
    const Eigen::VectorXd pred = predict_linear(
        model, data.p().row(r).transpose(), data.q().row(r).transpose());
    acc += (pred - data.dv().row(r).transpose()).cwiseAbs().mean();
  }
  return acc / rows.size();
}

RegulationResult regulate_linear(const LinearModel& model,
                                 const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& q0,
                                 const RegulateConfig& cfg) {
  const Eigen::Index n = q0.size();
  const Eigen::VectorXd alpha =
      cfg.alpha.size() ? cfg.alpha : Eigen::VectorXd::Ones(model.c.size());
  const Eigen::MatrixXd Aq = model.A.rightCols(n);  // sensitivity to q

  auto residuals = [&](const Eigen::VectorXd& q) {
    return Eigen::VectorXd(predict_linear(model, p, q));
  };
  auto exact = [&](const Eigen::VectorXd& q) {
    return alpha.dot(residuals(q).cwiseAbs());
  };

  Eigen::VectorXd q = project_box(q0, cfg.q_lower, cfg.q_upper);
  RegulationResult out;
  out.converged = true;

  // |r| smoothed as softplus(r) + softplus(-r); sharpness raised in stages so
  // the kink optimum resolves without a vanishing step size.
  for (double t : {1e2, 1e3, 1e4, 1e5, 1e6}) {
    auto objective = [&, t](const Eigen::VectorXd& qq) {
      const Eigen::VectorXd r = residuals(qq);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < r.size(); ++i)
        acc += alpha[i] * (softplus(r[i], t) + softplus(-r[i], t));
      return acc;
    };
    auto gradient = [&, t](const Eigen::VectorXd& qq) {
      const Eigen::VectorXd r = residuals(qq);
      Eigen::VectorXd w(r.size());
      for (Eigen::Index i = 0; i < r.size(); ++i)
        w[i] = alpha[i] * std::tanh(0.5 * t * r[i]);
      return Eigen::VectorXd(Aq.transpose() * w);
    };
    BoxPgdConfig pgd;
    pgd.step = cfg.step;
    pgd.grad_tol = cfg.grad_tol;
    pgd.max_iter = cfg.max_iter;
    const BoxPgdResult stage =
        minimize_box(objective, gradient, q, cfg.q_lower, cfg.q_upper, pgd);
    q = stage.x;
    out.iterations += stage.iterations;
    out.converged = out.converged && stage.converged;
    out.objective_trace.push_back(exact(q));
  }

  out.q_star = q;
  out.predicted_deviation = residuals(q).cwiseAbs();
  return out;
}

double true_objective(const Network& net, const Eigen::VectorXd& p,
                      const Eigen::VectorXd& q, const Eigen::VectorXd& alpha) {
  const PowerFlowSolution sol = solve_power_flow(net, {p, q});
  if (!sol.converged) return std::numeric_limits<double>::infinity();
  return alpha.dot((sol.v.array() - net.slack_voltage).abs().matrix());
}

OracleResult oracle_regulate(const Network& net, const Eigen::VectorXd& p,
                             const Eigen::VectorXd& q_lower,
                             const Eigen::VectorXd& q_upper,
                             const Eigen::VectorXd& alpha, int grid_points) {
  const Eigen::Index n = q_lower.size();
  if ((q_lower.array() > q_upper.array()).any())
    throw BoundsInverted("oracle box inverted");
  std::vector<int> free_coords;
  for (Eigen::Index i = 0; i < n; ++i)
    if (q_upper[i] > q_lower[i]) free_coords.push_back(static_cast<int>(i));
  if (free_coords.size() > 4)
    throw TooManyDimensions("oracle grid limited to 4 free coordinates");

  Eigen::VectorXd q = 0.5 * (q_lower + q_upper);  // fixed coords at midpoint
  const int nf = static_cast<int>(free_coords.size());
  const long total = static_cast<long>(std::pow(double(grid_points), nf));

  OracleResult best;
  best.objective = std::numeric_limits<double>::infinity();
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int fi = 0; fi < nf; ++fi) {
      const int g = static_cast<int>(rem % grid_points);
      rem /= grid_points;
      const int i = free_coords[fi];
      q[i] = grid_points == 1
                 ? 0.5 * (q_lower[i] + q_upper[i])
                 : q_lower[i] +
                       (q_upper[i] - q_lower[i]) * g / (grid_points - 1);
    }
    double obj;
    try {
      obj = true_objective(net, p, q, alpha);
    } catch (const VoltageCollapse&) {
      continue;
    }
    if (obj < best.objective) {
      best.objective = obj;
      best.q_best = q;
    }
  }
  if (!std::isfinite(best.objective))
    throw std::runtime_error("no feasible grid point in oracle search");
  return best;
}

}  // namespace vreg
