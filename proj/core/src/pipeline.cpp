#include "vreg/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace vreg {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Dataset slice(const Dataset& data, int first, int count) {
  Dataset out;
  out.n_buses = data.n_buses;
  out.rows = data.rows.middleRows(first, count);
  return out;
}

}  // namespace

std::string repro_config_to_json(const ReproConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["n_samples"] = cfg.n_samples;
  j["n_train"] = cfg.n_train;
  j["n_test"] = cfg.n_test;
  j["train_iters"] = cfg.train_iters;
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["n_hidden"] = cfg.n_hidden;
  j["width_factor"] = cfg.width_factor;
  j["qmax"] = cfg.qmax;
  j["distributed_instances"] = cfg.distributed_instances;
  j["out_dir"] = cfg.out_dir;
  return j.dump(2);
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::string& config_json, std::uint64_t seed,
                    const std::vector<std::string>& outputs,
                    double elapsed_seconds) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = nlohmann::json::parse(config_json);
  j["seed"] = seed;
  j["outputs"] = outputs;
  j["version"] = kVersion;
  j["elapsed_seconds"] = elapsed_seconds;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << "\n";
}

std::string summary_to_csv(const ReproSummary& summary, bool include_timings) {
  std::string csv = "model,fit_MAE,viol_3pct,viol_5pct,time_per_instance\n";
  for (const ReproRow& row : summary.rows) {
    csv += row.model + "," + fmt(row.fit_mae_pct) + "," + fmt(row.viol_3pct) +
           "," + fmt(row.viol_5pct) + "," +
           (include_timings ? fmt(row.time_per_instance) : std::string("0")) +
           "\n";
  }
  return csv;
}

ReproSummary run_repro(const ReproConfig& cfg) {
  namespace fs = std::filesystem;
  const double t_start = now_seconds();
  fs::create_directories(cfg.out_dir);
  const std::string dir = cfg.out_dir + "/";

  const Network net = make_path_13();
  save_network(net, dir + "network.json");
  const int n = net.n_buses;

  const LoadProfileConfig profile;
  const Dataset data = generate_dataset(net, profile, cfg.n_samples, cfg.seed);
  const Dataset train_data = slice(data, 0, cfg.n_train);
  save_dataset_csv(train_data, dir + "train.csv");

  // Shared held-out split for both fitters.
  std::vector<int> fit_rows, val_rows;
  split_rows(train_data.n_samples(), 0.2, cfg.seed, fit_rows, val_rows);

  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.n_iterations = cfg.train_iters;
  tc.seed = cfg.seed;
  const IcnnModel init =
      random_model(2 * n, n, cfg.n_hidden, cfg.width_factor * n,
                   Activation{ActivationKind::relu, 50.0}, cfg.seed);
  const TrainReport report = train(init, train_data, tc);
  save_model(report.final_model, dir + "icnn.json");
  {
    std::ofstream out(dir + "loss_curve.csv");
    out << "iter,loss\n";
    for (size_t i = 0; i < report.train_loss_curve.size(); ++i)
      out << i << "," << fmt(report.train_loss_curve[i]) << "\n";
  }

  const LinearModel linear = fit_linear(train_data, fit_rows);
  const double linear_val_mae = linear_mae(linear, train_data, val_rows);

  // Regulation over the held-back test instances.
  const int n_test = std::min(cfg.n_test, data.n_samples() - cfg.n_train);
  const Dataset test = slice(data, cfg.n_train, n_test);
  const std::vector<double> thresholds{0.03, 0.05};
  const Eigen::VectorXd alpha = Eigen::VectorXd::Ones(n);

  struct Accum {
    double v3 = 0.0, v5 = 0.0, time = 0.0;
  } acc_unc, acc_lin, acc_icnn, acc_dist;

  std::ofstream reg_out(dir + "regulate_icnn.csv");
  reg_out << "instance";
  for (int i = 1; i <= n; ++i) reg_out << ",q_" << i;
  for (int i = 1; i <= n; ++i) reg_out << ",pred_dv_" << i;
  for (int i = 1; i <= n; ++i) reg_out << ",real_dv_" << i;
  reg_out << ",iterations\n";

  RegulateConfig rc;
  for (int k = 0; k < n_test; ++k) {
    const Eigen::VectorXd p = test.p().row(k).transpose();
    const Eigen::VectorXd q_nom = test.q().row(k).transpose();
    rc.q_lower = q_nom.array() - cfg.qmax;
    rc.q_upper = q_nom.array() + cfg.qmax;
    rc.q_lower[0] = rc.q_upper[0] = q_nom[0];  // slack has no DER
    rc.alpha = alpha;

    {
      const double t0 = now_seconds();
      const auto fr = evaluate_regulation(net, p, q_nom, thresholds);
      acc_unc.v3 += fr[0];
      acc_unc.v5 += fr[1];
      acc_unc.time += now_seconds() - t0;
    }
    {
      const double t0 = now_seconds();
      const RegulationResult rr = regulate_linear(linear, p, q_nom, rc);
      const auto fr = evaluate_regulation(net, p, rr.q_star, thresholds);
      acc_lin.v3 += fr[0];
      acc_lin.v5 += fr[1];
      acc_lin.time += now_seconds() - t0;
    }
    {
      const double t0 = now_seconds();
      const RegulationResult rr = regulate(report.final_model, p, q_nom, rc);
      const PowerFlowSolution sol = solve_power_flow(net, {p, rr.q_star});
      const Eigen::VectorXd real_dv =
          (sol.v.array() - net.slack_voltage).abs();
      const auto fr = evaluate_regulation(net, p, rr.q_star, thresholds);
      acc_icnn.v3 += fr[0];
      acc_icnn.v5 += fr[1];
      acc_icnn.time += now_seconds() - t0;

      reg_out << k;
      for (int i = 0; i < n; ++i) reg_out << "," << fmt(rr.q_star[i]);
      for (int i = 0; i < n; ++i)
        reg_out << "," << fmt(rr.predicted_deviation[i]);
      for (int i = 0; i < n; ++i) reg_out << "," << fmt(real_dv[i]);
      reg_out << "," << rr.iterations << "\n";
    }
  }

  // Distributed demo on the first few instances, tree communication graph.
  const int n_dist = std::min(cfg.distributed_instances, n_test);
  DistributedConfig dc;
  dc.max_rounds = 120;
  dc.alpha = alpha;
  std::ofstream dist_out(dir + "distributed_rounds.csv");
  dist_out << "instance,round,consensus_gap,objective\n";
  for (int k = 0; k < n_dist; ++k) {
    const Eigen::VectorXd p = test.p().row(k).transpose();
    const Eigen::VectorXd q_nom = test.q().row(k).transpose();
    dc.q_lower = q_nom.array() - cfg.qmax;
    dc.q_upper = q_nom.array() + cfg.qmax;
    dc.q_lower[0] = dc.q_upper[0] = q_nom[0];
    const double t0 = now_seconds();
    const DistributedResult dr = run_distributed(
        report.final_model, p, q_nom, tree_comm_graph(net), dc);
    const auto fr = evaluate_regulation(net, p, dr.q_consensus, thresholds);
    acc_dist.v3 += fr[0];
    acc_dist.v5 += fr[1];
    acc_dist.time += now_seconds() - t0;
    for (int r = 0; r < dr.rounds; ++r)
      dist_out << k << "," << r + 1 << "," << fmt(dr.gap_trace[r]) << ","
               << fmt(dr.objective_trace[r]) << "\n";
  }

  ReproSummary summary;
  summary.rows.push_back({"uncontrolled", 0.0, acc_unc.v3 / n_test,
                          acc_unc.v5 / n_test, acc_unc.time / n_test});
  summary.rows.push_back({"linear", 100.0 * linear_val_mae,
                          acc_lin.v3 / n_test, acc_lin.v5 / n_test,
                          acc_lin.time / n_test});
  summary.rows.push_back({"icnn", 100.0 * report.val_mae, acc_icnn.v3 / n_test,
                          acc_icnn.v5 / n_test, acc_icnn.time / n_test});
  if (n_dist > 0)
    summary.rows.push_back({"icnn_distributed", 100.0 * report.val_mae,
                            acc_dist.v3 / n_dist, acc_dist.v5 / n_dist,
                            acc_dist.time / n_dist});

  // summary.csv is the reproducible artifact: timings are hardware-dependent
  // and live in timings.csv and the manifest instead.
  {
    std::ofstream out(dir + "summary.csv");
    out << summary_to_csv(summary, false);
  }
  {
    std::ofstream out(dir + "timings.csv");
    out << summary_to_csv(summary, true);
  }
  write_manifest(dir + "manifest.json", "repro", repro_config_to_json(cfg),
                 cfg.seed,
                 {dir + "network.json", dir + "train.csv", dir + "icnn.json",
                  dir + "loss_curve.csv", dir + "regulate_icnn.csv",
                  dir + "distributed_rounds.csv", dir + "summary.csv",
                  dir + "timings.csv"},
                 now_seconds() - t_start);
  return summary;
}

}  // namespace vreg
