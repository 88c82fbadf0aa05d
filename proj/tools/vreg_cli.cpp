// Command-line front end: wires dataset generation, training, regulation,
// the distributed protocol, baselines, and the max-affine tools into
// plot-ready CSV artifacts. Every subcommand is deterministic given its seed
// and writes a JSON manifest next to its primary output.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vreg/baseline.hpp"
#include "vreg/dataset.hpp"
#include "vreg/distributed.hpp"
#include "vreg/grid.hpp"
#include "vreg/icnn.hpp"
#include "vreg/maxaffine.hpp"
#include "vreg/pipeline.hpp"
#include "vreg/regulate.hpp"
#include "vreg/train.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

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

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  if (fs::path(path).has_parent_path())
    fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
}

// ---------------------------------------------------------------------------
// Global flags and config-file precedence: CLI flags > config JSON > defaults.

struct Globals {
  std::uint64_t seed = 7;
  int threads = 1;
  std::string config_path;
  std::string out_dir = "out";
  json config;  // loaded lazily from config_path

  void load_config() {
    if (config_path.empty()) return;
    config = json::parse(read_file(config_path));
    if (!config.is_object())
      throw std::runtime_error("config file must hold a JSON object");
  }

  /// Applies a config-file value when the flag was not given on the CLI.
  template <typename T>
  void apply(const CLI::App* sub, const std::string& flag,
             const std::string& key, T& var) const {
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt && opt->count() > 0) return;  // CLI wins
    if (config.contains(key)) var = config.at(key).get<T>();
  }
};

void write_run_manifest(const Globals& g, const std::string& primary_output,
                        const std::string& command, const json& effective,
                        const std::vector<std::string>& outputs,
                        double elapsed) {
  vreg::write_manifest(primary_output + ".manifest.json", command,
                       effective.dump(2), g.seed, outputs, elapsed);
}

vreg::RegulateConfig box_config(const Eigen::VectorXd& q_nom, double qmax) {
  vreg::RegulateConfig rc;
  rc.q_lower = q_nom.array() - qmax;
  rc.q_upper = q_nom.array() + qmax;
  rc.q_lower[0] = rc.q_upper[0] = q_nom[0];  // slack bus has no DER
  return rc;
}

void write_regulation_csv_header(std::ofstream& out, int n) {
  out << "instance";
  for (int i = 1; i <= n; ++i) out << ",q_" << i;
  for (int i = 1; i <= n; ++i) out << ",pred_dv_" << i;
  for (int i = 1; i <= n; ++i) out << ",real_dv_" << i;
  out << ",iterations\n";
}

void write_regulation_csv_row(std::ofstream& out, int instance,
                              const vreg::Network& net,
                              const Eigen::VectorXd& p,
                              const vreg::RegulationResult& rr) {
  const vreg::PowerFlowSolution sol =
      vreg::solve_power_flow(net, {p, rr.q_star});
  const Eigen::VectorXd real_dv = (sol.v.array() - net.slack_voltage).abs();
  out << instance;
  for (int i = 0; i < rr.q_star.size(); ++i) out << "," << fmt(rr.q_star[i]);
  for (int i = 0; i < rr.predicted_deviation.size(); ++i)
    out << "," << fmt(rr.predicted_deviation[i]);
  for (int i = 0; i < real_dv.size(); ++i) out << "," << fmt(real_dv[i]);
  out << "," << rr.iterations << "\n";
}

std::string linear_model_to_json(const vreg::LinearModel& m) {
  json j;
  j["A"] = json::array();
  for (int r = 0; r < m.A.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.A.cols(); ++c) row.push_back(m.A(r, c));
    j["A"].push_back(row);
  }
  j["c"] = std::vector<double>(m.c.begin(), m.c.end());
  j["rank_deficient"] = m.rank_deficient;
  j["fit_residual"] = m.fit_residual;
  return j.dump(2);
}

vreg::LinearModel linear_model_from_json(const std::string& text) {
  const json j = json::parse(text);
  vreg::LinearModel m;
  const auto& A = j.at("A");
  const int rows = static_cast<int>(A.size());
  const int cols = rows ? static_cast<int>(A[0].size()) : 0;
  m.A.resize(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m.A(r, c) = A[r][c].get<double>();
  const auto cvec = j.at("c").get<std::vector<double>>();
  m.c = Eigen::Map<const Eigen::VectorXd>(cvec.data(), cvec.size());
  m.rank_deficient = j.value("rank_deficient", false);
  m.fit_residual = j.value("fit_residual", 0.0);
  return m;
}

/// Numeric cells of a CSV file; a leading non-numeric header line is skipped.
std::vector<std::vector<double>> load_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool ok = true;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) ok = false;
      } catch (const std::exception&) {
        ok = false;
      }
      if (!ok) break;
    }
    if (!ok) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw std::runtime_error(path + ": non-numeric cell outside the header");
    }
    first = false;
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns void and throws on runtime errors.

void cmd_gen_network(Globals& g, bool random_tree, int buses,
                     std::string out) {
  const double t0 = now_seconds();
  if (out.empty()) out = g.out_dir + "/network.json";
  const vreg::Network net =
      random_tree ? vreg::make_random_tree(buses, g.seed)
                  : vreg::make_path_13();
  if (fs::path(out).has_parent_path())
    fs::create_directories(fs::path(out).parent_path());
  vreg::save_network(net, out);
  json eff{{"random", random_tree}, {"buses", net.n_buses}, {"out", out}};
  write_run_manifest(g, out, "gen-network", eff, {out}, now_seconds() - t0);
  std::cout << "wrote " << out << " (" << net.n_buses << " buses)\n";
}

void cmd_gen_data(Globals& g, const std::string& net_path, int samples,
                  std::string out) {
  const double t0 = now_seconds();
  if (out.empty()) out = g.out_dir + "/data.csv";
  const vreg::Network net = vreg::load_network(net_path);
  const vreg::LoadProfileConfig profile;
  int rejected = 0;
  const vreg::Dataset data =
      vreg::generate_dataset(net, profile, samples, g.seed, &rejected);
  if (fs::path(out).has_parent_path())
    fs::create_directories(fs::path(out).parent_path());
  vreg::save_dataset_csv(data, out);
  json eff{{"net", net_path}, {"samples", samples}, {"rejected", rejected},
           {"out", out}};
  write_run_manifest(g, out, "gen-data", eff, {out}, now_seconds() - t0);
  std::cout << "wrote " << out << " (" << data.n_samples() << " rows, "
            << rejected << " rejected)\n";
}

void cmd_train(Globals& g, const std::string& data_path,
               const std::string& net_path, std::string out, int iters,
               double lr, int batch, int hidden, int width_factor,
               bool no_project) {
  const double t0 = now_seconds();
  if (out.empty()) out = g.out_dir + "/icnn.json";
  const vreg::Dataset data = vreg::load_dataset_csv(data_path);
  if (!net_path.empty()) {
    const vreg::Network net = vreg::load_network(net_path);
    if (net.n_buses != data.n_buses)
      throw std::runtime_error("network bus count does not match dataset");
  }
  const int n = data.n_buses;
  vreg::TrainConfig tc;
  tc.learning_rate = lr;
  tc.batch_size = batch;
  tc.n_iterations = iters;
  tc.seed = g.seed;
  tc.project = !no_project;
  const vreg::IcnnModel init = vreg::random_model(
      2 * n, n, hidden, width_factor * n,
      vreg::Activation{vreg::ActivationKind::relu, 50.0}, g.seed);
  const vreg::TrainReport report = vreg::train(init, data, tc);
  if (fs::path(out).has_parent_path())
    fs::create_directories(fs::path(out).parent_path());
  vreg::save_model(report.final_model, out);
  const std::string loss_path =
      (fs::path(out).parent_path() / "loss_curve.csv").string();
  {
    std::ofstream lc(loss_path);
    lc << "iter,loss\n";
    for (size_t i = 0; i < report.train_loss_curve.size(); ++i)
      lc << i << "," << fmt(report.train_loss_curve[i]) << "\n";
  }
  json eff{{"data", data_path}, {"net", net_path},    {"out", out},
           {"iters", iters},    {"lr", lr},           {"batch", batch},
           {"hidden", hidden},  {"width", width_factor},
           {"project", !no_project}};
  write_run_manifest(g, out, "train", eff, {out, loss_path},
                     now_seconds() - t0);
  std::cout << "validation MAE " << fmt(report.val_mae) << "\n"
            << "wrote " << out << " and " << loss_path << "\n";
}

void cmd_regulate(Globals& g, const std::string& model_path,
                  const std::string& net_path,
                  const std::string& instances_path, double qmax,
                  std::string out) {
  const double t0 = now_seconds();
  if (out.empty()) out = g.out_dir + "/regulate.csv";
  const vreg::IcnnModel model = vreg::load_model(model_path);
  const vreg::Network net = vreg::load_network(net_path);
  const vreg::Dataset inst = vreg::load_dataset_csv(instances_path);
  if (inst.n_buses != net.n_buses)
    throw std::runtime_error("instance bus count does not match network");
  if (fs::path(out).has_parent_path())
    fs::create_directories(fs::path(out).parent_path());
  std::ofstream csv(out);
  write_regulation_csv_header(csv, net.n_buses);
  for (int k = 0; k < inst.n_samples(); ++k) {
    const Eigen::VectorXd p = inst.p().row(k).transpose();
    const Eigen::VectorXd q_nom = inst.q().row(k).transpose();
    const vreg::RegulateConfig rc = box_config(q_nom, qmax);
    const vreg::RegulationResult rr = vreg::regulate(model, p, q_nom, rc);
    write_regulation_csv_row(csv, k, net, p, rr);
  }
  json eff{{"model", model_path}, {"net", net_path},
           {"instances", instances_path}, {"qmax", qmax}, {"out", out}};
  write_run_manifest(g, out, "regulate", eff, {out}, now_seconds() - t0);
  std::cout << "wrote " << out << " (" << inst.n_samples() << " instances)\n";
}

void cmd_distributed(Globals& g, const std::string& model_path,
                     const std::string& net_path,
                     const std::string& graph_path,
                     const std::string& instances_path, int instance,
                     double qmax, double delta, int rounds, std::string out) {
  const double t0 = now_seconds();
  if (out.empty()) out = g.out_dir + "/distributed.csv";
  const vreg::IcnnModel model = vreg::load_model(model_path);
  const vreg::Network net = vreg::load_network(net_path);
  const vreg::CommGraph graph =
      graph_path.empty() ? vreg::tree_comm_graph(net)
                         : vreg::graph_from_json(read_file(graph_path));
  const vreg::Dataset inst = vreg::load_dataset_csv(instances_path);
  if (instance < 0 || instance >= inst.n_samples())
    throw std::runtime_error("instance index out of range");
  const Eigen::VectorXd p = inst.p().row(instance).transpose();
  const Eigen::VectorXd q_nom = inst.q().row(instance).transpose();

  vreg::DistributedConfig dc;
  dc.consensus_tol = delta;
  dc.max_rounds = rounds;
  dc.q_lower = q_nom.array() - qmax;
  dc.q_upper = q_nom.array() + qmax;
  dc.q_lower[0] = dc.q_upper[0] = q_nom[0];
  const vreg::DistributedResult dr =
      vreg::run_distributed(model, p, q_nom, graph, dc);

  if (fs::path(out).has_parent_path())
    fs::create_directories(fs::path(out).parent_path());
  std::ofstream csv(out);
  csv << "round,consensus_gap,objective\n";
  for (int r = 0; r < dr.rounds; ++r)
    csv << r + 1 << "," << fmt(dr.gap_trace[r]) << ","
        << fmt(dr.objective_trace[r]) << "\n";

  const std::string agents_path =
      (fs::path(out).parent_path() /
       (fs::path(out).stem().string() + "_agents.csv"))
          .string();
  std::ofstream acsv(agents_path);
  acsv << "agent";
  for (int i = 1; i <= net.n_buses; ++i) acsv << ",q_" << i;
  acsv << "\n";
  for (int a = 0; a < dr.per_agent_q.rows(); ++a) {
    acsv << a;
    for (int i = 0; i < dr.per_agent_q.cols(); ++i)
      acsv << "," << fmt(dr.per_agent_q(a, i));
    acsv << "\n";
  }

  json eff{{"model", model_path},  {"net", net_path},
           {"graph", graph_path},  {"instances", instances_path},
           {"instance", instance}, {"qmax", qmax},
           {"delta", delta},       {"rounds", rounds},
           {"out", out}};
  write_run_manifest(g, out, "distributed", eff, {out, agents_path},
                     now_seconds() - t0);
  std::cout << (dr.converged ? "consensus" : "no consensus") << " after "
            << dr.rounds << " rounds, final gap "
            << fmt(dr.gap_trace.empty() ? 0.0 : dr.gap_trace.back()) << "\n"
            << "wrote " << out << " and " << agents_path << "\n";
}

void cmd_baseline_linear_fit(Globals& g, const std::string& data_path,
                             std::string out) {
  const double t0 = now_seconds();
  if (out.empty()) out = g.out_dir + "/linear.json";
  const vreg::Dataset data = vreg::load_dataset_csv(data_path);
  const vreg::LinearModel model = vreg::fit_linear(data);
  write_file(out, linear_model_to_json(model) + "\n");
  json eff{{"data", data_path}, {"out", out}};
  write_run_manifest(g, out, "baseline linear-fit", eff, {out},
                     now_seconds() - t0);
  std::cout << "fit residual " << fmt(model.fit_residual) << "\nwrote " << out
            << "\n";
}

void cmd_baseline_linear_regulate(Globals& g, const std::string& model_path,
                                  const std::string& net_path,
                                  const std::string& instances_path,
                                  double qmax, std::string out) {
  const double t0 = now_seconds();
  if (out.empty()) out = g.out_dir + "/linear_regulate.csv";
  const vreg::LinearModel model =
      linear_model_from_json(read_file(model_path));
  const vreg::Network net = vreg::load_network(net_path);
  const vreg::Dataset inst = vreg::load_dataset_csv(instances_path);
  if (fs::path(out).has_parent_path())
    fs::create_directories(fs::path(out).parent_path());
  std::ofstream csv(out);
  write_regulation_csv_header(csv, net.n_buses);
  for (int k = 0; k < inst.n_samples(); ++k) {
    const Eigen::VectorXd p = inst.p().row(k).transpose();
    const Eigen::VectorXd q_nom = inst.q().row(k).transpose();
    const vreg::RegulateConfig rc = box_config(q_nom, qmax);
    const vreg::RegulationResult rr =
        vreg::regulate_linear(model, p, q_nom, rc);
    write_regulation_csv_row(csv, k, net, p, rr);
  }
  json eff{{"model", model_path}, {"net", net_path},
           {"instances", instances_path}, {"qmax", qmax}, {"out", out}};
  write_run_manifest(g, out, "baseline linear-regulate", eff, {out},
                     now_seconds() - t0);
  std::cout << "wrote " << out << "\n";
}

void cmd_baseline_oracle(Globals& g, const std::string& net_path,
                         const std::string& instances_path, double qmax,
                         int grid_points, std::string out) {
  const double t0 = now_seconds();
  if (out.empty()) out = g.out_dir + "/oracle.csv";
  const vreg::Network net = vreg::load_network(net_path);
  const vreg::Dataset inst = vreg::load_dataset_csv(instances_path);
  const Eigen::VectorXd alpha = Eigen::VectorXd::Ones(net.n_buses);
  if (fs::path(out).has_parent_path())
    fs::create_directories(fs::path(out).parent_path());
  std::ofstream csv(out);
  csv << "instance,objective";
  for (int i = 1; i <= net.n_buses; ++i) csv << ",q_" << i;
  csv << "\n";
  for (int k = 0; k < inst.n_samples(); ++k) {
    const Eigen::VectorXd p = inst.p().row(k).transpose();
    const Eigen::VectorXd q_nom = inst.q().row(k).transpose();
    const vreg::RegulateConfig rc = box_config(q_nom, qmax);
    const vreg::OracleResult res = vreg::oracle_regulate(
        net, p, rc.q_lower, rc.q_upper, alpha, grid_points);
    csv << k << "," << fmt(res.objective);
    for (int i = 0; i < res.q_best.size(); ++i)
      csv << "," << fmt(res.q_best[i]);
    csv << "\n";
  }
  json eff{{"net", net_path}, {"instances", instances_path}, {"qmax", qmax},
           {"grid_points", grid_points}, {"out", out}};
  write_run_manifest(g, out, "baseline oracle", eff, {out},
                     now_seconds() - t0);
  std::cout << "wrote " << out << "\n";
}

void cmd_maxaffine_convert(Globals& g, const std::string& in_path,
                           std::string out) {
  const double t0 = now_seconds();
  if (out.empty()) out = g.out_dir + "/maxaffine_icnn.json";
  const vreg::MaxAffine f = vreg::max_affine_from_json(read_file(in_path));
  const vreg::IcnnModel m = vreg::icnn_from_max_affine(f);
  if (fs::path(out).has_parent_path())
    fs::create_directories(fs::path(out).parent_path());
  vreg::save_model(m, out);
  json eff{{"in", in_path}, {"out", out}};
  write_run_manifest(g, out, "maxaffine convert", eff, {out},
                     now_seconds() - t0);
  std::cout << "wrote " << out << " (" << f.n_pieces() << " pieces -> "
            << m.n_layers() << " layers)\n";
}

void cmd_maxaffine_enumerate(Globals& g, const std::string& model_path,
                             int samples, std::string out) {
  const double t0 = now_seconds();
  if (out.empty()) out = g.out_dir + "/pieces.csv";
  const vreg::IcnnModel m = vreg::load_model(model_path);
  const vreg::PieceEnumeration pe = vreg::enumerate_pieces(m, samples);
  if (fs::path(out).has_parent_path())
    fs::create_directories(fs::path(out).parent_path());
  std::ofstream csv(out);
  csv << "piece,pattern,realized,b";
  for (int i = 1; i <= pe.candidates.dim(); ++i) csv << ",a_" << i;
  csv << "\n";
  for (int k = 0; k < pe.candidates.n_pieces(); ++k) {
    csv << k << "," << pe.patterns[k] << "," << (pe.realized[k] ? 1 : 0)
        << "," << fmt(pe.candidates.b[k]);
    for (int i = 0; i < pe.candidates.dim(); ++i)
      csv << "," << fmt(pe.candidates.a(k, i));
    csv << "\n";
  }
  json eff{{"model", model_path}, {"samples", samples}, {"out", out}};
  write_run_manifest(g, out, "maxaffine enumerate", eff, {out},
                     now_seconds() - t0);
  std::cout << "wrote " << out << " (" << pe.candidates.n_pieces()
            << " candidate pieces)\n";
}

void cmd_maxaffine_fit(Globals& g, const std::string& data_path, int pieces,
                       std::string out) {
  const double t0 = now_seconds();
  if (out.empty()) out = g.out_dir + "/maxaffine.json";
  // Generic CSV: feature columns followed by one target column.
  const auto rows = load_numeric_csv(data_path);
  if (rows.empty() || rows[0].size() < 2)
    throw std::runtime_error("fit data needs >= 1 feature column + target");
  const int d = static_cast<int>(rows[0].size()) - 1;
  Eigen::MatrixXd X(rows.size(), d);
  Eigen::VectorXd y(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) != d + 1)
      throw std::runtime_error("ragged rows in " + data_path);
    for (int c = 0; c < d; ++c) X(r, c) = rows[r][c];
    y[r] = rows[r][d];
  }
  const vreg::MaxAffine f = vreg::fit_max_affine(X, y, pieces, g.seed);
  write_file(out, vreg::max_affine_to_json(f) + "\n");
  json eff{{"data", data_path}, {"pieces", pieces}, {"out", out}};
  write_run_manifest(g, out, "maxaffine fit", eff, {out}, now_seconds() - t0);
  std::cout << "fit MSE " << fmt(vreg::max_affine_mse(f, X, y)) << "\nwrote "
            << out << "\n";
}

void cmd_eval(const std::string& pred_path, const std::string& target_path) {
  const auto pred = load_numeric_csv(pred_path);
  const auto target = load_numeric_csv(target_path);
  if (pred.size() != target.size())
    throw std::runtime_error("row count mismatch between files");
  double acc = 0.0;
  long count = 0;
  for (size_t r = 0; r < pred.size(); ++r) {
    if (pred[r].size() != target[r].size())
      throw std::runtime_error("column count mismatch at row " +
                               std::to_string(r));
    for (size_t c = 0; c < pred[r].size(); ++c) {
      acc += std::abs(pred[r][c] - target[r][c]);
      ++count;
    }
  }
  if (count == 0) throw std::runtime_error("no numeric cells to compare");
  std::cout << "MAE " << fmt(acc / double(count)) << "\n";
}

void cmd_repro(Globals& g, vreg::ReproConfig cfg) {
  cfg.seed = g.seed;
  cfg.out_dir = g.out_dir;
  const vreg::ReproSummary summary = vreg::run_repro(cfg);
  std::cout << vreg::summary_to_csv(summary, false);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Voltage regulation via input-convex surrogates: dataset generation, "
      "training, centralized and distributed regulation, baselines."};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Random seed (default 7)");
  app.add_option("--threads", g.threads,
                 "Worker-thread cap (current pipelines are serial)")
      ->check(CLI::PositiveNumber);
  app.add_option("--config", g.config_path,
                 "JSON config file; CLI flags take precedence")
      ->check(CLI::ExistingFile);
  app.add_option("--out-dir", g.out_dir,
                 "Directory for outputs whose paths are not given explicitly");

  // gen-network
  auto* gn = app.add_subcommand("gen-network",
                                "Write a feeder description as JSON");
  bool gn_random = false;
  int gn_buses = 13;
  std::string gn_out;
  gn->add_flag("--random", gn_random,
               "Random tree (default: fixed 13-bus feeder)");
  gn->add_option("--buses", gn_buses, "Bus count for --random")
      ->check(CLI::Range(2, 10000));
  gn->add_option("--out", gn_out, "Output path (default <out-dir>/network.json)");
  gn->callback([&] {
    g.load_config();
    g.apply(&app, "--seed", "seed", g.seed);
    g.apply(&app, "--out-dir", "out_dir", g.out_dir);
    g.apply(gn, "--buses", "buses", gn_buses);
    cmd_gen_network(g, gn_random, gn_buses, gn_out);
  });

  // gen-data
  auto* gd = app.add_subcommand("gen-data",
                                "Sample injections and exact power flows");
  std::string gd_net, gd_out;
  int gd_samples = 10000;
  gd->add_option("--net", gd_net, "Network JSON")->required()
      ->check(CLI::ExistingFile);
  gd->add_option("--samples", gd_samples, "Number of rows")
      ->check(CLI::PositiveNumber);
  gd->add_option("--out", gd_out, "Output CSV (default <out-dir>/data.csv)");
  gd->callback([&] {
    g.load_config();
    g.apply(&app, "--seed", "seed", g.seed);
    g.apply(&app, "--out-dir", "out_dir", g.out_dir);
    g.apply(gd, "--samples", "samples", gd_samples);
    cmd_gen_data(g, gd_net, gd_samples, gd_out);
  });

  // train
  auto* tr = app.add_subcommand("train",
                                "Fit the input-convex surrogate to a dataset");
  std::string tr_data, tr_net, tr_out;
  int tr_iters = 20000, tr_batch = 64, tr_hidden = 2, tr_width = 6;
  double tr_lr = 0.5;
  bool tr_no_project = false;
  tr->add_option("--data", tr_data, "Training CSV")->required()
      ->check(CLI::ExistingFile);
  tr->add_option("--net", tr_net, "Network JSON (bus-count cross-check)")
      ->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "Model JSON (default <out-dir>/icnn.json)");
  tr->add_option("--iters", tr_iters, "SGD iterations")
      ->check(CLI::PositiveNumber);
  tr->add_option("--lr", tr_lr, "Learning rate")->check(CLI::PositiveNumber);
  tr->add_option("--batch", tr_batch, "Batch size")
      ->check(CLI::PositiveNumber);
  tr->add_option("--hidden", tr_hidden, "Hidden layers")
      ->check(CLI::PositiveNumber);
  tr->add_option("--width", tr_width, "Hidden width as a multiple of buses")
      ->check(CLI::PositiveNumber);
  tr->add_flag("--no-project", tr_no_project,
               "Skip the nonnegative-weight projection (diagnostics only)");
  tr->callback([&] {
    g.load_config();
    g.apply(&app, "--seed", "seed", g.seed);
    g.apply(&app, "--out-dir", "out_dir", g.out_dir);
    g.apply(tr, "--iters", "iters", tr_iters);
    g.apply(tr, "--lr", "lr", tr_lr);
    g.apply(tr, "--batch", "batch", tr_batch);
    g.apply(tr, "--hidden", "hidden", tr_hidden);
    g.apply(tr, "--width", "width", tr_width);
    cmd_train(g, tr_data, tr_net, tr_out, tr_iters, tr_lr, tr_batch,
              tr_hidden, tr_width, tr_no_project);
  });

  // regulate
  auto* rg = app.add_subcommand(
      "regulate", "Optimize reactive injections against the surrogate");
  std::string rg_model, rg_net, rg_inst, rg_out;
  double rg_qmax = 0.1;
  rg->add_option("--model", rg_model, "Surrogate model JSON")->required()
      ->check(CLI::ExistingFile);
  rg->add_option("--net", rg_net, "Network JSON")->required()
      ->check(CLI::ExistingFile);
  rg->add_option("--instances", rg_inst, "Instances CSV (dataset format)")
      ->required()->check(CLI::ExistingFile);
  rg->add_option("--qmax", rg_qmax, "Reactive half-range around nominal")
      ->check(CLI::PositiveNumber);
  rg->add_option("--out", rg_out, "Output CSV (default <out-dir>/regulate.csv)");
  rg->callback([&] {
    g.load_config();
    g.apply(&app, "--out-dir", "out_dir", g.out_dir);
    g.apply(rg, "--qmax", "qmax", rg_qmax);
    cmd_regulate(g, rg_model, rg_net, rg_inst, rg_qmax, rg_out);
  });

  // distributed
  auto* ds = app.add_subcommand(
      "distributed", "Dual-decomposition consensus run on one instance");
  std::string ds_model, ds_net, ds_graph, ds_inst, ds_out;
  int ds_instance = 0, ds_rounds = 200;
  double ds_qmax = 0.1, ds_delta = 1e-3;
  ds->add_option("--model", ds_model, "Surrogate model JSON")->required()
      ->check(CLI::ExistingFile);
  ds->add_option("--net", ds_net, "Network JSON")->required()
      ->check(CLI::ExistingFile);
  ds->add_option("--graph", ds_graph,
                 "Communication graph JSON (default: feeder tree)")
      ->check(CLI::ExistingFile);
  ds->add_option("--instances", ds_inst, "Instances CSV (dataset format)")
      ->required()->check(CLI::ExistingFile);
  ds->add_option("--instance", ds_instance, "Row index to solve");
  ds->add_option("--qmax", ds_qmax, "Reactive half-range around nominal")
      ->check(CLI::PositiveNumber);
  ds->add_option("--delta", ds_delta, "Consensus gap tolerance")
      ->check(CLI::PositiveNumber);
  ds->add_option("--rounds", ds_rounds, "Maximum rounds")
      ->check(CLI::PositiveNumber);
  ds->add_option("--out", ds_out,
                 "Per-round CSV (default <out-dir>/distributed.csv)");
  ds->callback([&] {
    g.load_config();
    g.apply(&app, "--out-dir", "out_dir", g.out_dir);
    g.apply(ds, "--qmax", "qmax", ds_qmax);
    g.apply(ds, "--delta", "delta", ds_delta);
    g.apply(ds, "--rounds", "rounds", ds_rounds);
    cmd_distributed(g, ds_model, ds_net, ds_graph, ds_inst, ds_instance,
                    ds_qmax, ds_delta, ds_rounds, ds_out);
  });

  // baseline
  auto* bl = app.add_subcommand("baseline",
                                "Linear surrogate and brute-force references");
  bl->require_subcommand(1);

  auto* blf = bl->add_subcommand("linear-fit", "Least-squares linear surrogate");
  std::string blf_data, blf_out;
  blf->add_option("--data", blf_data, "Training CSV")->required()
      ->check(CLI::ExistingFile);
  blf->add_option("--out", blf_out,
                  "Model JSON (default <out-dir>/linear.json)");
  blf->callback([&] {
    g.load_config();
    g.apply(&app, "--out-dir", "out_dir", g.out_dir);
    cmd_baseline_linear_fit(g, blf_data, blf_out);
  });

  auto* blr = bl->add_subcommand("linear-regulate",
                                 "Regulate against the linear surrogate");
  std::string blr_model, blr_net, blr_inst, blr_out;
  double blr_qmax = 0.1;
  blr->add_option("--model", blr_model, "Linear model JSON")->required()
      ->check(CLI::ExistingFile);
  blr->add_option("--net", blr_net, "Network JSON")->required()
      ->check(CLI::ExistingFile);
  blr->add_option("--instances", blr_inst, "Instances CSV")->required()
      ->check(CLI::ExistingFile);
  blr->add_option("--qmax", blr_qmax, "Reactive half-range around nominal")
      ->check(CLI::PositiveNumber);
  blr->add_option("--out", blr_out,
                  "Output CSV (default <out-dir>/linear_regulate.csv)");
  blr->callback([&] {
    g.load_config();
    g.apply(&app, "--out-dir", "out_dir", g.out_dir);
    g.apply(blr, "--qmax", "qmax", blr_qmax);
    cmd_baseline_linear_regulate(g, blr_model, blr_net, blr_inst, blr_qmax,
                                 blr_out);
  });

  auto* blo = bl->add_subcommand(
      "oracle", "Exhaustive grid search with exact power flow");
  std::string blo_net, blo_inst, blo_out;
  double blo_qmax = 0.1;
  int blo_grid = 21;
  blo->add_option("--net", blo_net, "Network JSON")->required()
      ->check(CLI::ExistingFile);
  blo->add_option("--instances", blo_inst, "Instances CSV")->required()
      ->check(CLI::ExistingFile);
  blo->add_option("--qmax", blo_qmax, "Reactive half-range around nominal")
      ->check(CLI::PositiveNumber);
  blo->add_option("--grid-points", blo_grid, "Grid points per free coordinate")
      ->check(CLI::Range(2, 100000));
  blo->add_option("--out", blo_out,
                  "Output CSV (default <out-dir>/oracle.csv)");
  blo->callback([&] {
    g.load_config();
    g.apply(&app, "--out-dir", "out_dir", g.out_dir);
    g.apply(blo, "--qmax", "qmax", blo_qmax);
    g.apply(blo, "--grid-points", "grid_points", blo_grid);
    cmd_baseline_oracle(g, blo_net, blo_inst, blo_qmax, blo_grid, blo_out);
  });

  // maxaffine
  auto* ma = app.add_subcommand("maxaffine",
                                "Max-affine function tools");
  ma->require_subcommand(1);

  auto* mac = ma->add_subcommand(
      "convert", "Max-affine JSON -> equivalent deep network");
  std::string mac_in, mac_out;
  mac->add_option("--in", mac_in, "Max-affine JSON {\"pieces\": [...]}")
      ->required()->check(CLI::ExistingFile);
  mac->add_option("--out", mac_out,
                  "Model JSON (default <out-dir>/maxaffine_icnn.json)");
  mac->callback([&] {
    g.load_config();
    g.apply(&app, "--out-dir", "out_dir", g.out_dir);
    cmd_maxaffine_convert(g, mac_in, mac_out);
  });

  auto* mae = ma->add_subcommand(
      "enumerate", "Candidate affine pieces of a shallow network");
  std::string mae_model, mae_out;
  int mae_samples = 100000;
  mae->add_option("--model", mae_model, "Model JSON")->required()
      ->check(CLI::ExistingFile);
  mae->add_option("--samples", mae_samples,
                  "Sample points for realized-pattern classification")
      ->check(CLI::PositiveNumber);
  mae->add_option("--out", mae_out,
                  "Output CSV (default <out-dir>/pieces.csv)");
  mae->callback([&] {
    g.load_config();
    g.apply(&app, "--out-dir", "out_dir", g.out_dir);
    g.apply(mae, "--samples", "samples", mae_samples);
    cmd_maxaffine_enumerate(g, mae_model, mae_samples, mae_out);
  });

  auto* maf = ma->add_subcommand(
      "fit", "Least-squares partition refit of a max-affine function");
  std::string maf_data, maf_out;
  int maf_pieces = 4;
  maf->add_option("--data", maf_data,
                  "CSV: feature columns then one target column")
      ->required()->check(CLI::ExistingFile);
  maf->add_option("--pieces", maf_pieces, "Number of affine pieces")
      ->check(CLI::PositiveNumber);
  maf->add_option("--out", maf_out,
                  "Output JSON (default <out-dir>/maxaffine.json)");
  maf->callback([&] {
    g.load_config();
    g.apply(&app, "--seed", "seed", g.seed);
    g.apply(&app, "--out-dir", "out_dir", g.out_dir);
    g.apply(maf, "--pieces", "pieces", maf_pieces);
    cmd_maxaffine_fit(g, maf_data, maf_pieces, maf_out);
  });

  // eval
  auto* ev = app.add_subcommand(
      "eval", "Mean absolute difference between two numeric CSV files");
  std::string ev_pred, ev_target;
  ev->add_option("--pred", ev_pred, "Prediction CSV")->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--target", ev_target, "Target CSV")->required()
      ->check(CLI::ExistingFile);
  ev->callback([&] { cmd_eval(ev_pred, ev_target); });

  // repro
  auto* rp = app.add_subcommand(
      "repro", "Full pipeline on the 13-bus feeder; summary CSV to stdout");
  vreg::ReproConfig rp_cfg;
  rp->add_option("--samples", rp_cfg.n_samples, "Dataset rows")
      ->check(CLI::PositiveNumber);
  rp->add_option("--train-rows", rp_cfg.n_train, "Training rows")
      ->check(CLI::PositiveNumber);
  rp->add_option("--test-rows", rp_cfg.n_test, "Held-out regulation rows")
      ->check(CLI::PositiveNumber);
  rp->add_option("--iters", rp_cfg.train_iters, "SGD iterations")
      ->check(CLI::PositiveNumber);
  rp->add_option("--lr", rp_cfg.learning_rate, "Learning rate")
      ->check(CLI::PositiveNumber);
  rp->add_option("--batch", rp_cfg.batch_size, "Batch size")
      ->check(CLI::PositiveNumber);
  rp->add_option("--qmax", rp_cfg.qmax, "Reactive half-range around nominal")
      ->check(CLI::PositiveNumber);
  rp->add_option("--distributed-instances", rp_cfg.distributed_instances,
                 "Instances given to the distributed demo");
  rp->callback([&] {
    g.load_config();
    g.apply(&app, "--seed", "seed", g.seed);
    g.apply(&app, "--out-dir", "out_dir", g.out_dir);
    g.apply(rp, "--samples", "samples", rp_cfg.n_samples);
    g.apply(rp, "--train-rows", "train_rows", rp_cfg.n_train);
    g.apply(rp, "--test-rows", "test_rows", rp_cfg.n_test);
    g.apply(rp, "--iters", "iters", rp_cfg.train_iters);
    g.apply(rp, "--lr", "lr", rp_cfg.learning_rate);
    g.apply(rp, "--batch", "batch", rp_cfg.batch_size);
    g.apply(rp, "--qmax", "qmax", rp_cfg.qmax);
    cmd_repro(g, rp_cfg);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2, --help exits 0
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
