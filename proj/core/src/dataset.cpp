#include "vreg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace vreg {

Dataset generate_dataset(const Network& net, const LoadProfileConfig& profile,
                         int n_samples, std::uint64_t seed, int* n_rejected) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  net.validate();
  const int n = net.n_buses;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Base loads, drawn once per network. Reactive follows the power factor.
  Eigen::VectorXd p_base = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd q_base = Eigen::VectorXd::Zero(n);
  const double tan_phi =
      std::tan(std::acos(std::clamp(profile.power_factor, 0.0, 1.0)));
  for (int i = 1; i < n; ++i) {
    p_base[i] = profile.base_p_min +
                (profile.base_p_max - profile.base_p_min) * unif(rng);
    q_base[i] = p_base[i] * tan_phi;
  }

  Dataset data;
  data.n_buses = n;
  data.rows.resize(n_samples, 3 * n);

  int accepted = 0, rejected = 0;
  while (accepted < n_samples) {
    const double tau = unif(rng);
    const double noise = (2.0 * unif(rng) - 1.0) * profile.shape_noise;
    const double shape =
        1.0 + profile.shape_amplitude * std::sin(2.0 * std::numbers::pi * tau) +
        noise;
    Injection inj{p_base * shape, q_base * shape};
    for (int i = 1; i < n; ++i)
      inj.q[i] += (2.0 * unif(rng) - 1.0) * profile.q_jitter;

    bool ok = true;
    PowerFlowSolution sol;
    try {
      sol = solve_power_flow(net, inj);
      ok = sol.converged;
    } catch (const VoltageCollapse&) {
      ok = false;
    }
    if (!ok) {
      if (++rejected > n_samples)
        throw TooManyRejections("more than half of the draws failed power flow");
      continue;
    }
    data.rows.block(accepted, 0, 1, n) = inj.p.transpose();
    data.rows.block(accepted, n, 1, n) = inj.q.transpose();
    data.rows.block(accepted, 2 * n, 1, n) =
        (sol.v.array() - net.slack_voltage).abs().matrix().transpose();
    ++accepted;
  }
  if (n_rejected) *n_rejected = rejected;
  return data;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  const int n = data.n_buses;
  for (int g = 0; g < 3; ++g) {
    const char* name = g == 0 ? "p" : (g == 1 ? "q" : "dv");
    for (int i = 1; i <= n; ++i)
      out << (g == 0 && i == 1 ? "" : ",") << name << "_" << i;
  }
  out << "\n";
  for (int s = 0; s < data.n_samples(); ++s) {
    for (int c = 0; c < 3 * n; ++c)
      out << (c == 0 ? "" : ",") << format_double(data.rows(s, c));
    out << "\n";
  }
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error("empty dataset file " + path);
  const int n_cols =
      static_cast<int>(std::count(header.begin(), header.end(), ',')) + 1;
  if (n_cols % 3 != 0)
    throw std::runtime_error("dataset column count must be divisible by 3");

  std::vector<double> values;
  std::string row;
  int n_rows = 0;
  while (std::getline(in, row)) {
    if (row.empty()) continue;
    std::stringstream ss(row);
    std::string cell;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
    ++n_rows;
  }
  Dataset data;
  data.n_buses = n_cols / 3;
  data.rows.resize(n_rows, n_cols);
  for (int s = 0; s < n_rows; ++s)
    for (int c = 0; c < n_cols; ++c)
      data.rows(s, c) = values[static_cast<size_t>(s) * n_cols + c];
  return data;
}

}  // namespace vreg
