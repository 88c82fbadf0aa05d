#pragma once

#include "vreg/grid.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace vreg {

struct TooManyRejections : std::runtime_error {
  explicit TooManyRejections(const std::string& what)
      : std::runtime_error(what) {}
};

/// Rows of (p, q, |V - V0|) samples in per-unit; one row per instance,
/// columns [p_1..p_N, q_1..q_N, dv_1..dv_N].
struct Dataset {
  int n_buses = 0;
  Eigen::MatrixXd rows;

  int n_samples() const { return static_cast<int>(rows.rows()); }
  auto p() const { return rows.middleCols(0, n_buses); }
  auto q() const { return rows.middleCols(n_buses, n_buses); }
  auto dv() const { return rows.middleCols(2 * n_buses, n_buses); }
};

/// Synthetic load profile: per-bus base loads drawn once per network, then a
/// per-sample multiplicative daily-shape factor (sinusoid plus uniform noise).
/// With shape_amplitude > 1 the factor crosses zero, so net injections flip
/// sign (solar export hours) and |V - V0| picks up a kink that a purely
/// linear surrogate cannot represent.
struct LoadProfileConfig {
  double base_p_min = -0.05;  // p.u. active, loads are negative
  double base_p_max = -0.01;
  double power_factor = 0.9;
  double shape_amplitude = 1.2;  // sinusoid amplitude of the daily factor
  double shape_noise = 0.15;     // half-width of the uniform noise term
  /// Independent per-bus reactive jitter (half-width, p.u.) decorrelating q
  /// from p; without it the samples lie on a line and surrogates never see
  /// the reactive actuation range they are later optimized over.
  double q_jitter = 0.1;
};

/// Draws n_samples injections from the profile, solves exact power flow for
/// each, and records (p, q, |V - V0|) with V0 = slack_voltage at every bus.
/// Non-converged or collapsing draws are discarded and redrawn; throws
/// TooManyRejections once rejections exceed the accepted count target.
Dataset generate_dataset(const Network& net, const LoadProfileConfig& profile,
                         int n_samples, std::uint64_t seed,
                         int* n_rejected = nullptr);

void save_dataset_csv(const Dataset& data, const std::string& path);
Dataset load_dataset_csv(const std::string& path);

}  // namespace vreg
