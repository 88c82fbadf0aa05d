#pragma once

#include "vreg/icnn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vreg {

struct TooManyUnits : std::runtime_error {
  explicit TooManyUnits(const std::string& what) : std::runtime_error(what) {}
};
struct DegeneratePartition : std::runtime_error {
  explicit DegeneratePartition(const std::string& what)
      : std::runtime_error(what) {}
};

/// f(x) = max_k (a_k . x + b_k); rows of a are the pieces.
struct MaxAffine {
  Eigen::MatrixXd a;  // K x d
  Eigen::VectorXd b;  // K

  int n_pieces() const { return static_cast<int>(a.rows()); }
  int dim() const { return static_cast<int>(a.cols()); }
};

double eval_max_affine(const MaxAffine& f, const Eigen::VectorXd& x);

/// Nested-maximum construction: a max of K affine pieces becomes a K-layer
/// network with a single ReLU unit per hidden layer, every signed inner
/// product rewritten with nonnegative coefficients over [x; -x].
IcnnModel icnn_from_max_affine(const MaxAffine& f);

struct PieceEnumeration {
  MaxAffine candidates;                 // 2^K sign-pattern pieces
  std::vector<std::uint32_t> patterns;  // bitmask of active units per piece
  std::vector<bool> realized;           // pattern seen at some sampled point
};

/// Enumerates all 2^K candidate affine pieces of a one-hidden-layer ReLU
/// ICNN with zero passthrough, and classifies which activation patterns are
/// realized by sampling n_samples quasi-random points in [-1, 1]^d.
PieceEnumeration enumerate_pieces(const IcnnModel& model,
                                  int n_samples = 100000);

/// Activation bitmask of the hidden layer at x (bit i set when unit i is on).
std::uint32_t activation_pattern(const IcnnModel& model,
                                 const Eigen::VectorXd& x);

/// Least-squares partition-refit alternation (assign to argmax piece, refit
/// each piece on its samples) seeded by k-means++ on the inputs.
MaxAffine fit_max_affine(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         int K, std::uint64_t seed);

double max_affine_mse(const MaxAffine& f, const Eigen::MatrixXd& X,
                      const Eigen::VectorXd& y);

std::string max_affine_to_json(const MaxAffine& f);
MaxAffine max_affine_from_json(const std::string& text);

}  // namespace vreg
