#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "periodavg/model.hpp"
#include "periodavg/numkit.hpp"

namespace pavg {

enum class TaskKind { kRegression, kClassification };

/// An immutable table of samples.
struct Dataset {
  Batch table;
  TaskKind task = TaskKind::kRegression;
  std::size_t num_classes = 0;  // classification only
  /// Ground-truth weights for linreg_gaussian datasets.
  std::optional<ParamVector> true_weights;

  std::size_t size() const noexcept { return table.rows(); }
  std::size_t input_dim() const noexcept { return table.input_dim; }
};

enum class SyntheticKind { kLinregGaussian, kTwoGaussians, kRingClasses };

std::string to_string(SyntheticKind kind);
SyntheticKind synthetic_kind_from_string(const std::string& name);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kLinregGaussian;
  std::size_t n_samples = 0;
  std::size_t input_dim = 1;
  double noise = 0.0;
  std::uint64_t seed = 0;
  /// Ring count for ring_classes; ignored otherwise.
  std::size_t num_classes = 3;
};

/// Deterministic synthetic datasets.
///
/// - linreg_gaussian: x ~ N(0, I), w* ~ N(0, I), y = x.w* + noise * N(0, 1).
/// - two_gaussians: balanced labels; class c has mean (+3, 0, ...) for c = 1
///   and (-3, 0, ...) for c = 0, isotropic std `noise`.
/// - ring_classes: class c lies on a circle of radius c + 1 in the first two
///   coordinates (uniform angle) with isotropic `noise` on every coordinate.
Dataset gen_synthetic(const SyntheticSpec& spec);

struct CsvSchema {
  std::string target_column;
  TaskKind task = TaskKind::kRegression;
};

/// Reads a numeric CSV with a header row. For classification the number of
/// classes is one more than the largest label.
Dataset load_csv(const std::string& path, const CsvSchema& schema);

/// Epoch-wise random reshuffling sampler with drop-last semantics.
class Sampler {
 public:
  Sampler(std::size_t dataset_size, RngStream rng);

  /// Returns `n_workers` disjoint batches of `m` rows each. Starts a new
  /// epoch (fresh permutation) when fewer than n_workers*m rows remain.
  std::vector<Batch> next_global_batch(const Dataset& dataset, std::size_t n_workers, std::size_t m);

  /// Same draw as next_global_batch, returning row indices only.
  std::vector<std::vector<std::size_t>> next_global_indices(std::size_t n_workers, std::size_t m);

  const std::vector<std::size_t>& permutation() const noexcept { return permutation_; }
  std::size_t cursor() const noexcept { return cursor_; }
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  void reshuffle();

  std::vector<std::size_t> permutation_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
  RngStream rng_;
};

/// Copies the given rows into a batch.
Batch gather_rows(const Dataset& dataset, const std::vector<std::size_t>& rows);

}  // namespace pavg
