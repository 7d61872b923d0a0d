#include "periodavg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "periodavg/errors.hpp"

namespace pavg {

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::kLinregGaussian: return "linreg_gaussian";
    case SyntheticKind::kTwoGaussians: return "two_gaussians";
    case SyntheticKind::kRingClasses: return "ring_classes";
  }
  return "unknown";
}

SyntheticKind synthetic_kind_from_string(const std::string& name) {
  if (name == "linreg_gaussian") return SyntheticKind::kLinregGaussian;
  if (name == "two_gaussians") return SyntheticKind::kTwoGaussians;
  if (name == "ring_classes") return SyntheticKind::kRingClasses;
  throw UsageError("unsupported synthetic dataset kind '" + name + "'");
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n_samples == 0) throw UsageError("gen_synthetic: n_samples must be >= 1");
  if (spec.input_dim == 0) throw UsageError("gen_synthetic: input_dim must be >= 1");
  if (!(spec.noise >= 0.0)) throw UsageError("gen_synthetic: noise must be >= 0");

  // Stream 0 draws features, stream 1 draws model/labels.
  RngStream feature_rng(spec.seed, 0);
  RngStream aux_rng(spec.seed, 1);

  Dataset ds;
  ds.table.input_dim = spec.input_dim;
  ds.table.features.reserve(spec.n_samples * spec.input_dim);
  ds.table.targets.reserve(spec.n_samples);
  std::vector<double> x(spec.input_dim);

  switch (spec.kind) {
    case SyntheticKind::kLinregGaussian: {
      ParamVector w_star(spec.input_dim);
      for (double& v : w_star) v = aux_rng.normal();
      for (std::size_t r = 0; r < spec.n_samples; ++r) {
        double y = 0.0;
        for (std::size_t j = 0; j < spec.input_dim; ++j) {
          x[j] = feature_rng.normal();
          y += x[j] * w_star[j];
        }
        if (spec.noise > 0.0) y += spec.noise * aux_rng.normal();
        ds.table.append_row(x, y);
      }
      ds.task = TaskKind::kRegression;
      ds.true_weights = std::move(w_star);
      break;
    }
    case SyntheticKind::kTwoGaussians: {
      for (std::size_t r = 0; r < spec.n_samples; ++r) {
        const std::size_t label = r % 2;
        for (std::size_t j = 0; j < spec.input_dim; ++j) x[j] = spec.noise * feature_rng.normal();
        x[0] += label == 1 ? 3.0 : -3.0;
        ds.table.append_row(x, static_cast<double>(label));
      }
      ds.task = TaskKind::kClassification;
      ds.num_classes = 2;
      break;
    }
    case SyntheticKind::kRingClasses: {
      if (spec.input_dim < 2) throw UsageError("ring_classes needs input_dim >= 2");
      if (spec.num_classes < 2) throw UsageError("ring_classes needs at least 2 classes");
      for (std::size_t r = 0; r < spec.n_samples; ++r) {
        const std::size_t label = r % spec.num_classes;
        for (std::size_t j = 0; j < spec.input_dim; ++j) x[j] = spec.noise * feature_rng.normal();
        const double angle = 2.0 * std::numbers::pi * aux_rng.uniform();
        const double radius = static_cast<double>(label + 1);
        x[0] += radius * std::cos(angle);
        x[1] += radius * std::sin(angle);
        ds.table.append_row(x, static_cast<double>(label));
      }
      ds.task = TaskKind::kClassification;
      ds.num_classes = spec.num_classes;
      break;
    }
  }
  return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": missing header row");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& name : header) name = trim(name);
  if (!header.empty() && header.front().rfind("\xEF\xBB\xBF", 0) == 0) header.front().erase(0, 3);

  const auto target_it = std::find(header.begin(), header.end(), schema.target_column);
  if (target_it == header.end()) {
    throw FormatError(path + ": target column '" + schema.target_column + "' not in header");
  }
  const std::size_t target_col = static_cast<std::size_t>(target_it - header.begin());

  Dataset ds;
  ds.task = schema.task;
  ds.table.input_dim = header.size() - 1;
  std::vector<double> x(ds.table.input_dim);
  std::size_t row_number = 1;  // header is row 1
  double max_label = -1.0;

  while (std::getline(in, line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw IoError(path + ": row " + std::to_string(row_number) + " has " + std::to_string(cells.size()) +
                    " cells, expected " + std::to_string(header.size()));
    }
    double target = 0.0;
    std::size_t feature = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
        throw FormatError(path + ": row " + std::to_string(row_number) + ", column '" + header[c] +
                          "': not a finite number ('" + cell + "')");
      }
      if (c == target_col) {
        target = value;
      } else {
        x[feature++] = value;
      }
    }
    if (schema.task == TaskKind::kClassification) {
      if (target < 0.0 || target != std::floor(target)) {
        throw FormatError(path + ": row " + std::to_string(row_number) + ": class label must be a non-negative integer");
      }
      max_label = std::max(max_label, target);
    }
    ds.table.append_row(x, target);
  }

  if (ds.size() == 0) throw FormatError(path + ": no data rows");
  if (schema.task == TaskKind::kClassification) ds.num_classes = static_cast<std::size_t>(max_label) + 1;
  return ds;
}

Sampler::Sampler(std::size_t dataset_size, RngStream rng) : permutation_(dataset_size), rng_(std::move(rng)) {
  if (dataset_size == 0) throw UsageError("sampler over an empty dataset");
  std::iota(permutation_.begin(), permutation_.end(), std::size_t{0});
  shuffle(permutation_, rng_);
}

void Sampler::reshuffle() {
  shuffle(permutation_, rng_);
  cursor_ = 0;
  ++epoch_;
}

std::vector<std::vector<std::size_t>> Sampler::next_global_indices(std::size_t n_workers, std::size_t m) {
  const std::size_t global = n_workers * m;
  if (n_workers == 0 || m == 0) throw UsageError("next_global_batch: n_workers and m must be positive");
  if (global > permutation_.size()) {
    throw UsageError("next_global_batch: n_workers*m = " + std::to_string(global) + " exceeds dataset size " +
                     std::to_string(permutation_.size()));
  }
  if (permutation_.size() - cursor_ < global) reshuffle();

  std::vector<std::vector<std::size_t>> out(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) {
    out[w].assign(permutation_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                  permutation_.begin() + static_cast<std::ptrdiff_t>(cursor_ + m));
    cursor_ += m;
  }
  return out;
}

std::vector<Batch> Sampler::next_global_batch(const Dataset& dataset, std::size_t n_workers, std::size_t m) {
  if (dataset.size() != permutation_.size()) throw UsageError("sampler was built for a different dataset size");
  const auto indices = next_global_indices(n_workers, m);
  std::vector<Batch> batches;
  batches.reserve(n_workers);
  for (const auto& rows : indices) batches.push_back(gather_rows(dataset, rows));
  return batches;
}

Batch gather_rows(const Dataset& dataset, const std::vector<std::size_t>& rows) {
  Batch b;
  b.input_dim = dataset.input_dim();
  b.features.reserve(rows.size() * b.input_dim);
  b.targets.reserve(rows.size());
  for (std::size_t r : rows) b.append_row(dataset.table.row(r), dataset.table.targets[r]);
  return b;
}

}  // namespace pavg
