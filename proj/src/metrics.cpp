#include "periodavg/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "periodavg/errors.hpp"

namespace pavg {

const std::vector<std::string>& metrics_csv_header() {
  static const std::vector<std::string> header = {
      "k",      "epoch",          "lr",        "train_loss",            "eval_accuracy", "var_wk",
      "s_k",    "period",         "sync_count_cum", "bytes_cum", "comm_time_modeled_cum", "grad_sq_norm"};
  return header;
}

void validate(const CostModel& model) {
  if (model.n < 1) throw ConfigError("cost model node count must be >= 1");
  if (!(model.bandwidth_bytes_per_s > 0.0)) throw ConfigError("bandwidth_bytes_per_s must be > 0");
  if (!(model.latency_s >= 0.0)) throw ConfigError("latency_s must be >= 0");
  if (model.bytes_per_scalar == 0) throw ConfigError("bytes_per_scalar must be > 0");
}

double allreduce_time(const CostModel& model, std::size_t payload_bytes) {
  if (model.n <= 1) return 0.0;
  const double n = model.n;
  return 2.0 * (n - 1.0) * model.latency_s +
         2.0 * ((n - 1.0) / n) * static_cast<double>(payload_bytes) / model.bandwidth_bytes_per_s;
}

void CommAccount::record(const SyncEvent& event) {
  ++sync_count_;
  bytes_ += static_cast<long>(event.bytes_per_worker);
  ++payload_counts_[event.payload_bytes];
  if (event.scalar_allreduce) ++scalar_count_;
}

double CommAccount::modeled_time(const CostModel& model) const {
  double total = 0.0;
  for (const auto& [payload, count] : payload_counts_) {
    total += static_cast<double>(count) * allreduce_time(model, payload);
  }
  if (scalar_count_ > 0) total += static_cast<double>(scalar_count_) * allreduce_time(model, model.bytes_per_scalar);
  return total;
}

double variance_of_workers(std::span<const ParamVector* const> workers) { return compute_sk(workers); }
double variance_of_workers(std::span<const ParamVector> workers) { return compute_sk(workers); }

std::vector<VtPoint> vt_series(std::span<const MetricsRecord> records, std::span<const long> sync_iterations) {
  std::vector<VtPoint> out;
  std::size_t cursor = 0;
  for (long sync_k : sync_iterations) {
    double acc = 0.0;
    std::size_t count = 0;
    while (cursor < records.size() && records[cursor].k <= sync_k) {
      acc += records[cursor].var_wk;
      ++count;
      ++cursor;
    }
    if (count == 0) continue;
    out.push_back(VtPoint{out.size(), sync_k, acc / static_cast<double>(count)});
  }
  return out;
}

double weighted_grad_norm_metric(std::span<const double> lrs, std::span<const double> grad_sq_norms) {
  if (lrs.size() != grad_sq_norms.size()) throw DimensionError("weighted_grad_norm_metric: series not aligned");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < lrs.size(); ++i) {
    if (std::isnan(grad_sq_norms[i])) continue;
    num += lrs[i] * grad_sq_norms[i];
    den += lrs[i];
  }
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return num / den;
}

double weighted_grad_norm_metric(std::span<const MetricsRecord> records) {
  std::vector<double> lrs;
  std::vector<double> norms;
  lrs.reserve(records.size());
  norms.reserve(records.size());
  for (const auto& r : records) {
    lrs.push_back(r.lr);
    norms.push_back(r.grad_sq_norm);
  }
  return weighted_grad_norm_metric(lrs, norms);
}

std::string format_real(double value) {
  if (std::isnan(value)) return {};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_metrics_csv(std::span<const MetricsRecord> records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const auto& header = metrics_csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : records) {
    out << r.k << ',' << r.epoch << ',' << format_real(r.lr) << ',' << format_real(r.train_loss) << ','
        << format_real(r.eval_accuracy) << ',' << format_real(r.var_wk) << ',' << format_real(r.s_k) << ','
        << r.period << ',' << r.sync_count_cum << ',' << r.bytes_cum << ',' << format_real(r.comm_time_modeled_cum)
        << ',' << format_real(r.grad_sq_norm) << '\n';
  }
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

namespace {

double parse_real(const std::string& cell, const std::string& path, std::size_t row) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw FormatError(path + ": row " + std::to_string(row) + ": bad number '" + cell + "'");
  }
  return value;
}

long parse_int(const std::string& cell, const std::string& path, std::size_t row) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw FormatError(path + ": row " + std::to_string(row) + ": bad integer '" + cell + "'");
  }
  return value;
}

}  // namespace

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": missing header");
  std::string expected;
  for (const auto& name : metrics_csv_header()) expected += (expected.empty() ? "" : ",") + name;
  if (line != expected) throw FormatError(path + ": unexpected metrics header");

  std::vector<MetricsRecord> records;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != metrics_csv_header().size()) {
      throw FormatError(path + ": row " + std::to_string(row) + " has wrong number of fields");
    }
    MetricsRecord r;
    r.k = parse_int(cells[0], path, row);
    r.epoch = static_cast<int>(parse_int(cells[1], path, row));
    r.lr = parse_real(cells[2], path, row);
    r.train_loss = parse_real(cells[3], path, row);
    r.eval_accuracy = parse_real(cells[4], path, row);
    r.var_wk = parse_real(cells[5], path, row);
    r.s_k = parse_real(cells[6], path, row);
    r.period = static_cast<int>(parse_int(cells[7], path, row));
    r.sync_count_cum = parse_int(cells[8], path, row);
    r.bytes_cum = parse_int(cells[9], path, row);
    r.comm_time_modeled_cum = parse_real(cells[10], path, row);
    r.grad_sq_norm = parse_real(cells[11], path, row);
    records.push_back(r);
  }
  return records;
}

}  // namespace pavg
