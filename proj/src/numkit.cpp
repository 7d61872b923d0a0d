#include "periodavg/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "periodavg/errors.hpp"

namespace pavg {

namespace {

void check_same_length(const ParamVector& x, const ParamVector& y, const char* op) {
  if (x.size() != y.size()) {
    throw DimensionError(std::string(op) + ": length mismatch (" + std::to_string(x.size()) +
                         " vs " + std::to_string(y.size()) + ")");
  }
}

}  // namespace

bool ParamVector::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y) {
  ParamVector out = y;
  axpy_inplace(alpha, x, out);
  return out;
}

void axpy_inplace(double alpha, const ParamVector& x, ParamVector& y) {
  check_same_length(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double sq_l2_norm(const ParamVector& x) noexcept {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

double sq_distance(const ParamVector& x, const ParamVector& y) {
  check_same_length(x, y, "sq_distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    acc += diff * diff;
  }
  return acc;
}

ParamVector mean_vectors(std::span<const ParamVector* const> xs) {
  if (xs.empty()) throw UsageError("mean_vectors: empty list");
  const ParamVector& origin = *xs.front();
  const std::size_t dim = origin.size();
  ParamVector offset(dim, 0.0);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const ParamVector& x = *xs[i];
    check_same_length(origin, x, "mean_vectors");
    for (std::size_t j = 0; j < dim; ++j) offset[j] += x[j] - origin[j];
  }
  const double n = static_cast<double>(xs.size());
  ParamVector out(dim);
  for (std::size_t j = 0; j < dim; ++j) out[j] = offset[j] == 0.0 ? origin[j] : origin[j] + offset[j] / n;
  return out;
}

ParamVector mean_vectors(std::span<const ParamVector> xs) {
  std::vector<const ParamVector*> ptrs;
  ptrs.reserve(xs.size());
  for (const auto& x : xs) ptrs.push_back(&x);
  return mean_vectors(std::span<const ParamVector* const>(ptrs));
}

void require_finite(const ParamVector& x, const char* what) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      throw NumericError(std::string(what) + ": non-finite value at component " + std::to_string(i));
    }
  }
}

// ---------------------------------------------------------------------------
// RngStream

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

std::array<std::uint32_t, 4> RngStream::philox(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

void RngStream::refill() {
  const std::array<std::uint32_t, 4> counter{
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                         static_cast<std::uint32_t>(seed_ >> 32)};
  buffer_ = philox(counter, key);
  buffered_ = 4;
  ++block_;
}

std::uint32_t RngStream::next_u32() {
  if (buffered_ == 0) refill();
  return buffer_[4 - buffered_--];
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t hi = next_u32();
  const std::uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_below(std::uint64_t bound) {
  if (bound == 0) throw UsageError("uniform_below: bound must be positive");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t draw;
  do {
    draw = next_u64();
  } while (draw >= limit);
  return draw % bound;
}

double RngStream::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

// ---------------------------------------------------------------------------
// Summary statistics

double mean(std::span<const double> xs) {
  if (xs.empty()) throw UsageError("mean: empty input");
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

double median(std::span<const double> xs) {
  if (xs.empty()) throw UsageError("median: empty input");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  if (sorted.size() % 2 == 1) return sorted[mid];
  return 0.5 * (sorted[mid - 1] + sorted[mid]);
}

double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

Spread spread(std::span<const double> xs) {
  if (xs.empty()) throw UsageError("spread: empty input");
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  return Spread{*lo, median(xs), *hi};
}

}  // namespace pavg
