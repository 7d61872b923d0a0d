#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace pavg {

/// Flat vector of model parameters (or gradients). Length is fixed at
/// construction; every value is expected to stay finite.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  const std::vector<double>& values() const noexcept { return values_; }

  bool all_finite() const noexcept;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

/// Returns alpha*x + y. Throws DimensionError on length mismatch.
ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y);

/// In-place y += alpha*x.
void axpy_inplace(double alpha, const ParamVector& x, ParamVector& y);

double sq_l2_norm(const ParamVector& x) noexcept;

/// Sum of squared differences, sum_i (x_i - y_i)^2.
double sq_distance(const ParamVector& x, const ParamVector& y);

/// Elementwise mean, accumulated in ascending index order.
///
/// The first vector is used as the accumulation origin, so n copies of the
/// same vector average back to that vector bit-exactly.
ParamVector mean_vectors(std::span<const ParamVector* const> xs);
ParamVector mean_vectors(std::span<const ParamVector> xs);

/// Throws NumericError naming `what` if any entry is NaN or infinite.
void require_finite(const ParamVector& x, const char* what);

/// Counter-based generator (Philox4x32-10). Stream `stream_id` of seed `seed`
/// is a fixed sequence on every platform; distinct stream ids never share
/// counter blocks.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound);
  /// Standard normal draw (Box-Muller, both variates used).
  double normal();
  bool bernoulli(double prob) { return uniform() < prob; }

  /// Philox4x32-10 block function, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> counter,
                                             std::array<std::uint32_t, 2> key) noexcept;

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Fisher-Yates shuffle driven by an RngStream (std::shuffle is not
/// portable across standard libraries).
template <typename T>
void shuffle(std::vector<T>& items, RngStream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

struct Spread {
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

double mean(std::span<const double> xs);
double median(std::span<const double> xs);
/// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> xs);
Spread spread(std::span<const double> xs);

}  // namespace pavg
