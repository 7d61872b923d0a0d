#include "periodavg/model.hpp"

#include <algorithm>
#include <cmath>

#include "periodavg/errors.hpp"

namespace pavg {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLinearRegressionMse: return "linear_regression_mse";
    case ModelKind::kLogisticRegression: return "logistic_regression";
    case ModelKind::kMlp: return "mlp";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "linear_regression_mse") return ModelKind::kLinearRegressionMse;
  if (name == "logistic_regression") return ModelKind::kLogisticRegression;
  if (name == "mlp") return ModelKind::kMlp;
  throw UsageError("unknown model kind '" + name + "'");
}

namespace {

std::vector<std::size_t> layer_sizes(const ModelSpec& spec) {
  std::vector<std::size_t> sizes;
  sizes.reserve(spec.hidden.size() + 2);
  sizes.push_back(spec.input_dim);
  sizes.insert(sizes.end(), spec.hidden.begin(), spec.hidden.end());
  sizes.push_back(spec.num_classes);
  return sizes;
}

void check_inputs(const ModelSpec& spec, const ParamVector& w, const Batch& batch) {
  const std::size_t d = param_dim(spec);
  if (w.size() != d) {
    throw DimensionError("parameter length " + std::to_string(w.size()) + " does not match model dimension " +
                         std::to_string(d));
  }
  if (batch.rows() == 0) throw UsageError("empty batch");
  if (batch.input_dim != spec.input_dim) {
    throw DimensionError("batch feature dimension " + std::to_string(batch.input_dim) +
                         " does not match model input_dim " + std::to_string(spec.input_dim));
  }
  if (batch.features.size() != batch.rows() * batch.input_dim) {
    throw DimensionError("batch feature matrix is not rows x input_dim");
  }
}

std::size_t class_index(double target, std::size_t classes) {
  if (!(target >= 0.0) || target != std::floor(target) || target >= static_cast<double>(classes)) {
    throw UsageError("class target " + std::to_string(target) + " outside [0, " + std::to_string(classes) + ")");
  }
  return static_cast<std::size_t>(target);
}

double dot(std::span<const double> a, const double* b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Forward/backward for one mlp sample. Accumulates the sample gradient into
// `grad_acc` when non-null and returns the sample loss.
class MlpPass {
 public:
  explicit MlpPass(const ModelSpec& spec) : sizes_(layer_sizes(spec)) {
    activations_.resize(sizes_.size());
    for (std::size_t l = 0; l < sizes_.size(); ++l) activations_[l].resize(sizes_[l]);
    deltas_.resize(sizes_.size());
    for (std::size_t l = 0; l < sizes_.size(); ++l) deltas_[l].resize(sizes_[l]);
  }

  // Returns the output logits for `x`.
  const std::vector<double>& forward(const ParamVector& w, std::span<const double> x) {
    std::copy(x.begin(), x.end(), activations_[0].begin());
    std::size_t offset = 0;
    const std::size_t last = sizes_.size() - 1;
    for (std::size_t l = 0; l < last; ++l) {
      const std::size_t in = sizes_[l];
      const std::size_t out = sizes_[l + 1];
      const double* weights = w.data() + offset;
      const double* bias = weights + in * out;
      for (std::size_t o = 0; o < out; ++o) {
        double z = bias[o] + dot(activations_[l], weights + o * in);
        if (l + 1 < last) z = std::max(z, 0.0);
        activations_[l + 1][o] = z;
      }
      offset += in * out + out;
    }
    return activations_[last];
  }

  double sample(const ParamVector& w, std::span<const double> x, std::size_t label, double* grad_acc) {
    const std::vector<double>& logits = forward(w, x);
    const double peak = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z - peak);
    const double log_denom = std::log(denom);
    const double sample_loss = log_denom - (logits[label] - peak);
    if (grad_acc == nullptr) return sample_loss;

    const std::size_t last = sizes_.size() - 1;
    for (std::size_t c = 0; c < sizes_[last]; ++c) {
      deltas_[last][c] = std::exp(logits[c] - peak - log_denom) - (c == label ? 1.0 : 0.0);
    }
    // Walk layers backwards; offsets computed from the end.
    std::size_t offset = param_dim_from_sizes();
    for (std::size_t l = last; l-- > 0;) {
      const std::size_t in = sizes_[l];
      const std::size_t out = sizes_[l + 1];
      offset -= in * out + out;
      const double* weights = w.data() + offset;
      double* gw = grad_acc + offset;
      double* gb = gw + in * out;
      const std::vector<double>& a_in = activations_[l];
      const std::vector<double>& delta_out = deltas_[l + 1];
      for (std::size_t o = 0; o < out; ++o) {
        const double delta = delta_out[o];
        if (delta == 0.0) continue;
        double* gw_row = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) gw_row[i] += delta * a_in[i];
        gb[o] += delta;
      }
      if (l == 0) break;
      std::vector<double>& delta_in = deltas_[l];
      for (std::size_t i = 0; i < in; ++i) {
        if (a_in[i] <= 0.0) {
          delta_in[i] = 0.0;
          continue;
        }
        double acc = 0.0;
        for (std::size_t o = 0; o < out; ++o) acc += weights[o * in + i] * delta_out[o];
        delta_in[i] = acc;
      }
    }
    return sample_loss;
  }

 private:
  std::size_t param_dim_from_sizes() const {
    std::size_t d = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) d += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
    return d;
  }

  std::vector<std::size_t> sizes_;
  std::vector<std::vector<double>> activations_;
  std::vector<std::vector<double>> deltas_;
};

// Mean data loss, with the mean data gradient written to `grad_out` if given.
double data_loss(const ModelSpec& spec, const ParamVector& w, const Batch& batch, ParamVector* grad_out) {
  const std::size_t rows = batch.rows();
  double total = 0.0;
  double* g = grad_out != nullptr ? grad_out->data() : nullptr;

  switch (spec.kind) {
    case ModelKind::kLinearRegressionMse: {
      for (std::size_t r = 0; r < rows; ++r) {
        const auto x = batch.row(r);
        const double residual = dot(x, w.data()) - batch.targets[r];
        total += 0.5 * residual * residual;
        if (g != nullptr) {
          for (std::size_t j = 0; j < x.size(); ++j) g[j] += residual * x[j];
        }
      }
      break;
    }
    case ModelKind::kLogisticRegression: {
      const std::size_t dim = spec.input_dim;
      for (std::size_t r = 0; r < rows; ++r) {
        const auto x = batch.row(r);
        const double y = static_cast<double>(class_index(batch.targets[r], 2));
        const double z = dot(x, w.data()) + w[dim];
        total += softplus(z) - y * z;
        if (g != nullptr) {
          const double residual = sigmoid(z) - y;
          for (std::size_t j = 0; j < dim; ++j) g[j] += residual * x[j];
          g[dim] += residual;
        }
      }
      break;
    }
    case ModelKind::kMlp: {
      MlpPass pass(spec);
      for (std::size_t r = 0; r < rows; ++r) {
        total += pass.sample(w, batch.row(r), class_index(batch.targets[r], spec.num_classes), g);
      }
      break;
    }
  }

  const double inv_rows = 1.0 / static_cast<double>(rows);
  if (g != nullptr) {
    for (std::size_t j = 0; j < w.size(); ++j) g[j] /= static_cast<double>(rows);
  }
  return total * inv_rows;
}

}  // namespace

std::size_t param_dim(const ModelSpec& spec) {
  validate(spec);
  switch (spec.kind) {
    case ModelKind::kLinearRegressionMse: return spec.input_dim;
    case ModelKind::kLogisticRegression: return spec.input_dim + 1;
    case ModelKind::kMlp: {
      const auto sizes = layer_sizes(spec);
      std::size_t d = 0;
      for (std::size_t l = 0; l + 1 < sizes.size(); ++l) d += sizes[l] * sizes[l + 1] + sizes[l + 1];
      return d;
    }
  }
  return 0;
}

bool is_classifier(const ModelSpec& spec) noexcept { return spec.kind != ModelKind::kLinearRegressionMse; }

std::size_t class_count(const ModelSpec& spec) noexcept {
  switch (spec.kind) {
    case ModelKind::kLinearRegressionMse: return 0;
    case ModelKind::kLogisticRegression: return 2;
    case ModelKind::kMlp: return spec.num_classes;
  }
  return 0;
}

void validate(const ModelSpec& spec) {
  if (spec.input_dim == 0) throw UsageError("model input_dim must be positive");
  if (!(spec.l2_reg >= 0.0) || !std::isfinite(spec.l2_reg)) throw UsageError("model l2_reg must be >= 0");
  if (spec.kind == ModelKind::kMlp) {
    if (spec.num_classes < 2) throw UsageError("mlp needs at least 2 classes");
    for (std::size_t width : spec.hidden) {
      if (width == 0) throw UsageError("mlp hidden widths must be positive");
    }
  }
}

void Batch::append_row(std::span<const double> x, double target) {
  if (x.size() != input_dim) throw DimensionError("row length does not match batch input_dim");
  features.insert(features.end(), x.begin(), x.end());
  targets.push_back(target);
}

Batch concat(std::span<const Batch> batches) {
  if (batches.empty()) throw UsageError("concat: no batches");
  Batch out;
  out.input_dim = batches.front().input_dim;
  for (const Batch& b : batches) {
    if (b.input_dim != out.input_dim) throw DimensionError("concat: mismatched input_dim");
    out.features.insert(out.features.end(), b.features.begin(), b.features.end());
    out.targets.insert(out.targets.end(), b.targets.begin(), b.targets.end());
  }
  return out;
}

double loss(const ModelSpec& spec, const ParamVector& w, const Batch& batch) {
  check_inputs(spec, w, batch);
  const double value = data_loss(spec, w, batch, nullptr) + 0.5 * spec.l2_reg * sq_l2_norm(w);
  if (!std::isfinite(value)) throw NumericError("loss is not finite");
  return value;
}

double loss_and_grad(const ModelSpec& spec, const ParamVector& w, const Batch& batch, ParamVector& grad_out) {
  check_inputs(spec, w, batch);
  grad_out = ParamVector(w.size(), 0.0);
  double value = data_loss(spec, w, batch, &grad_out);
  if (spec.l2_reg != 0.0) {
    value += 0.5 * spec.l2_reg * sq_l2_norm(w);
    axpy_inplace(spec.l2_reg, w, grad_out);
  }
  if (!std::isfinite(value)) throw NumericError("loss is not finite");
  return value;
}

ParamVector grad(const ModelSpec& spec, const ParamVector& w, const Batch& batch) {
  ParamVector g;
  loss_and_grad(spec, w, batch, g);
  return g;
}

ParamVector finite_diff_grad(const ModelSpec& spec, const ParamVector& w, const Batch& batch, double h) {
  if (!(h > 0.0)) throw UsageError("finite_diff_grad: h must be positive");
  ParamVector out(w.size());
  ParamVector probe = w;
  for (std::size_t j = 0; j < w.size(); ++j) {
    probe[j] = w[j] + h;
    const double up = loss(spec, probe, batch);
    probe[j] = w[j] - h;
    const double down = loss(spec, probe, batch);
    probe[j] = w[j];
    out[j] = (up - down) / (2.0 * h);
  }
  return out;
}

double accuracy(const ModelSpec& spec, const ParamVector& w, const Batch& batch) {
  if (!is_classifier(spec)) throw UsageError("accuracy is undefined for regression models");
  check_inputs(spec, w, batch);
  std::size_t correct = 0;
  if (spec.kind == ModelKind::kLogisticRegression) {
    for (std::size_t r = 0; r < batch.rows(); ++r) {
      const double z = dot(batch.row(r), w.data()) + w[spec.input_dim];
      const std::size_t predicted = z > 0.0 ? 1 : 0;
      if (predicted == class_index(batch.targets[r], 2)) ++correct;
    }
  } else {
    MlpPass pass(spec);
    for (std::size_t r = 0; r < batch.rows(); ++r) {
      const auto& logits = pass.forward(w, batch.row(r));
      // max_element returns the first maximum, i.e. the lowest index on ties.
      const auto predicted = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
      if (predicted == class_index(batch.targets[r], spec.num_classes)) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(batch.rows());
}

ParamVector init_params(const ModelSpec& spec, RngStream& rng) {
  ParamVector w(param_dim(spec), 0.0);
  if (spec.kind != ModelKind::kMlp) return w;
  const auto sizes = layer_sizes(spec);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t i = 0; i < in * out; ++i) w[offset + i] = (2.0 * rng.uniform() - 1.0) * limit;
    offset += in * out + out;
  }
  return w;
}

}  // namespace pavg
