#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "periodavg/numkit.hpp"

namespace pavg {

enum class ModelKind { kLinearRegressionMse, kLogisticRegression, kMlp };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// Describes one of the supported differentiable models.
///
/// Parameter layouts:
///  - linear_regression_mse: `input_dim` weights, no bias.
///  - logistic_regression:   `input_dim` weights followed by one bias.
///  - mlp: for each layer (input -> hidden... -> num_classes) a row-major
///    `out x in` weight block followed by `out` biases. Hidden layers use
///    ReLU; the output is softmax cross-entropy.
struct ModelSpec {
  ModelKind kind = ModelKind::kLinearRegressionMse;
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden;  // mlp only
  std::size_t num_classes = 2;      // mlp only; logistic is always binary
  double l2_reg = 0.0;
};

/// Number of parameters d. Throws UsageError for an invalid spec.
std::size_t param_dim(const ModelSpec& spec);
bool is_classifier(const ModelSpec& spec) noexcept;
/// Number of output classes for classifiers, 0 for regression.
std::size_t class_count(const ModelSpec& spec) noexcept;
void validate(const ModelSpec& spec);

/// Row-major design matrix plus targets. Classification targets are class
/// indices stored as doubles.
struct Batch {
  std::size_t input_dim = 0;
  std::vector<double> features;
  std::vector<double> targets;

  std::size_t rows() const noexcept { return targets.size(); }
  std::span<const double> row(std::size_t i) const noexcept {
    return {features.data() + i * input_dim, input_dim};
  }
  void append_row(std::span<const double> x, double target);
};

/// Concatenates batches in order.
Batch concat(std::span<const Batch> batches);

/// Mean per-sample loss plus (l2_reg/2)*||w||^2.
double loss(const ModelSpec& spec, const ParamVector& w, const Batch& batch);

/// Gradient of `loss` with respect to w.
ParamVector grad(const ModelSpec& spec, const ParamVector& w, const Batch& batch);

/// Loss and gradient from a single forward/backward pass.
double loss_and_grad(const ModelSpec& spec, const ParamVector& w, const Batch& batch, ParamVector& grad_out);

/// Central differences of `loss`; component j is
/// (loss(w + h e_j) - loss(w - h e_j)) / (2h).
ParamVector finite_diff_grad(const ModelSpec& spec, const ParamVector& w, const Batch& batch, double h);

/// Fraction of rows whose argmax prediction equals the target. Ties go to
/// the lowest class index. UsageError for regression models.
double accuracy(const ModelSpec& spec, const ParamVector& w, const Batch& batch);

/// Initial parameters: Glorot-uniform weights and zero biases for mlp,
/// all zeros for the linear models.
ParamVector init_params(const ModelSpec& spec, RngStream& rng);

}  // namespace pavg
