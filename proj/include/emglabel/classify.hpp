#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emglabel/sampling.hpp"

namespace emglabel::classify {

enum class KernelType { Rbf, Linear };

std::string_view kernel_name(KernelType k);
KernelType kernel_from_name(std::string_view name);

using Matrix = std::vector<std::vector<double>>;

double rbf_kernel(std::span<const double> x, std::span<const double> x2, double gamma);
double linear_kernel(std::span<const double> x, std::span<const double> x2);

/// 1 / (2 sigma^2) with sigma the median pairwise Euclidean distance, 1 when
/// all rows coincide.
double median_heuristic_gamma(const Matrix& x);

struct SvmParams {
  double c = 1.0;
  std::optional<double> gamma;  // default: median heuristic
  KernelType kernel = KernelType::Rbf;
  double tolerance = 1e-3;
  std::size_t max_iterations = 100000;
  bool standardize = true;  // z-score columns with training statistics
};

void validate_params(const SvmParams& params);

struct SvmModel {
  KernelType kernel = KernelType::Rbf;
  Matrix support_vectors;                 // in the (standardized) training space
  std::vector<double> dual_coefficients;  // alpha_i * y_i
  std::vector<std::size_t> support_indices;  // training row of each support vector
  double bias = 0.0;
  double gamma = 1.0;
  double c = 1.0;
  std::array<std::string, 2> class_labels;  // [0] <-> -1, [1] <-> +1
  std::vector<double> feature_mean;        // empty when not standardized
  std::vector<double> feature_scale;
  std::size_t iterations = 0;

  std::size_t dimension() const noexcept;
  friend bool operator==(const SvmModel&, const SvmModel&) = default;
};

/// Soft-margin dual by SMO with second-order working-set selection.
SvmModel svm_fit(const Matrix& x, std::span<const std::string> y, const SvmParams& params = {});

struct Prediction {
  std::string label;
  double decision = 0.0;
};

Prediction svm_predict(const SvmModel& model, std::span<const double> x);

/// Decision value on a row already in the model's (standardized) space.
double decision_function(const SvmModel& model, std::span<const double> z);

double accuracy(const SvmModel& model, const Matrix& x, std::span<const std::string> y);

struct CvResult {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation
  std::vector<double> per_fold;
};

CvResult cross_validate(const Matrix& x, std::span<const std::string> y, std::size_t k,
                        std::uint64_t seed, const SvmParams& params = {});

std::string format_model(const SvmModel& model);
SvmModel parse_model(std::string_view content);

}  // namespace emglabel::classify
