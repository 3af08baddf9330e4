#include "emglabel/classify.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numeric>

#include "emglabel/error.hpp"

namespace emglabel::classify {

using json = nlohmann::ordered_json;

std::string_view kernel_name(KernelType k) { return k == KernelType::Rbf ? "rbf" : "linear"; }

KernelType kernel_from_name(std::string_view name) {
  if (name == "rbf") return KernelType::Rbf;
  if (name == "linear") return KernelType::Linear;
  fail(ErrorCode::InvalidParameter, "unknown kernel '" + std::string(name) + "'");
}

namespace {

void check_dims(std::span<const double> x, std::span<const double> x2) {
  if (x.size() != x2.size()) {
    fail(ErrorCode::InvalidInput, "dimension mismatch: " + std::to_string(x.size()) + " vs " +
                                      std::to_string(x2.size()));
  }
}

double squared_distance(std::span<const double> x, std::span<const double> x2) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - x2[i];
    acc += d * d;
  }
  return acc;
}

double kernel(KernelType type, double gamma, std::span<const double> a, std::span<const double> b) {
  return type == KernelType::Rbf ? std::exp(-gamma * squared_distance(a, b)) : linear_kernel(a, b);
}

void check_matrix(const Matrix& x) {
  if (x.empty()) fail(ErrorCode::InvalidTrainingSet, "training set is empty");
  const std::size_t d = x.front().size();
  if (d == 0) fail(ErrorCode::InvalidInput, "feature rows are empty");
  for (const auto& r : x) {
    if (r.size() != d) fail(ErrorCode::InvalidInput, "feature rows differ in dimension");
    for (double v : r) {
      if (!std::isfinite(v)) fail(ErrorCode::InvalidInput, "non-finite feature value");
    }
  }
}

}  // namespace

double rbf_kernel(std::span<const double> x, std::span<const double> x2, double gamma) {
  check_dims(x, x2);
  if (!(gamma > 0.0) || !std::isfinite(gamma)) fail(ErrorCode::InvalidParameter, "gamma must be positive");
  return std::exp(-gamma * squared_distance(x, x2));
}

double linear_kernel(std::span<const double> x, std::span<const double> x2) {
  check_dims(x, x2);
  return std::inner_product(x.begin(), x.end(), x2.begin(), 0.0);
}

double median_heuristic_gamma(const Matrix& x) {
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) d.push_back(std::sqrt(squared_distance(x[i], x[j])));
  }
  if (d.empty()) return 1.0;
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  const double sigma = m % 2 == 1 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
  if (!(sigma > 0.0)) return 1.0;
  return 1.0 / (2.0 * sigma * sigma);
}

void validate_params(const SvmParams& p) {
  if (!(p.c > 0.0) || !std::isfinite(p.c)) fail(ErrorCode::InvalidParameter, "C must be positive");
  if (p.gamma && (!(*p.gamma > 0.0) || !std::isfinite(*p.gamma))) {
    fail(ErrorCode::InvalidParameter, "gamma must be positive");
  }
  if (!(p.tolerance > 0.0)) fail(ErrorCode::InvalidParameter, "tolerance must be positive");
  if (p.max_iterations < 1) fail(ErrorCode::InvalidParameter, "max_iterations must be >= 1");
}

std::size_t SvmModel::dimension() const noexcept {
  if (!feature_mean.empty()) return feature_mean.size();
  return support_vectors.empty() ? 0 : support_vectors.front().size();
}

SvmModel svm_fit(const Matrix& x_raw, std::span<const std::string> y_raw, const SvmParams& params) {
  validate_params(params);
  check_matrix(x_raw);
  if (x_raw.size() != y_raw.size()) fail(ErrorCode::InvalidInput, "row/label count mismatch");
  const auto classes = distinct_labels(y_raw);
  if (classes.size() < 2) fail(ErrorCode::InvalidTrainingSet, "training set holds a single class");
  if (classes.size() > 2) {
    fail(ErrorCode::InvalidTrainingSet, "binary classifier got " + std::to_string(classes.size()) + " classes");
  }

  SvmModel model;
  model.kernel = params.kernel;
  model.c = params.c;
  model.class_labels = {classes[0], classes[1]};
  const std::size_t n = x_raw.size();
  const std::size_t dim = x_raw.front().size();
  Matrix x = x_raw;
  if (params.standardize) {
    model.feature_mean.assign(dim, 0.0);
    model.feature_scale.assign(dim, 1.0);
    for (std::size_t j = 0; j < dim; ++j) {
      double m = 0.0;
      for (const auto& r : x_raw) m += r[j];
      m /= static_cast<double>(n);
      double v = 0.0;
      for (const auto& r : x_raw) v += (r[j] - m) * (r[j] - m);
      const double s = std::sqrt(v / static_cast<double>(n));
      model.feature_mean[j] = m;
      model.feature_scale[j] = s > 0.0 ? s : 1.0;
    }
    for (auto& r : x) {
      for (std::size_t j = 0; j < dim; ++j) r[j] = (r[j] - model.feature_mean[j]) / model.feature_scale[j];
    }
  }
  model.gamma = params.gamma ? *params.gamma : median_heuristic_gamma(x);

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = y_raw[i] == classes[1] ? 1.0 : -1.0;

  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = kernel(model.kernel, model.gamma, x[i], x[j]);
      k[i * n + j] = v;
      k[j * n + i] = v;
    }
  }
  const double c = params.c;
  const double tau = 1e-12;
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  auto upper_ok = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0); };
  auto lower_ok = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < c); };

  std::size_t iter = 0;
  double gap = 0.0;
  while (true) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (upper_ok(t) && -y[t] * grad[t] >= gmax) {
        gmax = -y[t] * grad[t];
        i = t;
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t j = n;
    double obj_min = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      if (!lower_ok(t)) continue;
      gmax2 = std::max(gmax2, y[t] * grad[t]);
      if (i == n) continue;
      const double b = gmax + y[t] * grad[t];
      if (b > 0.0) {
        double a = k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t];
        if (a <= 0.0) a = tau;
        const double obj = -(b * b) / a;
        if (obj <= obj_min) {
          obj_min = obj;
          j = t;
        }
      }
    }
    gap = gmax + gmax2;
    if (i == n || j == n || gap < params.tolerance) break;
    if (iter >= params.max_iterations) {
      fail(ErrorCode::Convergence, "smo did not converge in " + std::to_string(iter) +
                                       " iterations (gap " + std::to_string(gap) + ")");
    }
    ++iter;

    const double old_i = alpha[i];
    const double old_j = alpha[j];
    const double kij = k[i * n + j];
    double quad = k[i * n + i] + k[j * n + j] - 2.0 * kij;
    if (quad <= 0.0) quad = tau;
    if (y[i] != y[j]) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i;
    const double dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (y[i] * k[t * n + i] * di + y[j] * k[t * n + j] * dj);
    }
  }

  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);
  model.bias = -rho;
  model.iterations = iter;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      model.support_vectors.push_back(x[t]);
      model.dual_coefficients.push_back(alpha[t] * y[t]);
      model.support_indices.push_back(t);
    }
  }
  return model;
}

double decision_function(const SvmModel& model, std::span<const double> z) {
  double f = model.bias;
  for (std::size_t s = 0; s < model.support_vectors.size(); ++s) {
    f += model.dual_coefficients[s] * kernel(model.kernel, model.gamma, model.support_vectors[s], z);
  }
  return f;
}

Prediction svm_predict(const SvmModel& model, std::span<const double> x) {
  if (x.size() != model.dimension()) {
    fail(ErrorCode::InvalidInput, "dimension mismatch: model expects " +
                                      std::to_string(model.dimension()) + ", got " +
                                      std::to_string(x.size()));
  }
  std::vector<double> z(x.begin(), x.end());
  if (!model.feature_mean.empty()) {
    for (std::size_t j = 0; j < z.size(); ++j) z[j] = (z[j] - model.feature_mean[j]) / model.feature_scale[j];
  }
  const double f = decision_function(model, z);
  return {f >= 0.0 ? model.class_labels[1] : model.class_labels[0], f};
}

double accuracy(const SvmModel& model, const Matrix& x, std::span<const std::string> y) {
  if (x.size() != y.size()) fail(ErrorCode::InvalidInput, "row/label count mismatch");
  if (x.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (svm_predict(model, x[i]).label == y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(x.size());
}

CvResult cross_validate(const Matrix& x, std::span<const std::string> y, std::size_t k,
                        std::uint64_t seed, const SvmParams& params) {
  if (x.size() != y.size()) fail(ErrorCode::InvalidInput, "row/label count mismatch");
  if (k < 2) fail(ErrorCode::InvalidParameter, "k must be >= 2");
  const auto classes = distinct_labels(y);
  if (classes.size() < 2) fail(ErrorCode::InvalidTrainingSet, "cross validation needs two classes");
  for (const auto& c : classes) {
    const auto count = static_cast<std::size_t>(std::count(y.begin(), y.end(), c));
    if (count < k) {
      fail(ErrorCode::InvalidParameter, "class '" + c + "' has " + std::to_string(count) +
                                            " rows, fewer than k=" + std::to_string(k));
    }
  }
  const auto folds = stratified_folds(y, k, seed);
  CvResult out;
  std::vector<char> in_test(x.size());
  for (const auto& test : folds) {
    std::fill(in_test.begin(), in_test.end(), 0);
    for (std::size_t i : test) in_test[i] = 1;
    Matrix xt, xe;
    std::vector<std::string> yt, ye;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (in_test[i]) {
        xe.push_back(x[i]);
        ye.push_back(y[i]);
      } else {
        xt.push_back(x[i]);
        yt.push_back(y[i]);
      }
    }
    const SvmModel m = svm_fit(xt, yt, params);
    out.per_fold.push_back(accuracy(m, xe, ye));
  }
  out.mean_accuracy = std::accumulate(out.per_fold.begin(), out.per_fold.end(), 0.0) /
                      static_cast<double>(out.per_fold.size());
  double ss = 0.0;
  for (double a : out.per_fold) ss += (a - out.mean_accuracy) * (a - out.mean_accuracy);
  out.std_accuracy = std::sqrt(ss / static_cast<double>(out.per_fold.size() - 1));
  return out;
}

std::string format_model(const SvmModel& m) {
  json j;
  j["schema"] = "emglabel.svm";
  j["version"] = 1;
  j["kernel"] = std::string(kernel_name(m.kernel));
  j["gamma"] = m.gamma;
  j["c"] = m.c;
  j["bias"] = m.bias;
  j["class_labels"] = m.class_labels;
  j["feature_mean"] = m.feature_mean;
  j["feature_scale"] = m.feature_scale;
  j["iterations"] = m.iterations;
  j["dual_coefficients"] = m.dual_coefficients;
  j["support_indices"] = m.support_indices;
  j["support_vectors"] = m.support_vectors;
  return j.dump(2) + "\n";
}

SvmModel parse_model(std::string_view content) {
  try {
    const json j = json::parse(content);
    if (j.at("schema").get<std::string>() != "emglabel.svm" || j.at("version").get<int>() != 1) {
      fail(ErrorCode::Format, "not an svm model file");
    }
    SvmModel m;
    m.kernel = kernel_from_name(j.at("kernel").get<std::string>());
    m.gamma = j.at("gamma").get<double>();
    m.c = j.at("c").get<double>();
    m.bias = j.at("bias").get<double>();
    m.class_labels = j.at("class_labels").get<std::array<std::string, 2>>();
    m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    m.feature_scale = j.at("feature_scale").get<std::vector<double>>();
    m.iterations = j.at("iterations").get<std::size_t>();
    m.dual_coefficients = j.at("dual_coefficients").get<std::vector<double>>();
    m.support_vectors = j.at("support_vectors").get<Matrix>();
    m.support_indices = j.at("support_indices").get<std::vector<std::size_t>>();
    if (m.dual_coefficients.size() != m.support_vectors.size() ||
        m.support_indices.size() != m.support_vectors.size() ||
        m.feature_mean.size() != m.feature_scale.size()) {
      fail(ErrorCode::Format, "svm model arrays disagree in length");
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, std::string("svm model: ") + e.what());
  }
}

}  // namespace emglabel::classify
