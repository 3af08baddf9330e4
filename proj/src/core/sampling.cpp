#include "emglabel/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "emglabel/error.hpp"
#include "emglabel/random.hpp"

namespace emglabel {

namespace {

std::map<std::string, std::vector<std::size_t>> by_class(std::span<const std::string> labels) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
  return out;
}

}  // namespace

std::vector<std::string> distinct_labels(std::span<const std::string> labels) {
  std::vector<std::string> out(labels.begin(), labels.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const std::string> labels,
                                                       std::size_t k, std::uint64_t seed) {
  if (k < 2) fail(ErrorCode::InvalidParameter, "fold count must be >= 2");
  if (labels.size() < k) fail(ErrorCode::InvalidParameter, "fewer rows than folds");
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t next = 0;
  for (auto& [label, rows] : by_class(labels)) {
    rng.shuffle(rows);
    for (std::size_t r : rows) {
      folds[next].push_back(r);
      next = (next + 1) % k;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

Split train_eval_split(std::span<const std::string> labels, double train_fraction,
                       std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    fail(ErrorCode::InvalidParameter, "train fraction must be in (0, 1)");
  }
  Rng rng(seed);
  Split out;
  for (auto& [label, rows] : by_class(labels)) {
    rng.shuffle(rows);
    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(rows.size())));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      (i < n_train ? out.train : out.eval).push_back(rows[i]);
    }
  }
  if (out.train.empty() || out.eval.empty()) {
    fail(ErrorCode::InvalidParameter, "train fraction " + std::to_string(train_fraction) +
                                          " leaves an empty " +
                                          (out.train.empty() ? "training" : "evaluation") +
                                          " side");
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.eval.begin(), out.eval.end());
  return out;
}

}  // namespace emglabel
