#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace emglabel {

/// Sorted distinct labels.
std::vector<std::string> distinct_labels(std::span<const std::string> labels);

/// Stratified k-fold assignment. Each class is shuffled with the seeded
/// generator and dealt round-robin, so every row lands in exactly one fold.
/// Fold index lists are sorted ascending.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const std::string> labels,
                                                       std::size_t k, std::uint64_t seed);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

/// Stratified split with round(fraction * class size) training rows per class.
Split train_eval_split(std::span<const std::string> labels, double train_fraction,
                       std::uint64_t seed);

}  // namespace emglabel
