#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tvcp/dataset.hpp"
#include "tvcp/training.hpp"

namespace tvcp {

struct FractionRow {
  double fraction = 0.0;
  double accuracy = 0.0;
  double exact_match = 0.0;
  std::size_t train_targets = 0;
  std::optional<std::string> error;  // training failure for this fraction
};

// Trains once per fraction on nested subsamples of one fold's training
// targets and evaluates on that fold's fixed test subset.
// fractions must be ascending within (0, 1].
std::vector<FractionRow> data_fraction_curve(const std::vector<double>& fractions, const std::vector<Sample>& samples,
                                             const SplitPlan& plan, const TrainConfig& config,
                                             std::uint64_t subsample_seed, std::size_t fold = 0);

std::string fraction_curve_csv(const std::vector<FractionRow>& rows);  // fraction,accuracy,em

}  // namespace tvcp
