#include "tvcp/fraction_curve.hpp"

#include <cstdio>

#include "tvcp/error.hpp"

namespace tvcp {

std::vector<FractionRow> data_fraction_curve(const std::vector<double>& fractions, const std::vector<Sample>& samples,
                                             const SplitPlan& plan, const TrainConfig& config,
                                             std::uint64_t subsample_seed, std::size_t fold) {
  if (fold >= plan.folds.size()) throw ContractError("fold index outside the split plan");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] > 0.0 && fractions[i] <= 1.0)) throw ContractError("fractions must lie in (0, 1]");
    if (i > 0 && fractions[i] < fractions[i - 1]) throw ContractError("fractions must be sorted ascending");
  }
  const auto& base = plan.folds[fold];
  const auto val_set = select(samples, base, Subset::kVal);
  const auto test_set = select(samples, base, Subset::kTest);

  std::vector<FractionRow> rows;
  for (double f : fractions) {
    FractionRow row;
    row.fraction = f;
    try {
      const auto sub = subsample_training_fraction(plan, f, subsample_seed);
      const auto& assignment = sub.folds[fold];
      row.train_targets = assignment.count(Subset::kTrain);
      auto out = train(config, select(samples, assignment, Subset::kTrain), val_set);
      const auto report = compute_metrics(predict_samples(out.model, test_set, config.threads));
      row.accuracy = report.accuracy;
      row.exact_match = report.exact_match;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string fraction_curve_csv(const std::vector<FractionRow>& rows) {
  std::string out = "fraction,accuracy,em\n";
  char buf[128];
  for (const auto& r : rows) {
    if (r.error) continue;
    std::snprintf(buf, sizeof buf, "%g,%.6f,%.6f\n", r.fraction, r.accuracy, r.exact_match);
    out += buf;
  }
  return out;
}

}  // namespace tvcp
