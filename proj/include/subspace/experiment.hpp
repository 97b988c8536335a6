#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "subspace/config.hpp"

namespace subspace {

struct CellResult {
  std::string method;  // e.g. "lora" or "lora+mpc_o"
  std::size_t rank = 0;
  std::uint64_t seed = 0;
  std::size_t params = 0;
  std::size_t backbone = 0;
  double permille = 0.0;
  double final_metric = 0.0;  // final MSE (recovery) or test accuracy (classification)
  std::int64_t wallclock_ms = 0;
  bool failed = false;
  std::string reason;
};

struct CellAggregate {
  std::string method;
  std::size_t rank = 0;
  std::size_t count = 0;  // successful seeds
  double mean = 0.0;
  double stddev = 0.0;                // sample standard deviation
  std::optional<double> std_error;    // only with >= 2 seeds
};

struct ExperimentReport {
  bool higher_is_better = false;
  std::vector<CellResult> rows;

  bool any_failed() const;
  /// One entry per (method, rank) in first-appearance order; failed cells excluded.
  std::vector<CellAggregate> aggregates() const;
};

/// Label used in reports for a method trained with an optional MPC.
std::string method_label(Method method, RegularizerKind mpc);

/// Runs every (method × mpc × rank × seed) cell on a pool of `threads`
/// workers. Results do not depend on the thread count.
ExperimentReport run_experiment(const ExperimentConfig& config, unsigned threads = 1);

/// Columns: method,rank,seed,params,permille,final_metric,wallclock_ms.
/// Failed cells carry final_metric = nan.
std::string to_csv(const ExperimentReport& report);
std::string to_json(const ExperimentReport& report);
ExperimentReport read_csv(std::string_view text, bool higher_is_better = false);

/// Writes <stem>.csv and <stem>.json into `dir`.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir,
                  const std::string& stem = "report");

struct PairwiseWin {
  std::string better;  // earlier in the sorted order
  std::string worse;
  double fraction = 0.0;  // seeds where `better` wins; ties count one half
};

struct RankOrdering {
  std::size_t rank = 0;
  std::vector<CellAggregate> sorted;  // best first
  std::vector<PairwiseWin> wins;
};

/// Per rank: methods sorted by mean metric, plus per-seed win fractions for
/// every ordered pair. Throws ShapeError when methods at a rank do not share
/// the same successful seeds.
std::vector<RankOrdering> compare_methods(const ExperimentReport& report);

/// Fraction of shared seeds at `rank` where `a` beats `b` (ties count one half).
double win_fraction(const ExperimentReport& report, std::string_view a, std::string_view b,
                    std::size_t rank);

}  // namespace subspace
