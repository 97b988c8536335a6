#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "subspace/activation.hpp"
#include "subspace/mpc.hpp"
#include "subspace/tasks.hpp"
#include "subspace/train.hpp"
#include "subspace/tuner.hpp"

namespace subspace {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, std::string field, const std::string& message);
  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int line_;
  std::string field_;
};

enum class TaskKind { Recovery, Classification };

struct TaskConfig {
  TaskKind kind = TaskKind::Recovery;
  // recovery
  std::size_t n = 32;
  std::size_t m = 32;
  std::size_t planted_rank = 4;
  double noise_std = 0.01;
  std::size_t probes = kDefaultProbes;
  // classification
  ToyClassificationOptions data;
  PretrainOptions pretrain;
};

struct ExperimentConfig {
  std::vector<Method> methods;
  std::vector<RegularizerKind> mpc{RegularizerKind::None};
  double lambda = 1e-3;
  std::vector<std::size_t> ranks{2, 4, 8, 16};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  int steps = 2000;
  double learning_rate = 1e-2;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::size_t batch_size = 0;
  std::optional<double> scale;
  Activation activation = Activation::Relu;
  std::uint64_t master_seed = 0;
  /// Wall-clock column is 0 unless enabled, which keeps CSVs byte-reproducible.
  bool timing = false;
  TaskConfig task;
};

/// Parses `key = value` lines; `#` starts a comment; `[task]` opens the task
/// block. Lists are comma separated and integer lists accept `a..b` ranges.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace subspace
