#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "subspace/config.hpp"
#include "subspace/experiment.hpp"
#include "subspace/gradcheck.hpp"
#include "subspace/params.hpp"
#include "subspace/verify.hpp"

namespace {

using namespace subspace;

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;

int cmd_run(const std::string& config_path, unsigned threads, const std::string& out_dir,
            const std::string& stem) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return kExitConfig;
  }
  const ExperimentReport report = run_experiment(cfg, threads);
  write_report(report, out_dir, stem);

  for (const auto& r : report.rows) {
    if (r.failed) {
      std::cerr << "failed: " << r.method << " rank=" << r.rank << " seed=" << r.seed << ": "
                << r.reason << '\n';
    }
  }
  std::printf("%-28s %5s %5s %14s %12s\n", "method", "rank", "n", "mean", "stderr");
  for (const auto& a : report.aggregates()) {
    std::printf("%-28s %5zu %5zu %14.6g %12s\n", a.method.c_str(), a.rank, a.count, a.mean,
                a.std_error ? std::to_string(*a.std_error).c_str() : "-");
  }
  std::printf("wrote %s/%s.csv and .json (%zu rows)\n", out_dir.c_str(), stem.c_str(),
              report.rows.size());
  return report.any_failed() ? kExitFailed : kExitOk;
}

int cmd_gradcheck(const std::string& kind, int instances) {
  std::vector<Method> methods;
  bool prompt = kind.empty() || kind == "soft_prompt";
  if (kind.empty()) {
    methods.assign(peft_methods().begin(), peft_methods().end());
  } else if (kind != "soft_prompt") {
    try {
      methods.push_back(parse_method(kind));
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      return kExitConfig;
    }
  }
  GradCheckOptions opts;
  opts.instances = instances;
  std::vector<GradCheckResult> results = run_gradcheck(methods, opts);
  if (prompt) {
    auto extra = run_soft_prompt_gradcheck(opts);
    results.insert(results.end(), extra.begin(), extra.end());
  }
  std::size_t failures = 0;
  double worst = 0.0;
  for (const auto& r : results) {
    worst = std::max(worst, r.rel_error);
    if (!r.pass) {
      ++failures;
      std::printf("FAIL %s %s instance %d rel %.3e\n", r.method.c_str(), r.tensor.c_str(), r.instance,
                  r.rel_error);
    }
  }
  std::printf("%zu checks, %zu failures, worst relative error %.3e\n", results.size(), failures, worst);
  return failures ? kExitFailed : kExitOk;
}

int cmd_verify(std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : run_verify(seed)) {
    std::printf("%-4s %-36s residual %.3e (tol %.0e)\n", r.pass ? "ok" : "FAIL", r.name.c_str(),
                r.residual, r.tolerance);
    ok = ok && r.pass;
  }
  return ok ? kExitOk : kExitFailed;
}

int cmd_params(const std::string& shape_text, const std::vector<std::size_t>& ranks) {
  ModelShape shape;
  try {
    shape = parse_model_shape(shape_text);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  }
  const auto layers = shape.layers();
  std::printf("%s: %zu tuned weights, backbone %zu\n", shape.name.c_str(), layers.size(),
              shape.backbone_count);
  std::printf("%-18s %5s %14s %12s %12s\n", "method", "rank", "params", "per block", "permille");
  for (Method method : peft_methods()) {
    for (std::size_t r : ranks) {
      const std::size_t total = count_params(method, layers, r);
      const std::size_t block = count_params(method, shape.block, r);
      std::printf("%-18s %5zu %14zu %12zu %12.4f\n", std::string(method_name(method)).c_str(), r,
                  total, block, permille(total, shape.backbone_count));
    }
  }
  return kExitOk;
}

int cmd_report(const std::string& csv_path, bool higher_is_better) {
  std::ifstream in(csv_path);
  if (!in) {
    std::cerr << "cannot open " << csv_path << '\n';
    return kExitConfig;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    const ExperimentReport report = read_csv(ss.str(), higher_is_better);
    for (const auto& ord : compare_methods(report)) {
      std::printf("rank %zu\n", ord.rank);
      for (const auto& a : ord.sorted) {
        std::printf("  %-28s mean %.6g  stderr %s  (n=%zu)\n", a.method.c_str(), a.mean,
                    a.std_error ? std::to_string(*a.std_error).c_str() : "-", a.count);
      }
      for (const auto& w : ord.wins) {
        std::printf("  %s beats %s on %.0f%% of seeds\n", w.better.c_str(), w.worse.c_str(),
                    100.0 * w.fraction);
      }
    }
    return report.any_failed() ? kExitFailed : kExitOk;
  } catch (const std::exception& e) {
    std::cerr << csv_path << ": " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subspace-tuning experiments and checks"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment grid from a config file");
  std::string config_path;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::string out_dir = ".";
  std::string stem = "report";
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--name", stem, "Output file stem");

  auto* grad = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  std::string kind;
  int instances = 10;
  grad->add_option("--kind", kind, "Method name or soft_prompt (default: all)");
  grad->add_option("--instances", instances, "Random instances per method")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "Algebraic identity checks");
  std::uint64_t seed = 0;
  verify->add_option("--seed", seed, "Seed");

  auto* params = app.add_subcommand("params", "Parameter-count table for a model shape");
  std::string shape;
  std::vector<std::size_t> ranks{2, 4, 8, 16};
  params->add_option("shape", shape, "roberta-base or NxM[,NxM...][@blocks][/backbone]")->required();
  params->add_option("--rank", ranks, "Ranks")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Method ordering summary of a CSV report");
  std::string csv_path;
  bool higher = false;
  report->add_option("csv", csv_path, "Report CSV")->required();
  report->add_flag("--higher-is-better", higher, "Metric is an accuracy");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  if (*run) return cmd_run(config_path, threads, out_dir, stem);
  if (*grad) return cmd_gradcheck(kind, instances);
  if (*verify) return cmd_verify(seed);
  if (*params) return cmd_params(shape, ranks);
  return cmd_report(csv_path, higher);
}
