#include "subspace/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "subspace/errors.hpp"
#include "subspace/params.hpp"
#include "subspace/random.hpp"

namespace subspace {

namespace {

constexpr std::uint64_t kTunerStream = 0x74756e65ULL;
constexpr std::string_view kCsvHeader = "method,rank,seed,params,permille,final_metric,wallclock_ms";

struct Cell {
  Method method;
  RegularizerKind mpc;
  std::size_t rank;
  std::uint64_t seed;
};

std::uint64_t task_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  return mix_seed(cfg.master_seed, seed);
}

struct Backbone {
  std::optional<Model> model;
  std::optional<ToyClassification> data;
  std::string error;
};

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

CellResult run_cell(const ExperimentConfig& cfg, const Cell& cell,
                    const std::map<std::uint64_t, Backbone>& backbones) {
  CellResult res;
  res.method = method_label(cell.method, cell.mpc);
  res.rank = cell.rank;
  res.seed = cell.seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    const std::uint64_t ts = task_seed(cfg, cell.seed);
    Model model;
    Dataset train_data;
    std::optional<RecoveryTask> recovery;
    const ToyClassification* toy = nullptr;
    if (cfg.task.kind == TaskKind::Recovery) {
      recovery = gen_recovery_task(ts, cfg.task.n, cfg.task.m, cfg.task.planted_rank,
                                   cfg.task.noise_std, cfg.task.probes);
      model = recovery->model();
      train_data = recovery->dataset();
    } else {
      const Backbone& bb = backbones.at(cell.seed);
      if (!bb.model) throw DomainError("pretraining failed: " + bb.error);
      model = *bb.model;
      toy = &*bb.data;
      train_data = toy->b_train;
    }

    Rng rng(mix_seed(ts, kTunerStream));
    TunerOptions opts;
    opts.rank = cell.rank;
    opts.activation = cfg.activation;
    for (std::size_t l = 0; l < model.depth(); ++l) {
      const FrozenLayer& fl = model.layer(l);
      model.attach(l, make_tuner(cell.method, fl.weight, fl.bias, opts, rng));
    }
    res.params = model.trainable_count();
    res.backbone = model.backbone_count();
    res.permille = permille(res.params, res.backbone);

    TrainConfig tc;
    tc.steps = cfg.steps;
    tc.learning_rate = cfg.learning_rate;
    tc.optimizer = cfg.optimizer;
    tc.batch_size = cfg.batch_size;
    tc.regularizer = {cell.mpc != RegularizerKind::None ? cell.mpc : implicit_regularizer(cell.method),
                      cfg.lambda};
    tc.nonlinear_activation = cfg.activation;
    tc.scale = cfg.scale;
    tc.seed = ts;
    const TrainTrace trace = train(model, train_data, tc);
    res.final_metric = toy ? accuracy(predict(model, toy->b_test.inputs), toy->b_test.labels)
                           : trace.final_loss;
  } catch (const std::exception& e) {
    res.failed = true;
    res.reason = e.what();
    res.final_metric = std::nan("");
  }
  if (cfg.timing) {
    res.wallclock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  }
  return res;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool ExperimentReport::any_failed() const {
  return std::any_of(rows.begin(), rows.end(), [](const CellResult& r) { return r.failed; });
}

std::vector<CellAggregate> ExperimentReport::aggregates() const {
  std::vector<CellAggregate> out;
  std::vector<std::vector<double>> values;
  for (const CellResult& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const CellAggregate& a) {
      return a.method == r.method && a.rank == r.rank;
    });
    if (it == out.end()) {
      out.push_back({r.method, r.rank, 0, 0.0, 0.0, std::nullopt});
      values.emplace_back();
      it = out.end() - 1;
    }
    if (!r.failed) values[static_cast<std::size_t>(it - out.begin())].push_back(r.final_metric);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& v = values[i];
    CellAggregate& a = out[i];
    a.count = v.size();
    if (v.empty()) {
      a.mean = std::nan("");
      continue;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    a.mean = sum / static_cast<double>(v.size());
    if (v.size() >= 2) {
      double ss = 0.0;
      for (double x : v) ss += (x - a.mean) * (x - a.mean);
      a.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
      a.std_error = a.stddev / std::sqrt(static_cast<double>(v.size()));
    }
  }
  return out;
}

std::string method_label(Method method, RegularizerKind mpc) {
  std::string label(method_name(method));
  if (mpc != RegularizerKind::None) label += "+mpc_" + std::string(to_string(mpc));
  return label;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, unsigned threads) {
  std::vector<Cell> cells;
  for (Method method : cfg.methods)
    for (RegularizerKind mpc : cfg.mpc)
      for (std::size_t rank : cfg.ranks)
        for (std::uint64_t seed : cfg.seeds) cells.push_back({method, mpc, rank, seed});

  std::map<std::uint64_t, Backbone> backbones;
  if (cfg.task.kind == TaskKind::Classification) {
    for (std::uint64_t seed : cfg.seeds) backbones[seed];
    std::vector<std::uint64_t> keys;
    for (const auto& [seed, bb] : backbones) keys.push_back(seed);
    parallel_for(keys.size(), threads, [&](std::size_t i) {
      Backbone& bb = backbones.at(keys[i]);
      try {
        const std::uint64_t ts = task_seed(cfg, keys[i]);
        bb.data = gen_toy_classification(ts, cfg.task.data);
        bb.model = pretrain_backbone(bb.data->a_train, ts, cfg.task.pretrain);
      } catch (const std::exception& e) {
        bb.error = e.what();
      }
    });
  }

  ExperimentReport report;
  report.higher_is_better = cfg.task.kind == TaskKind::Classification;
  report.rows.resize(cells.size());
  parallel_for(cells.size(), threads,
               [&](std::size_t i) { report.rows[i] = run_cell(cfg, cells[i], backbones); });
  return report;
}

std::string to_csv(const ExperimentReport& report) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const CellResult& r : report.rows) {
    out += r.method + ',' + std::to_string(r.rank) + ',' + std::to_string(r.seed) + ',' +
           std::to_string(r.params) + ',' + format_double(r.permille) + ',' +
           format_double(r.final_metric) + ',' + std::to_string(r.wallclock_ms) + '\n';
  }
  return out;
}

std::string to_json(const ExperimentReport& report) {
  using nlohmann::json;
  json rows = json::array();
  for (const CellResult& r : report.rows) {
    json row{{"method", r.method},     {"rank", r.rank},         {"seed", r.seed},
             {"params", r.params},     {"backbone", r.backbone}, {"permille", r.permille},
             {"wallclock_ms", r.wallclock_ms}, {"status", r.failed ? "failed" : "ok"}};
    row["final_metric"] = r.failed ? json(nullptr) : json(r.final_metric);
    if (r.failed) row["reason"] = r.reason;
    rows.push_back(std::move(row));
  }
  json aggs = json::array();
  for (const CellAggregate& a : report.aggregates()) {
    json agg{{"method", a.method}, {"rank", a.rank}, {"count", a.count}};
    agg["mean"] = a.count ? json(a.mean) : json(nullptr);
    agg["std"] = a.count >= 2 ? json(a.stddev) : json(nullptr);
    agg["stderr"] = a.std_error ? json(*a.std_error) : json(nullptr);
    aggs.push_back(std::move(agg));
  }
  const json doc{{"metric", report.higher_is_better ? "test_accuracy" : "final_mse"},
                 {"rows", std::move(rows)},
                 {"aggregates", std::move(aggs)}};
  return doc.dump(2) + '\n';
}

ExperimentReport read_csv(std::string_view text, bool higher_is_better) {
  ExperimentReport report;
  report.higher_is_better = higher_is_better;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kCsvHeader) throw ConfigError(1, "header", "expected '" + std::string(kCsvHeader) + "'");
      continue;
    }
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string item; std::getline(ls, item, ',');) f.push_back(item);
    if (f.size() != 7) throw ConfigError(line_no, "", "expected 7 columns");
    try {
      CellResult r;
      r.method = f[0];
      r.rank = std::stoull(f[1]);
      r.seed = std::stoull(f[2]);
      r.params = std::stoull(f[3]);
      r.permille = std::strtod(f[4].c_str(), nullptr);
      r.final_metric = std::strtod(f[5].c_str(), nullptr);
      r.wallclock_ms = std::stoll(f[6]);
      r.failed = std::isnan(r.final_metric);
      if (r.failed) r.reason = "failed in source run";
      report.rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ConfigError(line_no, "", "malformed number");
    }
  }
  return report;
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir,
                  const std::string& stem) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / (stem + ".csv"), std::ios::binary) << to_csv(report);
  std::ofstream(dir / (stem + ".json"), std::ios::binary) << to_json(report);
}

namespace {

std::map<std::uint64_t, double> seed_metrics(const ExperimentReport& report, std::string_view method,
                                             std::size_t rank) {
  std::map<std::uint64_t, double> out;
  for (const CellResult& r : report.rows)
    if (!r.failed && r.method == method && r.rank == rank) out[r.seed] = r.final_metric;
  return out;
}

double wins_between(const std::map<std::uint64_t, double>& a, const std::map<std::uint64_t, double>& b,
                    bool higher_is_better) {
  double wins = 0.0;
  std::size_t shared = 0;
  for (const auto& [seed, va] : a) {
    const auto it = b.find(seed);
    if (it == b.end()) continue;
    ++shared;
    const double vb = it->second;
    if (va == vb) wins += 0.5;
    else if ((va > vb) == higher_is_better) wins += 1.0;
  }
  if (shared == 0) throw ShapeError("win_fraction: no shared seeds");
  return wins / static_cast<double>(shared);
}

}  // namespace

double win_fraction(const ExperimentReport& report, std::string_view a, std::string_view b,
                    std::size_t rank) {
  return wins_between(seed_metrics(report, a, rank), seed_metrics(report, b, rank),
                      report.higher_is_better);
}

std::vector<RankOrdering> compare_methods(const ExperimentReport& report) {
  std::vector<RankOrdering> out;
  const auto aggs = report.aggregates();
  std::vector<std::size_t> ranks;
  for (const auto& a : aggs)
    if (std::find(ranks.begin(), ranks.end(), a.rank) == ranks.end()) ranks.push_back(a.rank);
  std::sort(ranks.begin(), ranks.end());

  for (std::size_t rank : ranks) {
    RankOrdering ord;
    ord.rank = rank;
    for (const auto& a : aggs)
      if (a.rank == rank) ord.sorted.push_back(a);

    std::map<std::string, std::map<std::uint64_t, double>> per_method;
    for (const auto& a : ord.sorted) per_method[a.method] = seed_metrics(report, a.method, rank);
    const auto& reference = per_method.at(ord.sorted.front().method);
    for (const auto& [method, metrics] : per_method) {
      const bool same = metrics.size() == reference.size() &&
                        std::equal(metrics.begin(), metrics.end(), reference.begin(),
                                   [](const auto& x, const auto& y) { return x.first == y.first; });
      if (!same) {
        throw ShapeError("compare_methods: '" + method + "' and '" + ord.sorted.front().method +
                         "' do not share seeds at rank " + std::to_string(rank));
      }
    }

    std::stable_sort(ord.sorted.begin(), ord.sorted.end(), [&](const CellAggregate& x, const CellAggregate& y) {
      return report.higher_is_better ? x.mean > y.mean : x.mean < y.mean;
    });
    for (std::size_t i = 0; i < ord.sorted.size(); ++i)
      for (std::size_t j = i + 1; j < ord.sorted.size(); ++j) {
        const auto& a = ord.sorted[i].method;
        const auto& b = ord.sorted[j].method;
        if (reference.empty()) continue;
        ord.wins.push_back({a, b, wins_between(per_method[a], per_method[b], report.higher_is_better)});
      }
    out.push_back(std::move(ord));
  }
  return out;
}

}  // namespace subspace
