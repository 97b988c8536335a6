#include "subspace/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "subspace/errors.hpp"

namespace subspace {

ConfigError::ConfigError(int line, std::string field, const std::string& message)
    : std::runtime_error("config line " + std::to_string(line) +
                         (field.empty() ? "" : " (" + field + ")") + ": " + message),
      line_(line),
      field_(std::move(field)) {}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    const std::string_view item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  return out;
}

struct Field {
  int line;
  std::string key;
  std::string_view value;

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(line, key, msg); }

  template <class T>
  T integer(std::string_view s) const {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      fail("expected an integer, got '" + std::string(s) + "'");
    }
    return v;
  }
  template <class T>
  T integer() const { return integer<T>(value); }

  double real() const {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
      fail("expected a number, got '" + std::string(value) + "'");
    }
    return v;
  }

  double positive() const {
    const double v = real();
    if (!(v > 0.0)) fail("must be positive");
    return v;
  }

  bool flag() const {
    if (value == "on" || value == "true" || value == "yes" || value == "1") return true;
    if (value == "off" || value == "false" || value == "no" || value == "0") return false;
    fail("expected on/off, got '" + std::string(value) + "'");
  }

  template <class T>
  std::vector<T> integers() const {
    std::vector<T> out;
    for (std::string_view item : split_list(value)) {
      if (const auto dots = item.find(".."); dots != std::string_view::npos) {
        const T lo = integer<T>(trim(item.substr(0, dots)));
        const T hi = integer<T>(trim(item.substr(dots + 2)));
        if (hi < lo) fail("empty range '" + std::string(item) + "'");
        for (T v = lo; v <= hi; ++v) out.push_back(v);
      } else {
        out.push_back(integer<T>(item));
      }
    }
    if (out.empty()) fail("empty list");
    return out;
  }

  template <class F>
  auto parsed_list(F&& parse) const {
    std::vector<decltype(parse(std::string_view{}))> out;
    for (std::string_view item : split_list(value)) {
      try {
        out.push_back(parse(item));
      } catch (const std::invalid_argument& e) {
        fail(e.what());
      }
    }
    if (out.empty()) fail("empty list");
    return out;
  }
};

using Handler = std::function<void(ExperimentConfig&, const Field&)>;

const std::map<std::string, Handler, std::less<>>& top_handlers() {
  static const std::map<std::string, Handler, std::less<>> h{
      {"methods", [](ExperimentConfig& c, const Field& f) { c.methods = f.parsed_list(parse_method); }},
      {"mpc", [](ExperimentConfig& c, const Field& f) { c.mpc = f.parsed_list(parse_regularizer); }},
      {"lambda",
       [](ExperimentConfig& c, const Field& f) {
         c.lambda = f.real();
         if (c.lambda < 0.0) f.fail("must be non-negative");
       }},
      {"ranks",
       [](ExperimentConfig& c, const Field& f) {
         c.ranks = f.integers<std::size_t>();
         for (auto r : c.ranks)
           if (r == 0) f.fail("ranks must be positive");
       }},
      {"seeds", [](ExperimentConfig& c, const Field& f) { c.seeds = f.integers<std::uint64_t>(); }},
      {"steps",
       [](ExperimentConfig& c, const Field& f) {
         c.steps = f.integer<int>();
         if (c.steps < 1) f.fail("must be >= 1");
       }},
      {"lr", [](ExperimentConfig& c, const Field& f) { c.learning_rate = f.positive(); }},
      {"optimizer",
       [](ExperimentConfig& c, const Field& f) {
         if (f.value == "adam") c.optimizer = OptimizerKind::Adam;
         else if (f.value == "sgd") c.optimizer = OptimizerKind::Sgd;
         else f.fail("expected adam or sgd");
       }},
      {"batch", [](ExperimentConfig& c, const Field& f) { c.batch_size = f.integer<std::size_t>(); }},
      {"scale", [](ExperimentConfig& c, const Field& f) { c.scale = f.real(); }},
      {"activation",
       [](ExperimentConfig& c, const Field& f) {
         try {
           c.activation = parse_activation(f.value);
         } catch (const std::invalid_argument& e) {
           f.fail(e.what());
         }
       }},
      {"master_seed", [](ExperimentConfig& c, const Field& f) { c.master_seed = f.integer<std::uint64_t>(); }},
      {"timing", [](ExperimentConfig& c, const Field& f) { c.timing = f.flag(); }},
  };
  return h;
}

const std::map<std::string, Handler, std::less<>>& task_handlers() {
  static const std::map<std::string, Handler, std::less<>> h{
      {"kind",
       [](ExperimentConfig& c, const Field& f) {
         if (f.value == "recovery") c.task.kind = TaskKind::Recovery;
         else if (f.value == "classification") c.task.kind = TaskKind::Classification;
         else f.fail("expected recovery or classification");
       }},
      {"n", [](ExperimentConfig& c, const Field& f) { c.task.n = f.integer<std::size_t>(); }},
      {"m", [](ExperimentConfig& c, const Field& f) { c.task.m = f.integer<std::size_t>(); }},
      {"planted_rank", [](ExperimentConfig& c, const Field& f) { c.task.planted_rank = f.integer<std::size_t>(); }},
      {"noise_std",
       [](ExperimentConfig& c, const Field& f) {
         c.task.noise_std = f.real();
         if (c.task.noise_std < 0.0) f.fail("must be non-negative");
       }},
      {"probes", [](ExperimentConfig& c, const Field& f) { c.task.probes = f.integer<std::size_t>(); }},
      {"train_size", [](ExperimentConfig& c, const Field& f) { c.task.data.train_size = f.integer<std::size_t>(); }},
      {"test_size", [](ExperimentConfig& c, const Field& f) { c.task.data.test_size = f.integer<std::size_t>(); }},
      {"rotation", [](ExperimentConfig& c, const Field& f) { c.task.data.rotation_degrees = f.real(); }},
      {"shift_x", [](ExperimentConfig& c, const Field& f) { c.task.data.shift_x = f.real(); }},
      {"shift_y", [](ExperimentConfig& c, const Field& f) { c.task.data.shift_y = f.real(); }},
      {"widths",
       [](ExperimentConfig& c, const Field& f) {
         c.task.pretrain.widths = f.integers<std::size_t>();
         if (c.task.pretrain.widths.size() < 2) f.fail("need at least two widths");
       }},
      {"pretrain_steps", [](ExperimentConfig& c, const Field& f) { c.task.pretrain.steps = f.integer<int>(); }},
      {"pretrain_lr", [](ExperimentConfig& c, const Field& f) { c.task.pretrain.learning_rate = f.positive(); }},
      {"pretrain_batch", [](ExperimentConfig& c, const Field& f) { c.task.pretrain.batch_size = f.integer<std::size_t>(); }},
  };
  return h;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  bool in_task = false;
  int line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line == "[task]") {
        in_task = true;
        continue;
      }
      throw ConfigError(line_no, "", "unknown section " + std::string(line));
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, "", "expected key = value");
    const Field f{line_no, std::string(trim(line.substr(0, eq))), trim(line.substr(eq + 1))};
    if (f.value.empty()) f.fail("missing value");
    const auto& handlers = in_task ? task_handlers() : top_handlers();
    const auto it = handlers.find(f.key);
    if (it == handlers.end()) f.fail(in_task ? "unknown task key" : "unknown key");
    it->second(cfg, f);
  }
  if (cfg.methods.empty()) throw ConfigError(line_no, "methods", "no methods listed");
  if (cfg.task.kind == TaskKind::Recovery &&
      cfg.task.planted_rank > std::min(cfg.task.n, cfg.task.m)) {
    throw ConfigError(line_no, "planted_rank", "exceeds min(n, m)");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace subspace
