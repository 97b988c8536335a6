#include "subspace/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "subspace/errors.hpp"
#include "subspace/random.hpp"

namespace subspace {

LossValue mse_loss(const Matrix& output, const Matrix& target) {
  require_shape(target, output.rows(), output.cols(), "mse_loss target");
  LossValue lv{0.0, Matrix(output.rows(), output.cols())};
  const double count = static_cast<double>(output.size());
  auto o = output.values();
  auto t = target.values();
  auto g = lv.grad.values();
  for (std::size_t k = 0; k < o.size(); ++k) {
    const double diff = o[k] - t[k];
    lv.value += diff * diff;
    g[k] = 2.0 * diff / count;
  }
  lv.value /= count;
  return lv;
}

LossValue cross_entropy_loss(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) throw ShapeError("cross_entropy_loss: label count");
  LossValue lv{0.0, Matrix(logits.rows(), logits.cols())};
  const double batch = static_cast<double>(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row_span(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    const auto label = static_cast<std::size_t>(labels[i]);
    if (label >= row.size()) throw ShapeError("cross_entropy_loss: label out of range");
    lv.value += log_z - row[label];
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double p = std::exp(row[j] - log_z);
      lv.grad(i, j) = (p - (j == label ? 1.0 : 0.0)) / batch;
    }
  }
  lv.value /= batch;
  return lv;
}

double accuracy(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) throw ShapeError("accuracy: label count");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row_span(i);
    const auto arg = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (arg == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.loss = loss;
  out.inputs = Matrix(rows.size(), inputs.cols());
  if (!targets.empty()) out.targets = Matrix(rows.size(), targets.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::copy_n(inputs.row_span(rows[k]).begin(), inputs.cols(), out.inputs.row_span(k).begin());
    if (!targets.empty()) {
      std::copy_n(targets.row_span(rows[k]).begin(), targets.cols(), out.targets.row_span(k).begin());
    }
    if (!labels.empty()) out.labels.push_back(labels[rows[k]]);
  }
  return out;
}

LossValue evaluate_loss(const Model& model, const Dataset& data, ForwardCache* cache) {
  ForwardCache local = forward(model, data.inputs);
  LossValue lv = data.loss == LossKind::MeanSquared ? mse_loss(local.output, data.targets)
                                                    : cross_entropy_loss(local.output, data.labels);
  if (cache) *cache = std::move(local);
  return lv;
}

namespace {

void require_pair_for(const TunerState& t, std::size_t layer) {
  if (!has_low_rank_pair(t)) {
    throw UnsupportedKind("regularizer: layer " + std::to_string(layer) +
                          " has no (A, B) factor pair to constrain");
  }
}

}  // namespace

double regularizer_value(const Model& model, const RegularizerSpec& reg) {
  if (!reg.is_penalty()) return 0.0;
  double total = 0.0;
  for (std::size_t l = 0; l < model.depth(); ++l) {
    const auto& t = model.tuner(l);
    if (!t) continue;
    require_pair_for(*t, l);
    TunerState copy = *t;
    const LowRankPair p = low_rank_pair(copy);
    total += mpc_value(reg.kind, *p.a, *p.b);
  }
  return reg.lambda * total;
}

void add_regularizer_grad(const Model& model, const RegularizerSpec& reg, ModelGradients& grads) {
  if (!reg.is_penalty() || reg.lambda == 0.0) return;
  for (std::size_t l = 0; l < model.depth(); ++l) {
    const auto& t = model.tuner(l);
    if (!t) continue;
    require_pair_for(*t, l);
    TunerState copy = *t;
    const LowRankPair p = low_rank_pair(copy);
    const MpcGradient g = mpc_grad(reg.kind, *p.a, *p.b);
    const LowRankPair dst = low_rank_pair(*grads[l]);
    *dst.a += reg.lambda * g.grad_a;
    *dst.b += reg.lambda * g.grad_b;
  }
}

double objective(const Model& model, const Dataset& data, const RegularizerSpec& reg) {
  return evaluate_loss(model, data).value + regularizer_value(model, reg);
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, AdamParams adam)
    : kind_(kind), lr_(learning_rate), adam_(adam) {
  if (!(learning_rate > 0.0)) throw DomainError("Optimizer: learning rate must be positive");
}

void Optimizer::step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads) {
  if (params.size() != grads.size()) throw ShapeError("Optimizer::step: parameter/gradient count");
  if (kind_ == OptimizerKind::Sgd) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto x = params[p].values;
      auto g = grads[p].values;
      for (std::size_t k = 0; k < x.size(); ++k) x[k] -= lr_ * g[k];
    }
    return;
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.values.size(), 0.0);
      v_.emplace_back(p.values.size(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto x = params[p].values;
    auto g = grads[p].values;
    Vector& m = m_[p];
    Vector& v = v_[p];
    if (m.size() != x.size()) throw ShapeError("Optimizer::step: parameter layout changed");
    for (std::size_t k = 0; k < x.size(); ++k) {
      m[k] = adam_.beta1 * m[k] + (1.0 - adam_.beta1) * g[k];
      v[k] = adam_.beta2 * v[k] + (1.0 - adam_.beta2) * g[k] * g[k];
      x[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + adam_.epsilon);
    }
  }
}

std::vector<ParamView> model_trainables(Model& model) {
  std::vector<ParamView> out;
  for (std::size_t l = 0; l < model.depth(); ++l) {
    if (auto& t = model.tuner(l)) {
      auto views = trainables(*t);
      out.insert(out.end(), views.begin(), views.end());
    }
  }
  return out;
}

std::vector<ParamView> gradient_views(ModelGradients& grads) {
  std::vector<ParamView> out;
  for (auto& g : grads) {
    if (g) {
      auto views = trainables(*g);
      out.insert(out.end(), views.begin(), views.end());
    }
  }
  return out;
}

TrainTrace train(Model& model, const Dataset& data, const TrainConfig& config) {
  if (config.steps < 1) throw DomainError("train: steps must be >= 1");
  if (data.size() == 0) throw ShapeError("train: empty dataset");
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t l = 0; l < model.depth(); ++l) {
    auto& t = model.tuner(l);
    if (!t) continue;
    if (config.regularizer.kind == RegularizerKind::Nonlinear) {
      auto* ext = std::get_if<ExtensionState>(&*t);
      if (!ext) throw UnsupportedKind("train: MPC_n needs a LoRA tuner on layer " + std::to_string(l));
      *t = mpc_n_wrap(*ext, config.nonlinear_activation);
    }
    if (config.scale) {
      if (auto* ext = std::get_if<ExtensionState>(&*t)) ext->scale = *config.scale;
      if (auto* comb = std::get_if<CombinationState>(&*t)) comb->scale = *config.scale;
    }
  }

  TrainTrace trace;
  trace.loss_per_step.reserve(static_cast<std::size_t>(config.steps));
  Optimizer opt(config.optimizer, config.learning_rate);
  const std::vector<ParamView> params = model_trainables(model);

  const std::size_t n = data.size();
  const bool full_batch = config.batch_size == 0 || config.batch_size >= n;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(config.seed, 0x7261696eULL));
  std::size_t cursor = n;

  for (int step = 0; step < config.steps; ++step) {
    Dataset batch;
    const Dataset* current = &data;
    if (!full_batch) {
      if (cursor + config.batch_size > n) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        cursor = 0;
      }
      batch = data.subset(std::span<const std::size_t>(order).subspan(cursor, config.batch_size));
      cursor += config.batch_size;
      current = &batch;
    }
    ForwardCache cache;
    const LossValue lv = evaluate_loss(model, *current, &cache);
    if (!std::isfinite(lv.value)) throw DivergenceError(step, "non-finite loss");
    trace.loss_per_step.push_back(lv.value);
    if (params.empty()) continue;

    ModelGradients grads = backward(model, cache, lv.grad);
    add_regularizer_grad(model, config.regularizer, grads);
    opt.step(params, gradient_views(grads));
  }

  trace.final_loss = evaluate_loss(model, data).value;
  if (!std::isfinite(trace.final_loss)) throw DivergenceError(config.steps, "non-finite final loss");
  for (std::size_t l = 0; l < model.depth(); ++l) trace.final_params.push_back(model.tuner(l));
  trace.wall_clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  return trace;
}

Vector finite_diff_grad(const std::function<double()>& loss, std::span<double> params,
                        double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("finite_diff_grad: epsilon must be positive");
  Vector g(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + epsilon;
    const double up = loss();
    params[k] = saved - epsilon;
    const double down = loss();
    params[k] = saved;
    g[k] = (up - down) / (2.0 * epsilon);
  }
  return g;
}

}  // namespace subspace
