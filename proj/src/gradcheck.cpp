#include "subspace/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "subspace/errors.hpp"
#include "subspace/model.hpp"
#include "subspace/random.hpp"
#include "subspace/reconstruction.hpp"
#include "subspace/train.hpp"

namespace subspace {

double gradient_relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("gradient_relative_error: length mismatch");
  double diff = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) diff += (a[k] - b[k]) * (a[k] - b[k]);
  const double scale = std::max(norm2(a), norm2(b));
  if (scale < 1e-12) return 0.0;
  return std::sqrt(diff) / scale;
}

namespace {

constexpr std::size_t kWidths[] = {5, 6, 4};
constexpr std::size_t kBatch = 3;
constexpr std::size_t kRank = 2;
constexpr double kLambda = 0.1;
constexpr int kMaxRedraws = 200;

struct Instance {
  Model model;
  Dataset data;
};

Instance draw_instance(Method method, int index, Rng& rng) {
  const Activation hidden = index % 2 == 0 ? Activation::Tanh : Activation::Relu;
  std::vector<FrozenLayer> layers;
  for (std::size_t l = 0; l + 1 < std::size(kWidths); ++l) {
    layers.push_back({rng.gaussian(kWidths[l], kWidths[l + 1], 0.7),
                      rng.gaussian_vector(kWidths[l + 1], 0.1),
                      l + 2 == std::size(kWidths) ? Activation::Identity : hidden});
  }
  Instance inst{Model(std::move(layers)), {}};
  TunerOptions opts;
  opts.rank = kRank;
  opts.scale = 1.0 + 0.5 * rng.uniform();
  opts.activation = index % 3 == 0 ? Activation::Tanh : Activation::Relu;
  for (std::size_t l = 0; l < inst.model.depth(); ++l) {
    const FrozenLayer& fl = inst.model.layer(l);
    TunerState t = make_tuner(method, fl.weight, fl.bias, opts, rng);
    // Move away from the fresh state so that no factor is identically zero.
    for (auto& p : trainables(t))
      for (double& v : p.values) v += rng.normal(0.0, 0.3);
    inst.model.attach(l, std::move(t));
  }
  inst.data.inputs = rng.gaussian(kBatch, kWidths[0]);
  if (index >= 5) {
    inst.data.loss = LossKind::SoftmaxCrossEntropy;
    for (std::size_t i = 0; i < kBatch; ++i) {
      inst.data.labels.push_back(static_cast<int>(rng.next() % kWidths[std::size(kWidths) - 1]));
    }
  } else {
    inst.data.targets = rng.gaussian(kBatch, kWidths[std::size(kWidths) - 1]);
  }
  return inst;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck(std::span<const Method> methods,
                                           const GradCheckOptions& opts) {
  std::vector<GradCheckResult> results;
  for (Method method : methods) {
    const RegularizerSpec reg{implicit_regularizer(method), kLambda};
    Rng rng(mix_seed(opts.seed, static_cast<std::uint64_t>(method)));
    for (int index = 0; index < opts.instances; ++index) {
      Instance inst = draw_instance(method, index, rng);
      ForwardCache cache = forward(inst.model, inst.data.inputs);
      for (int redraw = 0; near_kink(inst.model, cache, opts.kink_margin); ++redraw) {
        if (redraw == kMaxRedraws) throw DomainError("run_gradcheck: could not avoid ReLU kinks");
        inst = draw_instance(method, index, rng);
        cache = forward(inst.model, inst.data.inputs);
      }

      const LossValue lv = evaluate_loss(inst.model, inst.data);
      ModelGradients grads = backward(inst.model, cache, lv.grad);
      add_regularizer_grad(inst.model, reg, grads);

      for (std::size_t l = 0; l < inst.model.depth(); ++l) {
        auto params = trainables(*inst.model.tuner(l));
        auto analytic = trainables(*grads[l]);
        for (std::size_t p = 0; p < params.size(); ++p) {
          const Vector numeric = finite_diff_grad(
              [&] { return objective(inst.model, inst.data, reg); }, params[p].values,
              opts.epsilon);
          GradCheckResult r;
          r.method = std::string(method_name(method));
          r.tensor = "L" + std::to_string(l) + "." + std::string(params[p].name);
          r.instance = index;
          r.rel_error = gradient_relative_error(analytic[p].values, numeric);
          r.pass = r.rel_error <= opts.tolerance;
          results.push_back(std::move(r));
        }
      }
    }
  }
  return results;
}

std::vector<GradCheckResult> run_soft_prompt_gradcheck(const GradCheckOptions& opts) {
  std::vector<GradCheckResult> results;
  Rng rng(mix_seed(opts.seed, 0x70726f6d7074ULL));
  for (int index = 0; index < opts.instances; ++index) {
    const std::size_t prompt_rows = 1 + static_cast<std::size_t>(index % 3);
    const Matrix x = rng.gaussian(kBatch, kWidths[0]);
    const Matrix w = rng.gaussian(kWidths[0], kWidths[1]);
    Matrix prompt = rng.gaussian(prompt_rows, kWidths[1]);
    const Matrix target = rng.gaussian(prompt_rows + kBatch, kWidths[1]);

    const LossValue lv = mse_loss(soft_prompt_forward(x, w, prompt), target);
    const Matrix analytic = soft_prompt_backward(lv.grad, prompt_rows);
    const Vector numeric = finite_diff_grad(
        [&] { return mse_loss(soft_prompt_forward(x, w, prompt), target).value; },
        prompt.values(), opts.epsilon);

    GradCheckResult r;
    r.method = "soft_prompt";
    r.tensor = "prompt";
    r.instance = index;
    r.rel_error = gradient_relative_error(analytic.values(), numeric);
    r.pass = r.rel_error <= opts.tolerance;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace subspace
