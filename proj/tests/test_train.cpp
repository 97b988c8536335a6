#include <doctest.h>

#include <cmath>
#include <variant>

#include "subspace/errors.hpp"
#include "subspace/gradcheck.hpp"
#include "subspace/model.hpp"
#include "subspace/random.hpp"
#include "subspace/tasks.hpp"
#include "subspace/train.hpp"

using namespace subspace;

namespace {

// Worst relative error between backward() and central differences over every tuner tensor.
double backward_vs_fd(Model& model, const Dataset& data) {
  ForwardCache cache;
  const LossValue lv = evaluate_loss(model, data, &cache);
  ModelGradients grads = backward(model, cache, lv.grad);
  const std::vector<ParamView> params = model_trainables(model);
  const std::vector<ParamView> analytic = gradient_views(grads);
  REQUIRE(params.size() == analytic.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Vector fd = finite_diff_grad([&] { return evaluate_loss(model, data).value; }, params[k].values, 1e-5);
    worst = std::max(worst, gradient_relative_error(fd, analytic[k].values));
  }
  return worst;
}

Model two_layer(Rng& rng, std::size_t in, std::size_t hidden, std::size_t out) {
  return Model({{rng.gaussian(in, hidden, 0.5), rng.gaussian_vector(hidden, 0.1), Activation::Tanh},
                {rng.gaussian(hidden, out, 0.5), rng.gaussian_vector(out, 0.1), Activation::Identity}});
}

TrainConfig with_steps(int steps, double learning_rate = 1e-2) {
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.learning_rate = learning_rate;
  return cfg;
}

void perturb(Model& model, Rng& rng, double stddev) {
  for (const ParamView& p : model_trainables(model))
    for (double& v : p.values) v += rng.normal() * stddev;
}

}  // namespace

TEST_CASE("forward examples") {
  Rng rng(60);
  const Matrix x = rng.gaussian(4, 3);
  CHECK(predict(Model(std::vector<FrozenLayer>{}), x) == x);

  const Matrix w = rng.gaussian(3, 5);
  Model linear({{w, Vector(5, 0.0), Activation::Identity}});
  CHECK(predict(linear, x) == matmul(x, w));

  TunerOptions opts;
  opts.rank = 2;
  opts.scale = 0.5;
  ExtensionState lora = std::get<ExtensionState>(make_tuner(Method::LoRA, w, Vector(5, 0.0), opts, rng));
  lora.b = rng.gaussian(2, 5);
  linear.attach(0, lora);
  const Matrix manual = matmul(x, w + 0.5 * matmul(lora.a, lora.b));
  CHECK(max_abs_diff(predict(linear, x), manual) <= 1e-12);

  CHECK_THROWS_AS(predict(linear, rng.gaussian(4, 2)), ShapeError);
}

TEST_CASE("fresh tuners leave the model output unchanged") {
  Rng rng(61);
  const std::size_t widths[] = {3, 6, 4};
  const Model base = Model::mlp(widths, Activation::Relu, Activation::Identity, rng);
  const Matrix x = rng.gaussian(5, 3);
  const Matrix expect = predict(base, x);
  for (Method m : peft_methods()) {
    Model tuned = base;
    for (std::size_t l = 0; l < tuned.depth(); ++l)
      tuned.attach(l, make_tuner(m, tuned.layer(l).weight, tuned.layer(l).bias, TunerOptions{.rank = 2}, rng));
    REQUIRE(max_abs_diff(predict(tuned, x), expect) <= 1e-10);
  }
}

TEST_CASE("backward examples") {
  Rng rng(62);
  Model model = two_layer(rng, 3, 4, 2);
  TunerOptions opts;
  opts.rank = 2;
  model.attach(0, make_tuner(Method::LoRA, model.layer(0).weight, model.layer(0).bias, opts, rng));
  const Matrix x = rng.gaussian(6, 3);

  // Zero loss gradient: every tuner gradient is zero.
  const ForwardCache cache = forward(model, x);
  ModelGradients zero = backward(model, cache, Matrix(6, 2));
  for (const ParamView& p : gradient_views(zero))
    for (double v : p.values) CHECK(v == 0.0);
  CHECK_FALSE(zero[1].has_value());

  // Single LoRA layer against finite differences.
  Model single({{rng.gaussian(3, 2), Vector(2, 0.0), Activation::Identity}});
  single.attach(0, make_tuner(Method::LoRA, single.layer(0).weight, single.layer(0).bias, opts, rng));
  perturb(single, rng, 0.3);
  Dataset data{rng.gaussian(8, 3), rng.gaussian(8, 2), {}, LossKind::MeanSquared};
  CHECK(backward_vs_fd(single, data) <= 1e-5);

  Model other({{rng.gaussian(3, 2), Vector(2, 0.0), Activation::Identity}});
  CHECK_THROWS_AS(backward(other, cache, Matrix(6, 2)), DomainError);
}

TEST_CASE("DoRA magnitude gradient on a one-column layer") {
  Rng rng(63);
  const Matrix w{{0.7}, {-1.2}};
  Model model({{w, Vector(1, 0.0), Activation::Identity}});
  TunerOptions opts;
  opts.rank = 1;
  CombinationState dora = std::get<CombinationState>(make_tuner(Method::DoRA, w, Vector(1, 0.0), opts, rng));
  dora.b = Matrix{{0.4}};
  dora.magnitude = Vector{1.7};
  model.attach(0, dora);

  const Matrix x{{0.3, 0.9}};
  const double target = 0.25;
  const double v0 = w(0, 0) + dora.scale * dora.a(0, 0) * dora.b(0, 0);
  const double v1 = w(1, 0) + dora.scale * dora.a(1, 0) * dora.b(0, 0);
  const double norm = std::hypot(v0, v1);
  const double direction = (x(0, 0) * v0 + x(0, 1) * v1) / norm;
  const double out = 1.7 * direction;
  // L = (out − t)², so dL/dm = 2(out − t)·x·v/‖v‖.
  const double hand = 2.0 * (out - target) * direction;

  const ForwardCache cache = forward(model, x);
  CHECK(cache.output(0, 0) == doctest::Approx(out).epsilon(1e-14));
  const LossValue lv = mse_loss(cache.output, Matrix{{target}});
  const ModelGradients g = backward(model, cache, lv.grad);
  CHECK(std::get<CombinationState>(*g[0]).magnitude[0] == doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("finite differences") {
  double theta = 3.0;
  const Vector g = finite_diff_grad([&] { return theta * theta; }, std::span<double>(&theta, 1), 1e-5);
  CHECK(std::abs(g[0] - 6.0) <= 1e-9);
  CHECK(theta == 3.0);

  Vector params{1.0, -2.0, 0.5};
  for (double v : finite_diff_grad([] { return 4.2; }, params, 1e-5)) CHECK(v == 0.0);
  CHECK_THROWS_AS(finite_diff_grad([] { return 0.0; }, params, 0.0), DomainError);
}

TEST_CASE("finite differences agree with backward on a two-layer ADB model") {
  Rng rng(64);
  Model model = two_layer(rng, 4, 5, 3);
  TunerOptions opts;
  opts.rank = 2;
  for (std::size_t l = 0; l < 2; ++l)
    model.attach(l, make_tuner(Method::TriLoRA, model.layer(l).weight, model.layer(l).bias, opts, rng));
  perturb(model, rng, 0.3);
  Dataset data{rng.gaussian(10, 4), rng.gaussian(10, 3), {}, LossKind::MeanSquared};
  CHECK(backward_vs_fd(model, data) <= 1e-5);

  Dataset labelled{rng.gaussian(10, 4), Matrix(), {0, 1, 2, 0, 1, 2, 0, 1, 2, 0}, LossKind::SoftmaxCrossEntropy};
  CHECK(backward_vs_fd(model, labelled) <= 1e-5);
}

TEST_CASE("gradient oracle across every method") {
  GradCheckOptions opts;
  opts.instances = 3;
  const auto results = run_gradcheck(std::vector<Method>(peft_methods().begin(), peft_methods().end()), opts);
  CHECK(results.size() > 0);
  for (const auto& r : results) {
    INFO(r.method << " " << r.tensor << " instance " << r.instance << " rel " << r.rel_error);
    CHECK(r.pass);
  }
  for (const auto& r : run_soft_prompt_gradcheck(opts)) CHECK(r.pass);
}

TEST_CASE("losses") {
  const LossValue mse = mse_loss(Matrix{{1, 2}, {3, 4}}, Matrix{{1, 0}, {3, 2}});
  CHECK(mse.value == 2.0);
  CHECK(mse.grad == Matrix{{0, 1}, {0, 1}});

  const std::vector<int> labels{0, 1};
  const LossValue ce = cross_entropy_loss(Matrix{{0, 0}, {0, 0}}, labels);
  CHECK(ce.value == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(accuracy(Matrix{{2, 1}, {0, 3}}, labels) == 1.0);
  CHECK(accuracy(Matrix{{0, 1}, {0, 3}}, labels) == 0.5);
}

TEST_CASE("train updates tuners only and is reproducible") {
  const RecoveryTask task = gen_recovery_task(7, 12, 10, 2, 0.01, 32);
  Rng rng(65);
  Model model = task.model();
  TunerOptions opts;
  opts.rank = 2;
  model.attach(0, make_tuner(Method::LoRA, task.w, Vector(10, 0.0), opts, rng));
  const std::uint64_t hash = model.frozen_hash();

  TrainConfig cfg;
  cfg.steps = 200;
  cfg.batch_size = 8;
  cfg.seed = 3;
  Model first = model, second = model;
  const TrainTrace a = train(first, task.dataset(), cfg);
  const TrainTrace b = train(second, task.dataset(), cfg);
  CHECK(first.frozen_hash() == hash);
  CHECK(a.loss_per_step == b.loss_per_step);
  CHECK(a.final_loss == b.final_loss);
  CHECK(std::get<ExtensionState>(*a.final_params[0]).b == std::get<ExtensionState>(*b.final_params[0]).b);
  CHECK(a.final_loss < a.loss_per_step.front());

  // A vanishing learning rate leaves the parameters and loss in place.
  Model frozen = model;
  const TrainTrace still = train(frozen, task.dataset(), with_steps(20, 1e-300));
  CHECK(max_abs_diff(std::get<ExtensionState>(*frozen.tuner(0)).a, std::get<ExtensionState>(*model.tuner(0)).a) <= 1e-250);
  for (double l : still.loss_per_step) CHECK(l == doctest::Approx(still.loss_per_step.front()).epsilon(1e-12));

  // No tuner attached: nothing to train.
  Model bare = task.model();
  const TrainTrace none = train(bare, task.dataset(), with_steps(5));
  CHECK(none.loss_per_step.size() == 5);
  for (double l : none.loss_per_step) CHECK(l == none.final_loss);
  CHECK(bare.frozen_hash() == task.model().frozen_hash());
}

TEST_CASE("divergence is reported with the step") {
  const RecoveryTask task = gen_recovery_task(8, 8, 8, 2, 0.0, 16);
  Rng rng(66);
  Model model = task.model();
  model.attach(0, make_tuner(Method::LoRA, task.w, Vector(8, 0.0), {}, rng));
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.learning_rate = 1e6;
  CHECK_THROWS_AS(train(model, task.dataset(), cfg), DivergenceError);
  CHECK_THROWS_AS(train(model, task.dataset(), with_steps(0)), DomainError);
}

TEST_CASE("FLoRA recovers the planted update") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RecoveryTask task = gen_recovery_task(seed, 32, 32, 4, 0.01);
    Rng rng(mix_seed(seed, 1));
    Model model = task.model();
    TunerOptions opts;
    opts.rank = 4;
    model.attach(0, make_tuner(Method::FLoRA, task.w, Vector(32, 0.0), opts, rng));
    const TrainTrace t = train(model, task.dataset(), with_steps(2000));
    INFO("seed " << seed << " initial " << t.loss_per_step.front() << " final " << t.final_loss);
    CHECK(t.final_loss < 0.01 * t.loss_per_step.front());
    // Average over the last tenth is below the first tenth.
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 200; ++i) {
      head += t.loss_per_step[i];
      tail += t.loss_per_step[1800 + i];
    }
    CHECK(tail < head);
  }
}
