#include "subspace/tasks.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "subspace/errors.hpp"
#include "subspace/random.hpp"
#include "subspace/svd.hpp"

namespace subspace {

Dataset RecoveryTask::dataset() const {
  Dataset d;
  d.inputs = probe_inputs;
  d.targets = targets;
  d.loss = LossKind::MeanSquared;
  return d;
}

Model RecoveryTask::model() const {
  return Model({FrozenLayer{w, Vector(w.cols(), 0.0), Activation::Identity}});
}

RecoveryTask gen_recovery_task(std::uint64_t seed, std::size_t n, std::size_t m,
                               std::size_t planted_rank, double noise_std, std::size_t probes) {
  if (n == 0 || m == 0) throw ShapeError("gen_recovery_task: empty weight");
  if (planted_rank > std::min(n, m)) {
    throw ShapeError("gen_recovery_task: planted rank " + std::to_string(planted_rank) +
                     " exceeds min(n, m) = " + std::to_string(std::min(n, m)));
  }
  if (noise_std < 0.0) throw DomainError("gen_recovery_task: negative noise level");

  Rng rng(seed);
  RecoveryTask task;
  task.planted_rank = planted_rank;
  task.noise_std = noise_std;
  task.w = rng.gaussian(n, m, 1.0 / std::sqrt(static_cast<double>(n)));
  task.w_star = task.w;
  if (planted_rank > 0) {
    const double s = 1.0 / std::sqrt(static_cast<double>(planted_rank));
    const Matrix x = rng.gaussian(n, planted_rank, s);
    const Matrix y = rng.gaussian(m, planted_rank, s);
    task.w_star += matmul_nt(x, y);
  }
  if (noise_std > 0.0) task.w_star += rng.gaussian(n, m, noise_std);
  task.probe_inputs = rng.gaussian(probes, n);
  task.targets = matmul(task.probe_inputs, task.w_star);
  return task;
}

namespace {

struct Component {
  double x, y;
  int label;
};

constexpr std::array<Component, 4> kComponents{{
    {-2.0, -0.5, 0},
    {-0.5, -2.0, 0},
    {2.0, 0.5, 1},
    {0.5, 2.0, 1},
}};
constexpr double kComponentStd = 0.8;

Dataset sample_mixture(Rng& rng, std::size_t count, double angle, double sx, double sy) {
  Dataset d;
  d.loss = LossKind::SoftmaxCrossEntropy;
  d.inputs = Matrix(count, 2);
  d.labels.resize(count);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (std::size_t i = 0; i < count; ++i) {
    // Cycling through components keeps both labels at exactly half.
    const Component& k = kComponents[i % kComponents.size()];
    const double px = k.x + rng.normal(0.0, kComponentStd);
    const double py = k.y + rng.normal(0.0, kComponentStd);
    d.inputs(i, 0) = c * px - s * py + sx;
    d.inputs(i, 1) = s * px + c * py + sy;
    d.labels[i] = k.label;
  }
  return d;
}

}  // namespace

ToyClassification gen_toy_classification(std::uint64_t seed, const ToyClassificationOptions& opts) {
  Rng rng(seed);
  const double angle = opts.rotation_degrees * std::numbers::pi / 180.0;
  ToyClassification t;
  t.a_train = sample_mixture(rng, opts.train_size, 0.0, 0.0, 0.0);
  t.a_test = sample_mixture(rng, opts.test_size, 0.0, 0.0, 0.0);
  t.b_train = sample_mixture(rng, opts.train_size, angle, opts.shift_x, opts.shift_y);
  t.b_test = sample_mixture(rng, opts.test_size, angle, opts.shift_x, opts.shift_y);
  return t;
}

double linear_probe_accuracy(const Dataset& train, const Dataset& test) {
  const auto classes = [](const Dataset& d) {
    int k = 0;
    for (int y : d.labels) k = std::max(k, y + 1);
    return static_cast<std::size_t>(k);
  };
  const std::size_t k = std::max(classes(train), classes(test));
  const auto with_bias = [](const Matrix& x) {
    return hstack(x, Matrix(x.rows(), 1, 1.0));
  };
  Matrix onehot(train.size(), k);
  for (std::size_t i = 0; i < train.size(); ++i) onehot(i, static_cast<std::size_t>(train.labels[i])) = 1.0;
  const Matrix coef = matmul(pinv(with_bias(train.inputs)), onehot);
  return accuracy(matmul(with_bias(test.inputs), coef), test.labels);
}

Model pretrain_backbone(const Dataset& data, std::uint64_t seed, const PretrainOptions& opts) {
  Rng rng(mix_seed(seed, 0x62616b65ULL));
  Model model = Model::mlp(opts.widths, Activation::Relu, Activation::Identity, rng);
  TunerOptions tuner_opts;
  for (std::size_t l = 0; l < model.depth(); ++l) {
    const FrozenLayer& fl = model.layer(l);
    model.attach(l, make_tuner(Method::Full, fl.weight, fl.bias, tuner_opts, rng));
  }
  TrainConfig cfg;
  cfg.steps = opts.steps;
  cfg.learning_rate = opts.learning_rate;
  cfg.batch_size = opts.batch_size;
  cfg.seed = seed;
  train(model, data, cfg);
  return model.merged();
}

}  // namespace subspace
