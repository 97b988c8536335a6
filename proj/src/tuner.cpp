#include "subspace/tuner.hpp"

#include <string>

#include "subspace/errors.hpp"

namespace subspace {

namespace {

struct MethodName {
  Method method;
  std::string_view name;
};

constexpr std::array<MethodName, 15> kMethodNames{{
    {Method::SamParser, "sam_parser"},
    {Method::IA3, "ia3"},
    {Method::SSL, "ssl"},
    {Method::SSB, "ssb"},
    {Method::BitFit, "bitfit"},
    {Method::LoRA, "lora"},
    {Method::AdaLoRA, "adalora"},
    {Method::TriLoRA, "trilora"},
    {Method::FLoRA, "flora"},
    {Method::SerialAdapter, "serial_adapter"},
    {Method::ParallelAdapter, "parallel_adapter"},
    {Method::DoRA, "dora"},
    {Method::SVDiff, "svdiff"},
    {Method::Spectral, "spectral"},
    {Method::Full, "full"},
}};

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

}  // namespace

std::string_view method_name(Method method) {
  for (const auto& entry : kMethodNames)
    if (entry.method == method) return entry.name;
  return "?";
}

Method parse_method(std::string_view name) {
  for (const auto& entry : kMethodNames)
    if (entry.name == name) return entry.method;
  throw UnsupportedKind("unknown method '" + std::string(name) + "'");
}

const std::array<Method, 14>& peft_methods() {
  static const std::array<Method, 14> methods{
      Method::SamParser, Method::IA3,           Method::SSL,
      Method::SSB,       Method::BitFit,        Method::LoRA,
      Method::AdaLoRA,   Method::TriLoRA,       Method::FLoRA,
      Method::SerialAdapter, Method::ParallelAdapter, Method::DoRA,
      Method::SVDiff,    Method::Spectral,
  };
  return methods;
}

RegularizerKind implicit_regularizer(Method method) {
  return method == Method::AdaLoRA ? RegularizerKind::Orthogonal : RegularizerKind::None;
}

TunerState make_tuner(Method method, const Matrix& w, const Vector& bias, const TunerOptions& opts,
                      Rng& rng) {
  const std::size_t n = w.rows();
  const std::size_t m = w.cols();
  const ExtensionInit ext{opts.init_stddev, opts.scale, opts.activation};
  switch (method) {
    case Method::SamParser: return init_reconstruction(ReconstructionKind::SingularValues, w);
    case Method::IA3: return init_reconstruction(ReconstructionKind::IA3, w);
    case Method::SSL: return init_reconstruction(ReconstructionKind::SSL, w);
    case Method::SSB: return init_reconstruction(ReconstructionKind::SSB, w);
    case Method::BitFit: return init_reconstruction(ReconstructionKind::BitFit, w, bias);
    case Method::LoRA: return init_extension(ExtensionKind::LoRA, n, m, opts.rank, rng, ext);
    case Method::AdaLoRA:
    case Method::TriLoRA: return init_extension(ExtensionKind::ADB, n, m, opts.rank, rng, ext);
    case Method::FLoRA: return init_extension(ExtensionKind::AGB, n, m, opts.rank, rng, ext);
    case Method::SerialAdapter:
      return init_extension(ExtensionKind::SerialAdapter, n, m, opts.rank, rng, ext);
    case Method::ParallelAdapter:
      return init_extension(ExtensionKind::ParallelAdapter, n, m, opts.rank, rng, ext);
    case Method::DoRA:
      return init_combination(CombinationKind::DoRA, w, opts.rank, rng, opts.init_stddev, opts.scale);
    case Method::SVDiff: return init_combination(CombinationKind::SVDiff, w, opts.rank, rng);
    case Method::Spectral:
      return init_combination(CombinationKind::SpectralAdapter, w, opts.rank, rng);
    case Method::Full: return FullState{Matrix(n, m), Vector(m, 0.0)};
  }
  throw UnsupportedKind("make_tuner: unknown method");
}

std::vector<ParamView> trainables(TunerState& state) {
  return std::visit(
      overloaded{
          [](ExtensionState& s) {
            std::vector<ParamView> out{{"A", s.a.values()}};
            if (s.kind == ExtensionKind::ADB) out.push_back({"d", s.d});
            if (s.kind == ExtensionKind::AGB) out.push_back({"G", s.g.values()});
            out.push_back({"B", s.b.values()});
            return out;
          },
          [](ReconstructionState& s) {
            switch (s.kind) {
              case ReconstructionKind::SingularValues:
                return std::vector<ParamView>{{"sigma", s.sigma_prime}};
              case ReconstructionKind::IA3: return std::vector<ParamView>{{"d2", s.d2}};
              case ReconstructionKind::SSL: return std::vector<ParamView>{{"d1", s.d1}};
              case ReconstructionKind::SSB:
                return std::vector<ParamView>{{"d1", s.d1}, {"d2", s.d2}};
              case ReconstructionKind::BitFit: return std::vector<ParamView>{{"bias", s.bias}};
              case ReconstructionKind::SoftPrompt:
                return std::vector<ParamView>{{"prompt", s.prompt.values()}};
            }
            return std::vector<ParamView>{};
          },
          [](CombinationState& s) {
            switch (s.kind) {
              case CombinationKind::DoRA:
                return std::vector<ParamView>{
                    {"A", s.a.values()}, {"B", s.b.values()}, {"magnitude", s.magnitude}};
              case CombinationKind::SpectralAdapter:
                return std::vector<ParamView>{{"A", s.a.values()}, {"B", s.b.values()}};
              case CombinationKind::SVDiff: return std::vector<ParamView>{{"shift", s.shift}};
            }
            return std::vector<ParamView>{};
          },
          [](FullState& s) {
            return std::vector<ParamView>{{"W", s.delta_weight.values()}, {"bias", s.delta_bias}};
          },
      },
      state);
}

std::size_t trainable_count(const TunerState& state) {
  TunerState copy = state;
  std::size_t total = 0;
  for (const auto& p : trainables(copy)) total += p.values.size();
  return total;
}

TunerState zeros_like(const TunerState& state) {
  TunerState out = std::visit(
      overloaded{
          [](const ExtensionState& s) -> TunerState { return s; },
          [](const ReconstructionState& s) -> TunerState {
            ReconstructionState copy;
            copy.kind = s.kind;
            copy.sigma_prime = s.sigma_prime;
            copy.d1 = s.d1;
            copy.d2 = s.d2;
            copy.bias = s.bias;
            copy.prompt = s.prompt;
            return copy;
          },
          [](const CombinationState& s) -> TunerState {
            CombinationState copy;
            copy.kind = s.kind;
            copy.a = s.a;
            copy.b = s.b;
            copy.magnitude = s.magnitude;
            copy.shift = s.shift;
            copy.r = s.r;
            copy.scale = s.scale;
            return copy;
          },
          [](const FullState& s) -> TunerState { return s; },
      },
      state);
  for (auto& p : trainables(out))
    for (double& v : p.values) v = 0.0;
  return out;
}

bool is_weight_transform(const TunerState& state) {
  if (const auto* ext = std::get_if<ExtensionState>(&state)) {
    return ext->kind != ExtensionKind::SerialAdapter && ext->kind != ExtensionKind::ParallelAdapter;
  }
  if (const auto* rec = std::get_if<ReconstructionState>(&state)) {
    return rec->kind != ReconstructionKind::SoftPrompt;
  }
  return true;
}

Matrix effective_weight(const TunerState& state, const Matrix& w) {
  return std::visit(overloaded{
                        [&](const ExtensionState& s) { return apply(s, w); },
                        [&](const ReconstructionState& s) { return apply(s, w); },
                        [&](const CombinationState& s) { return apply(s, w); },
                        [&](const FullState& s) { return w + s.delta_weight; },
                    },
                    state);
}

Vector effective_bias(const TunerState& state, const Vector& frozen_bias) {
  if (const auto* rec = std::get_if<ReconstructionState>(&state)) {
    if (rec->kind == ReconstructionKind::BitFit) return rec->bias;
  }
  if (const auto* full = std::get_if<FullState>(&state)) {
    Vector b = frozen_bias;
    for (std::size_t j = 0; j < b.size(); ++j) b[j] += full->delta_bias[j];
    return b;
  }
  return frozen_bias;
}

LowRankPair low_rank_pair(TunerState& state) {
  if (auto* ext = std::get_if<ExtensionState>(&state)) {
    if (ext->kind == ExtensionKind::LoRA || ext->kind == ExtensionKind::ADB ||
        ext->kind == ExtensionKind::AGB) {
      return {&ext->a, &ext->b};
    }
  }
  if (auto* comb = std::get_if<CombinationState>(&state)) {
    if (comb->kind == CombinationKind::DoRA) return {&comb->a, &comb->b};
  }
  return {};
}

bool has_low_rank_pair(const TunerState& state) {
  TunerState copy = state;
  return low_rank_pair(copy).a != nullptr;
}

}  // namespace subspace
