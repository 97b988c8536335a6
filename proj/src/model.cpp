#include "subspace/model.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "subspace/errors.hpp"

namespace subspace {

Model::Model(std::vector<FrozenLayer> layers, std::uint64_t seed)
    : layers_(std::move(layers)), tuners_(layers_.size()), seed_(seed) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const FrozenLayer& l = layers_[i];
    if (l.bias.size() != l.weight.cols()) {
      throw ShapeError("Model: layer " + std::to_string(i) + " bias length != output width");
    }
    if (i > 0 && layers_[i - 1].weight.cols() != l.weight.rows()) {
      throw ShapeError("Model: layer " + std::to_string(i) + " does not chain");
    }
  }
}

Model Model::mlp(std::span<const std::size_t> widths, Activation hidden, Activation output,
                 Rng& rng) {
  if (widths.size() < 2) throw ShapeError("Model::mlp: need at least input and output widths");
  std::vector<FrozenLayer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(widths[i]));
    layers.push_back({rng.gaussian(widths[i], widths[i + 1], stddev), Vector(widths[i + 1], 0.0),
                      i + 2 == widths.size() ? output : hidden});
  }
  return Model(std::move(layers));
}

void Model::attach(std::size_t i, TunerState state) {
  const Matrix& w = layers_.at(i).weight;
  if (std::holds_alternative<ReconstructionState>(state) &&
      std::get<ReconstructionState>(state).kind == ReconstructionKind::SoftPrompt) {
    throw UnsupportedKind("Model::attach: soft prompts change the output row count");
  }
  // Surfaces shape mismatches at attach time rather than in the first forward pass.
  (void)effective_weight(state, w);
  tuners_.at(i) = std::move(state);
}

std::size_t Model::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.rows(); }
std::size_t Model::output_dim() const { return layers_.empty() ? 0 : layers_.back().weight.cols(); }

std::size_t Model::backbone_count() const {
  std::size_t total = 0;
  for (const auto& l : layers_) total += l.weight.size() + l.bias.size();
  return total;
}

std::size_t Model::trainable_count() const {
  std::size_t total = 0;
  for (const auto& t : tuners_)
    if (t) total += subspace::trainable_count(*t);
  return total;
}

std::uint64_t Model::frozen_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::span<const double> values) {
    for (double v : values) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char byte : bytes) {
        h ^= byte;
        h *= 0x100000001b3ULL;
      }
    }
  };
  for (const auto& l : layers_) {
    feed(l.weight.values());
    feed(l.bias);
  }
  return h;
}

Model Model::merged() const {
  std::vector<FrozenLayer> layers = layers_;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!tuners_[i]) continue;
    if (!is_weight_transform(*tuners_[i])) {
      throw UnsupportedKind("Model::merged: adapter tuners cannot be folded into the weight");
    }
    layers[i].weight = effective_weight(*tuners_[i], layers_[i].weight);
    layers[i].bias = effective_bias(*tuners_[i], layers_[i].bias);
  }
  return Model(std::move(layers), seed_);
}

namespace {

void add_bias(Matrix& out, const Vector& bias) {
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row_span(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[j];
  }
}

const ExtensionState* adapter_of(const std::optional<TunerState>& t) {
  if (!t || is_weight_transform(*t)) return nullptr;
  if (const auto* ext = std::get_if<ExtensionState>(&*t)) return ext;
  throw UnsupportedKind("forward: tuner cannot be attached to a dense layer");
}

}  // namespace

ForwardCache forward(const Model& model, const Matrix& x) {
  ForwardCache cache;
  cache.layers.resize(model.depth());
  Matrix h = x;
  for (std::size_t l = 0; l < model.depth(); ++l) {
    const FrozenLayer& layer = model.layer(l);
    const auto& tuner = model.tuner(l);
    LayerCache& lc = cache.layers[l];
    if (h.cols() != layer.weight.rows()) {
      throw ShapeError("forward: layer " + std::to_string(l) + " expects " +
                       std::to_string(layer.weight.rows()) + " inputs, got " +
                       std::to_string(h.cols()));
    }
    lc.input = h;
    if (const ExtensionState* ad = adapter_of(tuner)) {
      lc.weight = layer.weight;
      Matrix base = matmul(h, layer.weight);
      if (ad->kind == ExtensionKind::SerialAdapter) {
        lc.adapter_pre = matmul(base, ad->a);
      } else {
        lc.adapter_pre = matmul(h, ad->a);
      }
      lc.adapter_act = activate(ad->activation, lc.adapter_pre);
      lc.pre_activation = base + ad->scale * matmul(lc.adapter_act, ad->b);
      if (ad->kind == ExtensionKind::SerialAdapter) lc.adapter_base = std::move(base);
      add_bias(lc.pre_activation, layer.bias);
    } else {
      lc.weight = tuner ? effective_weight(*tuner, layer.weight) : layer.weight;
      lc.pre_activation = matmul(h, lc.weight);
      add_bias(lc.pre_activation, tuner ? effective_bias(*tuner, layer.bias) : layer.bias);
    }
    h = activate(layer.activation, lc.pre_activation);
  }
  cache.output = std::move(h);
  return cache;
}

void weight_transform_vjp(const TunerState& state, const Matrix& w, const Matrix& g,
                          TunerState& grad) {
  if (auto* gs = std::get_if<ExtensionState>(&grad)) {
    const auto& s = std::get<ExtensionState>(state);
    const double k = s.scale;
    switch (s.kind) {
      case ExtensionKind::LoRA:
        gs->a = k * matmul_nt(g, s.b);
        gs->b = k * matmul_tn(s.a, g);
        break;
      case ExtensionKind::ADB: {
        gs->a = k * matmul_nt(g, scale_rows(s.d, s.b));
        gs->b = k * matmul_tn(scale_columns(s.a, s.d), g);
        const Matrix atg = matmul_tn(s.a, g);
        for (std::size_t r = 0; r < s.d.size(); ++r) gs->d[r] = k * dot(atg.row_span(r), s.b.row_span(r));
        break;
      }
      case ExtensionKind::AGB:
        gs->a = k * matmul_nt(g, matmul(s.g, s.b));
        gs->b = k * matmul_tn(matmul(s.a, s.g), g);
        gs->g = k * matmul_nt(matmul_tn(s.a, g), s.b);
        break;
      default: throw UnsupportedKind("weight_transform_vjp: adapter kinds are input-dependent");
    }
    return;
  }
  if (auto* gs = std::get_if<ReconstructionState>(&grad)) {
    const auto& s = std::get<ReconstructionState>(state);
    switch (s.kind) {
      case ReconstructionKind::SingularValues: {
        const SvdFactors& f = *s.frozen;
        const Matrix gv = matmul(g, f.v);
        for (std::size_t k = 0; k < gs->sigma_prime.size(); ++k) {
          double acc = 0.0;
          for (std::size_t i = 0; i < w.rows(); ++i) acc += f.u(i, k) * gv(i, k);
          gs->sigma_prime[k] = acc;
        }
        break;
      }
      case ReconstructionKind::IA3:
        for (std::size_t j = 0; j < w.cols(); ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < w.rows(); ++i) acc += g(i, j) * w(i, j);
          gs->d2[j] = acc;
        }
        break;
      case ReconstructionKind::SSL:
        for (std::size_t i = 0; i < w.rows(); ++i) gs->d1[i] = dot(g.row_span(i), w.row_span(i));
        break;
      case ReconstructionKind::SSB:
        gs->d1.assign(w.rows(), 0.0);
        gs->d2.assign(w.cols(), 0.0);
        for (std::size_t i = 0; i < w.rows(); ++i) {
          for (std::size_t j = 0; j < w.cols(); ++j) {
            const double gw = g(i, j) * w(i, j);
            gs->d1[i] += gw * s.d2[j];
            gs->d2[j] += gw * s.d1[i];
          }
        }
        break;
      case ReconstructionKind::BitFit: break;
      case ReconstructionKind::SoftPrompt:
        throw UnsupportedKind("weight_transform_vjp: soft prompts act on output rows");
    }
    return;
  }
  if (auto* gs = std::get_if<CombinationState>(&grad)) {
    const auto& s = std::get<CombinationState>(state);
    switch (s.kind) {
      case CombinationKind::DoRA: {
        Matrix v = w;
        if (s.scale != 0.0) v += s.scale * matmul(s.a, s.b);
        const Vector norms = column_norms(v);
        Matrix dv(v.rows(), v.cols());
        for (std::size_t j = 0; j < v.cols(); ++j) {
          const double c = norms[j];
          double proj = 0.0;  // v̂ᵀg for column j
          for (std::size_t i = 0; i < v.rows(); ++i) proj += v(i, j) * g(i, j);
          proj /= c;
          gs->magnitude[j] = proj;
          const double ratio = s.magnitude[j] / c;
          for (std::size_t i = 0; i < v.rows(); ++i) {
            dv(i, j) = ratio * (g(i, j) - (v(i, j) / c) * proj);
          }
        }
        gs->a = s.scale * matmul_nt(dv, s.b);
        gs->b = s.scale * matmul_tn(s.a, dv);
        break;
      }
      case CombinationKind::SpectralAdapter: {
        const SvdFactors& f = *s.frozen;
        const Vector sigma_r(f.sigma.begin(), f.sigma.begin() + static_cast<std::ptrdiff_t>(s.r));
        const Matrix v_shift = f.v.leading_cols(s.r) + s.b;
        const Matrix u_shift = f.u.leading_cols(s.r) + s.a;
        gs->a = scale_columns(matmul(g, v_shift), sigma_r);
        gs->b = scale_columns(matmul_tn(g, u_shift), sigma_r);
        break;
      }
      case CombinationKind::SVDiff: {
        const SvdFactors& f = *s.frozen;
        const Matrix gv = matmul(g, f.v);
        for (std::size_t k = 0; k < gs->shift.size(); ++k) {
          if (f.sigma[k] + s.shift[k] <= 0.0) {
            gs->shift[k] = 0.0;
            continue;
          }
          double acc = 0.0;
          for (std::size_t i = 0; i < w.rows(); ++i) acc += f.u(i, k) * gv(i, k);
          gs->shift[k] = acc;
        }
        break;
      }
    }
    return;
  }
  std::get<FullState>(grad).delta_weight = g;
}

ModelGradients backward(const Model& model, const ForwardCache& cache, const Matrix& output_grad) {
  if (cache.layers.size() != model.depth()) {
    throw DomainError("backward: forward cache missing or from a different model");
  }
  if (output_grad.rows() != cache.output.rows() || output_grad.cols() != cache.output.cols()) {
    throw ShapeError("backward: output gradient shape does not match forward output");
  }
  ModelGradients grads(model.depth());
  Matrix delta = output_grad;
  for (std::size_t l = model.depth(); l-- > 0;) {
    const FrozenLayer& layer = model.layer(l);
    const LayerCache& lc = cache.layers[l];
    const auto& tuner = model.tuner(l);
    const Matrix dpre = activate_backward(layer.activation, lc.pre_activation, delta);

    if (const ExtensionState* ad = adapter_of(tuner)) {
      TunerState g = zeros_like(*tuner);
      auto& ge = std::get<ExtensionState>(g);
      ge.b = ad->scale * matmul_tn(lc.adapter_act, dpre);
      const Matrix dp =
          activate_backward(ad->activation, lc.adapter_pre, ad->scale * matmul_nt(dpre, ad->b));
      if (ad->kind == ExtensionKind::SerialAdapter) {
        ge.a = matmul_tn(lc.adapter_base, dp);
        delta = matmul_nt(dpre + matmul_nt(dp, ad->a), layer.weight);
      } else {
        ge.a = matmul_tn(lc.input, dp);
        delta = matmul_nt(dpre, layer.weight) + matmul_nt(dp, ad->a);
      }
      grads[l] = std::move(g);
      continue;
    }

    if (tuner) {
      TunerState g = zeros_like(*tuner);
      weight_transform_vjp(*tuner, layer.weight, matmul_tn(lc.input, dpre), g);
      if (auto* rec = std::get_if<ReconstructionState>(&g);
          rec && rec->kind == ReconstructionKind::BitFit) {
        rec->bias = column_sums(dpre);
      }
      if (auto* full = std::get_if<FullState>(&g)) full->delta_bias = column_sums(dpre);
      grads[l] = std::move(g);
    }
    if (l > 0) delta = matmul_nt(dpre, lc.weight);
  }
  return grads;
}

bool near_kink(const Model& model, const ForwardCache& cache, double margin) {
  auto any_small = [margin](const Matrix& m) {
    for (double v : m.values())
      if (std::abs(v) < margin) return true;
    return false;
  };
  for (std::size_t l = 0; l < model.depth(); ++l) {
    const LayerCache& lc = cache.layers.at(l);
    if (model.layer(l).activation == Activation::Relu && any_small(lc.pre_activation)) return true;
    const auto& t = model.tuner(l);
    if (!t) continue;
    if (const auto* ext = std::get_if<ExtensionState>(&*t)) {
      if (ext->activation == Activation::Relu && !lc.adapter_pre.empty() &&
          any_small(lc.adapter_pre)) {
        return true;
      }
    }
    if (const auto* comb = std::get_if<CombinationState>(&*t);
        comb && comb->kind == CombinationKind::SVDiff) {
      for (std::size_t k = 0; k < comb->shift.size(); ++k) {
        if (std::abs(comb->frozen->sigma[k] + comb->shift[k]) < margin) return true;
      }
    }
  }
  return false;
}

}  // namespace subspace
