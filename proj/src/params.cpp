#include "subspace/params.hpp"

#include <algorithm>
#include <charconv>

#include "subspace/errors.hpp"

namespace subspace {

std::size_t count_params(Method method, LayerDims dims, std::size_t rank) {
  const std::size_t n = dims.n;
  const std::size_t m = dims.m;
  const std::size_t r = rank;
  if (n == 0 || m == 0) throw ShapeError("count_params: layer dimensions must be positive");
  switch (method) {
    case Method::SamParser: return std::min(n, m);
    case Method::IA3: return m;
    case Method::SSL: return n;
    case Method::SSB: return n + m;
    case Method::BitFit: return m;
    case Method::LoRA: return r * (n + m);
    case Method::AdaLoRA:
    case Method::TriLoRA: return r * (n + m) + r;
    case Method::FLoRA: return r * (n + m) + r * r;
    case Method::SerialAdapter: return 2 * r * m;
    case Method::ParallelAdapter: return r * (n + m);
    case Method::DoRA: return r * (n + m) + m;
    case Method::SVDiff: return std::min(n, m);
    case Method::Spectral: return r * (n + m);
    case Method::Full: return n * m + m;
  }
  throw UnsupportedKind("count_params: unknown method");
}

std::size_t count_params(Method method, const std::vector<LayerDims>& layers, std::size_t rank) {
  std::size_t total = 0;
  for (const LayerDims& d : layers) total += count_params(method, d, rank);
  return total;
}

std::vector<LayerDims> ModelShape::layers() const {
  std::vector<LayerDims> out;
  out.reserve(block.size() * blocks);
  for (std::size_t b = 0; b < blocks; ++b) out.insert(out.end(), block.begin(), block.end());
  return out;
}

ModelShape roberta_base_shape() {
  return {"roberta-base", {{768, 768}, {768, 768}, {768, 3072}}, 12, 124'645'632};
}

namespace {

std::size_t parse_count(std::string_view s, std::string_view whole) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v == 0) {
    throw ShapeError("model shape '" + std::string(whole) + "': bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

ModelShape parse_model_shape(std::string_view text) {
  if (text == "roberta-base") return roberta_base_shape();
  ModelShape shape;
  shape.name = std::string(text);
  std::string_view rest = text;

  std::size_t backbone = 0;
  if (const auto slash = rest.find('/'); slash != std::string_view::npos) {
    backbone = parse_count(rest.substr(slash + 1), text);
    rest = rest.substr(0, slash);
  }
  if (const auto at = rest.find('@'); at != std::string_view::npos) {
    shape.blocks = parse_count(rest.substr(at + 1), text);
    rest = rest.substr(0, at);
  }
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    const auto x = item.find('x');
    if (x == std::string_view::npos) {
      throw ShapeError("model shape '" + std::string(text) + "': expected NxM, got '" +
                       std::string(item) + "'");
    }
    shape.block.push_back({parse_count(item.substr(0, x), text), parse_count(item.substr(x + 1), text)});
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  if (shape.block.empty()) throw ShapeError("model shape '" + std::string(text) + "': no layers");

  if (backbone == 0) {
    for (const LayerDims& d : shape.layers()) backbone += d.n * d.m;
  }
  shape.backbone_count = backbone;
  return shape;
}

}  // namespace subspace
