#include "subspace/verify.hpp"

#include <algorithm>
#include <functional>

#include "subspace/combination.hpp"
#include "subspace/extension.hpp"
#include "subspace/random.hpp"
#include "subspace/reconstruction.hpp"
#include "subspace/svd.hpp"
#include "subspace/tuner.hpp"

namespace subspace {

namespace {

std::size_t draw_dim(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.next() % (hi - lo + 1));
}

double gram_residual(const Matrix& gram) {
  return max_abs_diff(gram, Matrix::identity(gram.rows()));
}

VerifyResult check(std::string name, double tolerance, int instances, Rng& rng,
                   const std::function<double(Rng&)>& one) {
  VerifyResult r{std::move(name), 0.0, tolerance, false};
  for (int i = 0; i < instances; ++i) r.residual = std::max(r.residual, one(rng));
  r.pass = r.residual <= tolerance;
  return r;
}

}  // namespace

std::vector<VerifyResult> run_verify(std::uint64_t seed, int instances) {
  Rng rng(mix_seed(seed, 0x766572ULL));
  std::vector<VerifyResult> out;

  out.push_back(check("agb_to_adb_transform", 1e-10, instances, rng, [](Rng& g) {
    const std::size_t n = draw_dim(g, 2, 24), m = draw_dim(g, 2, 24);
    const std::size_t r = draw_dim(g, 1, std::min(n, m));
    const Matrix a = g.gaussian(n, r), gm = g.gaussian(r, r), b = g.gaussian(r, m);
    const EquivalentFactors eq = equivalence_transform(a, gm, b);
    return relative_error(matmul(eq.a_star, eq.b_diamond), matmul(matmul(a, gm), b));
  }));

  out.push_back(check("constrained_factors_a_orthonormal", 1e-9, instances, rng, [](Rng& g) {
    const std::size_t n = draw_dim(g, 2, 24), m = draw_dim(g, 2, 24);
    const ConstrainedFactors f = construct_constrained_factors(g.gaussian(n, m), draw_dim(g, 1, std::min(n, m)));
    return std::max(gram_residual(matmul_tn(f.a, f.a)), gram_residual(matmul_nt(f.b, f.b)));
  }));

  out.push_back(check("constrained_factors_best_rank_r", 1e-10, instances, rng, [](Rng& g) {
    const std::size_t n = draw_dim(g, 2, 24), m = draw_dim(g, 2, 24);
    const std::size_t r = draw_dim(g, 1, std::min(n, m));
    const Matrix target = g.gaussian(n, m);
    const ConstrainedFactors f = construct_constrained_factors(target, r);
    return relative_error(matmul(scale_columns(f.a, f.sigma), f.b), truncate(svd(target), r));
  }));

  out.push_back(check("ssb_is_ssl_then_ia3", 1e-14, instances, rng, [](Rng& g) {
    const Matrix w = g.gaussian(draw_dim(g, 1, 16), draw_dim(g, 1, 16));
    ReconstructionState s = init_reconstruction(ReconstructionKind::SSB, w);
    s.d1 = g.gaussian_vector(w.rows());
    s.d2 = g.gaussian_vector(w.cols());
    ReconstructionState l = init_reconstruction(ReconstructionKind::SSL, w);
    l.d1 = s.d1;
    ReconstructionState c = init_reconstruction(ReconstructionKind::IA3, w);
    c.d2 = s.d2;
    return max_abs_diff(ssb_apply(s, w), ia3_apply(c, ssl_apply(l, w)));
  }));

  out.push_back(check("scaling_is_sigma_adjustment", 1e-10, instances, rng, [](Rng& g) {
    const Matrix w = g.gaussian(draw_dim(g, 1, 16), draw_dim(g, 1, 16));
    return column_scale_is_sigma_adjustment(w, g.gaussian_vector(w.rows()), g.gaussian_vector(w.cols()));
  }));

  out.push_back(check("fresh_state_identity_all_methods", 1e-10, instances, rng, [](Rng& g) {
    const std::size_t n = draw_dim(g, 2, 16), m = draw_dim(g, 2, 16);
    const Matrix w = g.gaussian(n, m);
    TunerOptions opts;
    opts.rank = draw_dim(g, 1, std::min(n, m));
    double worst = 0.0;
    for (Method method : peft_methods()) {
      const TunerState t = make_tuner(method, w, Vector(m, 0.0), opts, g);
      if (!is_weight_transform(t)) {
        // Adapters leave W itself untouched; their fresh ΔW must vanish.
        worst = std::max(worst, max_abs(delta(std::get<ExtensionState>(t), w)));
        continue;
      }
      worst = std::max(worst, max_abs_diff(effective_weight(t, w), w));
    }
    return worst;
  }));

  out.push_back(check("spectral_adapter_two_paths", 1e-10, instances, rng, [](Rng& g) {
    const std::size_t n = draw_dim(g, 2, 16), m = draw_dim(g, 2, 16);
    const Matrix w = g.gaussian(n, m);
    CombinationState s = init_combination(CombinationKind::SpectralAdapter, w, draw_dim(g, 1, std::min(n, m)), g);
    s.a = g.gaussian(s.a.rows(), s.a.cols());
    s.b = g.gaussian(s.b.rows(), s.b.cols());
    return relative_error(spectral_adapter_apply(s, w), spectral_adapter_expansion(s, w));
  }));

  out.push_back(check("svdiff_shift_expansion", 1e-10, instances, rng, [](Rng& g) {
    const std::size_t n = draw_dim(g, 2, 16), m = draw_dim(g, 2, 16);
    const Matrix w = g.gaussian(n, m);
    CombinationState s = init_combination(CombinationKind::SVDiff, w, 1, g);
    s.shift = g.gaussian_vector(s.shift.size(), 2.0);
    return relative_error(svdiff_apply(s, w), svdiff_expansion(s, w));
  }));

  out.push_back(check("dora_simplified_form", 1e-10, instances, rng, [](Rng& g) {
    const std::size_t n = draw_dim(g, 2, 16), m = draw_dim(g, 2, 16);
    const Matrix w = g.gaussian(n, m);
    CombinationState s = init_combination(CombinationKind::DoRA, w, draw_dim(g, 1, std::min(n, m)), g);
    s.b = g.gaussian(s.b.rows(), s.b.cols());
    s.magnitude = g.gaussian_vector(m);
    const Matrix sum = w + matmul(s.a, s.b);
    const Vector norms = column_norms(sum);
    Vector dvec(m);
    for (std::size_t j = 0; j < m; ++j) dvec[j] = s.magnitude[j] / norms[j];
    return relative_error(dora_apply(s, w), dora_simplified_apply(w, s.a, s.b, dvec));
  }));

  return out;
}

}  // namespace subspace
