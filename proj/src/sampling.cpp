#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "steindisc/models.hpp"

namespace steindisc {

namespace {

constexpr double kMinAcceptance = 0.05;
constexpr std::size_t kMaxTablePoints = 10'000'000;
constexpr std::int64_t kMaxTailPoints = 1'000'000;

// Total count ~ NB(r, p0), split multinomially with weights p_i / Σp.
void draw_neg_multinomial(Rng& rng, double r, std::span<const double> p, std::span<std::int64_t> out) {
  double p_total = 0.0;
  for (double v : p) p_total += v;
  std::int64_t remaining = rng.negative_binomial(r, 1.0 - p_total);
  double weight_left = p_total;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i + 1 == p.size()) {
      out[i] = remaining;
      break;
    }
    const double share = std::clamp(p[i] / weight_left, 0.0, 1.0);
    out[i] = rng.binomial(remaining, share);
    remaining -= out[i];
    weight_left -= p[i];
  }
}

}  // namespace

Sampler::Sampler(ModelSpec model) : model_(std::move(model)) {
  validate(model_);
  if (model_.family == Family::Logarithmic) {
    log_inv_log1mp_ = std::log(model_.theta[0] / -std::log1p(-model_.theta[0]));
  }
  if (!is_truncated(model_.family)) return;

  acceptance_ = std::exp(log_truncation_mass(model_));
  if (acceptance_ >= kMinAcceptance) return;

  // Inversion table over the (finite or tail-truncated) support.
  const Pmf pmf(model_);
  const LatticeBox& box = model_.support;
  const std::size_t d = box.dim();
  double cdf = 0.0;
  auto push = [&](Point k) {
    cdf += std::exp(pmf.log_unchecked(k));
    table_cdf_.push_back(cdf);
    table_points_.insert(table_points_.end(), k.begin(), k.end());
  };
  if (box.is_finite()) {
    const auto count = box.cardinality();
    if (!count || *count > kMaxTablePoints) return;  // fall back to rejection
    std::vector<std::int64_t> k(d);
    for (std::size_t i = 0; i < d; ++i) k[i] = box.lower(i).value;
    while (true) {
      push(Point(k));
      std::size_t i = d;
      bool done = false;
      while (i > 0) {
        --i;
        if (k[i] < box.upper(i).value) {
          ++k[i];
          break;
        }
        k[i] = box.lower(i).value;
        if (i == 0) done = true;
      }
      if (done) break;
    }
  } else {
    // Truncated Poisson with b = ∞.
    const double lambda = model_.theta[0];
    int quiet = 0;
    for (std::int64_t v = box.lower(0).value; v < box.lower(0).value + kMaxTailPoints && quiet < 30; ++v) {
      const std::int64_t k[1] = {v};
      const double before = cdf;
      push(Point(k, 1));
      quiet = (static_cast<double>(v) > lambda && cdf - before < 1e-17 * cdf) ? quiet + 1 : 0;
    }
  }
}

void Sampler::draw_parent(Rng& rng, std::span<std::int64_t> out) const {
  const auto& t = model_.theta;
  switch (model_.family) {
    case Family::Poisson:
    case Family::TruncPoisson: out[0] = rng.poisson(t[0]); return;
    case Family::Binomial:
    case Family::TruncBinomial: out[0] = rng.binomial(model_.fixed.m, t[0]); return;
    case Family::YuleSimon: {
      const double w = rng.exponential() / t[0];
      out[0] = rng.geometric1(std::exp(-w));
      return;
    }
    case Family::BetaNegBinomial: {
      const double p = rng.beta(t[0], t[1]);
      out[0] = p > 0.0 ? rng.negative_binomial(model_.fixed.r, p) : std::int64_t{1} << 62;
      return;
    }
    case Family::Logarithmic: {
      // Inversion on the CDF series, p_1 = p / L, p_{k+1} = p_k · p · k / (k + 1).
      const double p = t[0];
      double u = rng.uniform();
      double pk = std::exp(log_inv_log1mp_);
      std::int64_t k = 1;
      while (u >= pk) {
        u -= pk;
        pk *= p * static_cast<double>(k) / static_cast<double>(k + 1);
        ++k;
        if (pk == 0.0) break;
      }
      out[0] = k;
      return;
    }
    case Family::NegMultinomial:
    case Family::TruncNegMultinomial: draw_neg_multinomial(rng, model_.fixed.r, t, out); return;
    case Family::DirichletNegMultinomial: {
      const std::size_t d = t.size();
      std::vector<double> g(d + 1);
      g[0] = rng.gamma(model_.fixed.alpha0);
      for (std::size_t i = 0; i < d; ++i) g[i + 1] = rng.gamma(t[i]);
      const double total = std::accumulate(g.begin(), g.end(), 0.0);
      std::vector<double> p(d);
      for (std::size_t i = 0; i < d; ++i) p[i] = g[i + 1] / total;
      const double p0 = g[0] / total;
      if (!(p0 > 0.0)) {
        // Dirichlet weight of the stopping category underflowed: the count is astronomically large.
        for (auto& v : out) v = std::int64_t{1} << 62;
        return;
      }
      draw_neg_multinomial(rng, model_.fixed.r, p, out);
      return;
    }
  }
}

void Sampler::draw(Rng& rng, std::span<std::int64_t> out) const {
  if (out.size() != model_.dim()) throw UsageError("Sampler::draw: output length does not match the model");
  if (!table_cdf_.empty()) {
    const double u = rng.uniform() * table_cdf_.back();
    auto it = std::upper_bound(table_cdf_.begin(), table_cdf_.end(), u);
    if (it == table_cdf_.end()) --it;
    const auto idx = static_cast<std::size_t>(it - table_cdf_.begin());
    std::copy_n(table_points_.begin() + static_cast<std::ptrdiff_t>(idx * out.size()), out.size(), out.begin());
    return;
  }
  if (!is_truncated(model_.family)) {
    draw_parent(rng, out);
    return;
  }
  do {
    draw_parent(rng, out);
  } while (!model_.support.contains(out));
}

IntMatrix Sampler::draw(Rng& rng, std::size_t n) const {
  IntMatrix result(n, model_.dim());
  for (std::size_t i = 0; i < n; ++i) draw(rng, result.row(i));
  return result;
}

IntMatrix sample(const ModelSpec& model, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw UsageError("sample: n must be >= 1");
  Rng rng(seed);
  return Sampler(model).draw(rng, n);
}

}  // namespace steindisc
