#include "fvtree/stochastic_models.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "fvtree/format.hpp"

namespace fvtree {

ARModel::ARModel(double phi1, double phi2, double innovation_std)
    : phi1_(phi1), phi2_(phi2), innovation_std_(innovation_std) {
  if (!is_stationary(phi1, phi2))
    throw std::invalid_argument(
        fmt::format("AR(2) coefficients ({}, {}) are not stationary", phi1, phi2));
  if (!(innovation_std >= 0.0) || !std::isfinite(innovation_std))
    throw std::invalid_argument("innovation_std must be finite and non-negative");
}

// The zero-std model is accepted so the deterministic recursion can be
// exercised; every generator treats it as a plain linear map.
bool ARModel::is_stationary(double phi1, double phi2) {
  return std::isfinite(phi1) && std::isfinite(phi2) && phi2 + phi1 < 1.0 && phi2 - phi1 < 1.0 &&
         std::abs(phi2) < 1.0;
}

ARStep ar_step(const ARModel& model, const ARState& state, Rng& rng) {
  const double eps = model.innovation_std() > 0.0 ? model.innovation_std() * rng.normal() : 0.0;
  const double z = model.conditional_mean(state) + eps;
  return {z, advance(state, z)};
}

double stationary_variance(double phi1, double phi2, double innovation_std) {
  if (!ARModel::is_stationary(phi1, phi2))
    throw std::invalid_argument("stationary_variance: coefficients are not stationary");
  const double s2 = innovation_std * innovation_std;
  return s2 * (1.0 - phi2) / ((1.0 + phi2) * ((1.0 - phi2) * (1.0 - phi2) - phi1 * phi1));
}

double stationary_variance(const ARModel& model) {
  return stationary_variance(model.phi1(), model.phi2(), model.innovation_std());
}

double lag1_autocorrelation(const ARModel& model) { return model.phi1() / (1.0 - model.phi2()); }

double apply_change(double w, double z) { return std::max(w + z, 0.0); }

void RealizationConfig::validate() const {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("realization q must lie in [0, 1]");
  if (horizon < 2) throw std::invalid_argument("realization horizon must be >= 2");
  if (!(y0 >= 0.0)) throw std::invalid_argument("realization y0 must be >= 0");
}

Realization generate_realization(const RealizationConfig& config, const ARModel& model,
                                 const ARState& initial, const RareSampler& rare) {
  config.validate();
  if (config.q > 0.0 && !rare)
    throw std::invalid_argument("a rare-change sampler is required when q > 0");

  Rng jump_rng(derive_seed(config.seed, "jump"));
  Rng ar_rng(derive_seed(config.seed, "ar"));
  Rng rare_rng(derive_seed(config.seed, "rare"));

  const auto n = static_cast<std::size_t>(config.horizon);
  Realization r;
  r.y.resize(n);
  r.jumps.assign(n, false);
  r.y[0] = config.y0;

  ARState state = initial;
  for (std::size_t h = 1; h < n; ++h) {
    const bool jump = jump_rng.uniform() < config.q;
    const ARStep normal = ar_step(model, state, ar_rng);
    const double rare_change = rare ? rare(rare_rng) : 0.0;
    const double change = jump ? rare_change : normal.z;
    state = advance(state, change);
    r.y[h] = apply_change(r.y[h - 1], change);
    r.jumps[h] = jump;
    r.is_rare = r.is_rare || jump;
  }
  return r;
}

void write_realizations_csv(std::ostream& out, std::span<const Realization> batch) {
  out << "realization_id,stage,y,jump,is_rare\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& r = batch[i];
    for (std::size_t h = 0; h < r.y.size(); ++h)
      out << i << ',' << h << ',' << fmt17(r.y[h]) << ',' << (r.jumps[h] ? 1 : 0) << ','
          << (r.is_rare ? 1 : 0) << '\n';
  }
}

}  // namespace fvtree
