#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "fvtree/rng.hpp"

namespace fvtree {

// Two-lag memory of the wind-change process: z_lag1 = Z_{h-1}, z_lag2 = Z_{h-2} (GW).
struct ARState {
  double z_lag1{0.0};
  double z_lag2{0.0};

  friend bool operator==(const ARState&, const ARState&) = default;
};

// State after observing change z.
constexpr ARState advance(const ARState& s, double z) { return {z, s.z_lag1}; }

// Zero-mean AR(2) model of hourly wind-power changes,
//   Z_h = phi1 Z_{h-1} + phi2 Z_{h-2} + eps_h,  eps_h ~ N(0, innovation_std^2).
// Construction rejects coefficients outside the stationarity triangle.
class ARModel {
 public:
  ARModel(double phi1 = 0.90, double phi2 = 0.05, double innovation_std = 1.0);

  double phi1() const { return phi1_; }
  double phi2() const { return phi2_; }
  double innovation_std() const { return innovation_std_; }

  double conditional_mean(const ARState& s) const { return phi1_ * s.z_lag1 + phi2_ * s.z_lag2; }

  static bool is_stationary(double phi1, double phi2);

 private:
  double phi1_;
  double phi2_;
  double innovation_std_;
};

struct ARStep {
  double z;
  ARState next;
};

ARStep ar_step(const ARModel& model, const ARState& state, Rng& rng);

// Yule-Walker gamma_0 = s^2 (1 - phi2) / ((1 + phi2)((1 - phi2)^2 - phi1^2)).
double stationary_variance(const ARModel& model);
// Same, from raw coefficients; throws std::invalid_argument if not stationary.
double stationary_variance(double phi1, double phi2, double innovation_std);
// rho_1 = phi1 / (1 - phi2).
double lag1_autocorrelation(const ARModel& model);

// Propagates wind power by one change, clamped at zero.
double apply_change(double w, double z);

struct RealizationConfig {
  double q{0.0};
  int horizon{5};
  double y0{10.0};
  std::uint64_t seed{0};

  void validate() const;
};

struct Realization {
  std::vector<double> y;
  std::vector<bool> jumps;  // jumps[0] is always false
  bool is_rare{false};
};

// Draws one rare negative change (GW).
using RareSampler = std::function<double(Rng&)>;

// Mixture path Y_h = Y_{h-1} + Z_h [J_h = 0] + R_h [J_h = 1], clamped at 0.
//
// Jump indicators, AR innovations and rare changes come from three separate
// streams derived from config.seed. The AR innovation of stage h is drawn
// whether or not the stage jumps, so paths with the same seed but different q
// share their randomness. `rare` may be empty only when q == 0.
Realization generate_realization(const RealizationConfig& config, const ARModel& model,
                                 const ARState& initial, const RareSampler& rare);

// CSV: realization_id,stage,y,jump,is_rare
void write_realizations_csv(std::ostream& out, std::span<const Realization> batch);

}  // namespace fvtree
