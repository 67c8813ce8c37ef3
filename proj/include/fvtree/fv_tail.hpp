#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fvtree/rng.hpp"
#include "fvtree/stochastic_models.hpp"

namespace fvtree {

// Raised when the tail was never visited and no probabilities can be formed.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Absorption set A = (-a, +inf), set of interest C = (-inf, -c), and the
// partition of C into K = inner_count + 1 intervals:
//   C_k = [-c 10^{k delta}, -c 10^{(k-1) delta})   for k = 1..inner_count
//   C_K = (-inf, -inner_edge)
// with delta = (log10(inner_edge) - log10(c)) / inner_count.
//
// Occupation bins over the complement of A are indexed 0..K: bin 0 is the gap
// [-c, -a], bin k >= 1 is C_k.
class TailPartition {
 public:
  TailPartition(double a, double c_threshold, double inner_edge, int inner_count);

  double a() const { return a_; }
  double c_threshold() const { return c_; }
  double inner_edge() const { return inner_edge_; }
  int inner_count() const { return inner_count_; }
  double delta() const { return delta_; }

  std::size_t interval_count() const { return static_cast<std::size_t>(inner_count_) + 1; }
  std::size_t bin_count() const { return interval_count() + 1; }

  // Finite edges -c, ..., -inner_edge (inner_count + 1 values, decreasing).
  std::span<const double> edges() const { return edges_; }

  // Bounds of C_k, k in [1, K]. Upper is exclusive; lower is inclusive
  // (and -inf for the last interval).
  double upper(std::size_t k) const;
  double lower(std::size_t k) const;
  double length(std::size_t k) const { return upper(k) - lower(k); }

  // Interval index k in [1, K] containing z, or nullopt when z >= -c.
  std::optional<std::size_t> interval_of(double z) const;
  // Occupation bin of z, or nullopt when z is in A.
  std::optional<std::size_t> bin_of(double z) const;
  bool absorbed(double z) const { return z > -a_; }

 private:
  double a_;
  double c_;
  double inner_edge_;
  int inner_count_;
  double delta_;
  std::vector<double> edges_;
};

TailPartition build_partition(double a, double c_threshold, double inner_edge, int inner_count);

struct FVConfig {
  std::size_t n_particles{1000};
  std::size_t n_steps{10000};
  std::size_t burn_in{100};
  std::uint64_t seed{0};

  void validate() const;
};

// Returns the first n entry states of the plain chain started at (0, 0): the
// AR state right after each step from A into its complement.
std::vector<ARState> warm_start_particles(const ARModel& model, const TailPartition& partition,
                                          std::size_t n_particles, Rng& rng);

// Normalized occupation over bins 0..K of the complement of A.
struct OccupationHistogram {
  std::vector<double> mass;
  std::size_t rounds{0};
  std::size_t absorptions{0};
};

// Called after every FV step with the full particle set.
using FVObserver = std::function<void(std::span<const ARState>)>;

// Discrete-time Fleming-Viot estimate of the stationary law of Z restricted
// to the complement of A.
//
// Each round starts N particles from fresh entry states of the plain chain
// (after burn_in plain steps). Every step first advances all particles; then,
// in index order, each particle whose new value lies in A copies the full
// state of a uniformly chosen other particle holding a state outside A
// (a particle restarted earlier in the same pass qualifies).
// The absorbed fraction per step gives the survival estimate S(t), and
//   nu(bin) = sum_t S(t) phi_t(bin) / sum_t S(t),
// with phi_t the particle occupation at step t, is the regenerative ratio
// over one excursion outside A. A round ends when S(t) drops below 1e-12;
// rounds repeat until n_steps FV steps are spent. An unfinished last round
// is dropped unless it is the only one.
OccupationHistogram fv_run(const ARModel& model, const TailPartition& partition,
                           const FVConfig& config, const FVObserver& observer = {});

// Fraction of steps with Z <= -a in a plain run from (0, 0), after 1000
// discarded steps.
double estimate_exit_mass(const ARModel& model, double a, std::size_t n_steps, Rng& rng);

struct TailProbabilities {
  std::vector<double> p_hat;      // absolute estimates of p(C_k), k = 1..K
  std::vector<double> weights;    // p_hat normalized to sum 1
  std::vector<double> occupation; // nu over bins 0..K
  double exit_mass{0.0};
};

// p_hat_k = exit_mass * nu(C_k). Throws EstimationError if every p_hat_k is 0.
TailProbabilities tail_probabilities(std::span<const double> occupation, double exit_mass,
                                     const TailPartition& partition);

// Picks C_l with probability weights_l, then returns upper(l) - r with
// r ~ U(0, length(l)) for finite intervals and r ~ Exp(1) for the last one.
double sample_rare_change(const TailProbabilities& tp, const TailPartition& partition, Rng& rng);

// Everything estimate-tail produces; this is what the tail JSON file holds.
struct TailEstimate {
  TailPartition partition;
  TailProbabilities probabilities;
  FVConfig fv;
  std::size_t exit_mass_steps{0};

  // Convenience adaptor for generate_realization / build_tree.
  RareSampler sampler() const;
};

TailEstimate estimate_tail(const ARModel& model, const TailPartition& partition,
                           const FVConfig& fv, std::size_t exit_mass_steps,
                           std::uint64_t exit_mass_seed);

// {a, c_threshold, inner_edge, inner_count, delta, edges[], p_hat[], weights[],
//  occupation[], exit_mass, config{...}}
nlohmann::json to_json(const TailEstimate& estimate);
TailEstimate tail_from_json(const nlohmann::json& j);

}  // namespace fvtree
