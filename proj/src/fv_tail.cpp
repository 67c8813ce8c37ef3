#include "fvtree/fv_tail.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace fvtree {

TailPartition::TailPartition(double a, double c_threshold, double inner_edge, int inner_count)
    : a_(a), c_(c_threshold), inner_edge_(inner_edge), inner_count_(inner_count) {
  if (!(a > 0.0 && a < c_threshold && c_threshold < inner_edge) || !std::isfinite(inner_edge))
    throw std::invalid_argument(fmt::format(
        "tail partition requires 0 < a < c_threshold < inner_edge (got {}, {}, {})", a,
        c_threshold, inner_edge));
  if (inner_count < 1) throw std::invalid_argument("inner_count must be >= 1");

  delta_ = (std::log10(inner_edge) - std::log10(c_threshold)) / inner_count;
  edges_.reserve(static_cast<std::size_t>(inner_count) + 1);
  edges_.push_back(-c_threshold);
  for (int k = 1; k < inner_count; ++k) edges_.push_back(-c_threshold * std::pow(10.0, k * delta_));
  // Pin the last edge exactly so C_K starts at -inner_edge.
  edges_.push_back(-inner_edge);
}

double TailPartition::upper(std::size_t k) const {
  if (k < 1 || k > interval_count()) throw std::out_of_range("interval index out of range");
  return edges_[k - 1];
}

double TailPartition::lower(std::size_t k) const {
  if (k < 1 || k > interval_count()) throw std::out_of_range("interval index out of range");
  if (k == interval_count()) return -std::numeric_limits<double>::infinity();
  return edges_[k];
}

std::optional<std::size_t> TailPartition::interval_of(double z) const {
  if (!(z < -c_)) return std::nullopt;
  for (std::size_t k = 1; k < edges_.size(); ++k)
    if (z >= edges_[k]) return k;
  return interval_count();
}

std::optional<std::size_t> TailPartition::bin_of(double z) const {
  if (absorbed(z)) return std::nullopt;
  return interval_of(z).value_or(0);
}

TailPartition build_partition(double a, double c_threshold, double inner_edge, int inner_count) {
  return TailPartition(a, c_threshold, inner_edge, inner_count);
}

void FVConfig::validate() const {
  if (n_particles < 2) throw std::invalid_argument("FV needs at least 2 particles");
  if (n_steps < 1) throw std::invalid_argument("FV needs at least 1 step");
}

namespace {

// Plain Z chain that reports its state on every entry into the complement of A.
class EntryStream {
 public:
  static constexpr std::size_t kMaxSearch = 50'000'000;

  EntryStream(const ARModel& model, double a, Rng& rng) : model_(model), a_(a), rng_(rng) {}

  void skip(std::size_t steps) {
    for (std::size_t i = 0; i < steps; ++i) state_ = ar_step(model_, state_, rng_).next;
  }

  ARState next_entry() {
    if (model_.innovation_std() == 0.0)
      throw EstimationError("a zero-innovation chain started at 0 never enters the tail region");
    for (std::size_t i = 0; i < kMaxSearch; ++i) {
      const bool was_inside = state_.z_lag1 > -a_;
      state_ = ar_step(model_, state_, rng_).next;
      if (was_inside && state_.z_lag1 <= -a_) return state_;
    }
    throw EstimationError(fmt::format(
        "the plain chain did not enter (-inf, -{}] within {} steps; lower the absorption boundary",
        a_, kMaxSearch));
  }

 private:
  const ARModel& model_;
  double a_;
  Rng& rng_;
  ARState state_{};
};

}  // namespace

std::vector<ARState> warm_start_particles(const ARModel& model, const TailPartition& partition,
                                          std::size_t n_particles, Rng& rng) {
  EntryStream entries(model, partition.a(), rng);
  std::vector<ARState> out;
  out.reserve(n_particles);
  for (std::size_t i = 0; i < n_particles; ++i) out.push_back(entries.next_entry());
  return out;
}

OccupationHistogram fv_run(const ARModel& model, const TailPartition& partition,
                           const FVConfig& config, const FVObserver& observer) {
  config.validate();
  constexpr double kSurvivalFloor = 1e-12;

  Rng entry_rng(derive_seed(config.seed, "fv-entries"));
  Rng step_rng(derive_seed(config.seed, "fv-steps"));
  EntryStream entries(model, partition.a(), entry_rng);
  entries.skip(config.burn_in);

  const std::size_t n = config.n_particles;
  const std::size_t bins = partition.bin_count();
  std::vector<double> done_numer(bins, 0.0);
  double done_denom = 0.0;
  std::vector<double> numer(bins, 0.0);
  double denom = 0.0;

  OccupationHistogram hist;
  std::vector<ARState> particles(n);
  std::vector<double> counts(bins);
  std::vector<char> dead(n, 0);
  std::size_t steps = 0;

  while (steps < config.n_steps) {
    for (auto& p : particles) p = entries.next_entry();
    std::fill(numer.begin(), numer.end(), 0.0);
    denom = 0.0;
    double survival = 1.0;
    bool round_finished = false;

    while (steps < config.n_steps) {
      std::fill(counts.begin(), counts.end(), 0.0);
      for (const auto& p : particles) counts[*partition.bin_of(p.z_lag1)] += 1.0;
      for (std::size_t b = 0; b < bins; ++b) numer[b] += survival * counts[b] / static_cast<double>(n);
      denom += survival;

      std::size_t absorbed = 0;
      for (std::size_t i = 0; i < n; ++i) {
        particles[i] = ar_step(model, particles[i], step_rng).next;
        dead[i] = partition.absorbed(particles[i].z_lag1);
        absorbed += dead[i];
      }
      ++steps;
      if (absorbed < n) {
        // Restart in index order; a donor must already hold a live state for
        // this step, which includes particles restarted earlier in the loop.
        for (std::size_t i = 0; i < n; ++i) {
          if (!dead[i]) continue;
          std::size_t donor = 0;
          do {
            donor = step_rng.index(n - 1);
            if (donor >= i) ++donor;
          } while (dead[donor]);
          particles[i] = particles[donor];
          dead[i] = 0;
        }
      }
      hist.absorptions += absorbed;
      survival *= 1.0 - static_cast<double>(absorbed) / static_cast<double>(n);
      if (observer && absorbed < n) observer(particles);
      if (survival < kSurvivalFloor) {
        round_finished = true;
        break;
      }
    }

    if (round_finished) {
      for (std::size_t b = 0; b < bins; ++b) done_numer[b] += numer[b];
      done_denom += denom;
      ++hist.rounds;
    } else if (hist.rounds == 0) {
      // Budget ran out inside the first round; a truncated round is all we have.
      done_numer = numer;
      done_denom = denom;
    }
  }

  hist.mass.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) hist.mass[b] = done_numer[b] / done_denom;
  return hist;
}

double estimate_exit_mass(const ARModel& model, double a, std::size_t n_steps, Rng& rng) {
  if (n_steps == 0) throw std::invalid_argument("estimate_exit_mass needs n_steps > 0");
  constexpr std::size_t kBurnIn = 1000;
  ARState state{};
  for (std::size_t i = 0; i < kBurnIn; ++i) state = ar_step(model, state, rng).next;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n_steps; ++i) {
    state = ar_step(model, state, rng).next;
    if (state.z_lag1 <= -a) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n_steps);
}

TailProbabilities tail_probabilities(std::span<const double> occupation, double exit_mass,
                                     const TailPartition& partition) {
  if (occupation.size() != partition.bin_count())
    throw std::invalid_argument(fmt::format("occupation has {} bins, partition expects {}",
                                            occupation.size(), partition.bin_count()));
  if (!(exit_mass >= 0.0 && exit_mass <= 1.0))
    throw std::invalid_argument("exit_mass must be a probability");

  TailProbabilities tp;
  tp.exit_mass = exit_mass;
  tp.occupation.assign(occupation.begin(), occupation.end());
  tp.p_hat.resize(partition.interval_count());
  for (std::size_t k = 1; k <= partition.interval_count(); ++k)
    tp.p_hat[k - 1] = exit_mass * occupation[k];
  const double total = std::accumulate(tp.p_hat.begin(), tp.p_hat.end(), 0.0);
  if (!(total > 0.0))
    throw EstimationError(
        "tail intervals were never visited; increase the FV particle count or step budget");
  tp.weights.resize(tp.p_hat.size());
  for (std::size_t k = 0; k < tp.p_hat.size(); ++k) tp.weights[k] = tp.p_hat[k] / total;
  return tp;
}

double sample_rare_change(const TailProbabilities& tp, const TailPartition& partition, Rng& rng) {
  const std::size_t K = partition.interval_count();
  if (tp.weights.size() != K) throw std::invalid_argument("weights do not match the partition");

  const double u = rng.uniform();
  std::size_t l = K;
  double cum = 0.0;
  for (std::size_t k = 1; k <= K; ++k) {
    if (tp.weights[k - 1] <= 0.0) continue;
    cum += tp.weights[k - 1];
    l = k;
    if (u < cum) break;
  }

  const double top = partition.upper(l);
  if (l == K) return top - rng.exponential(1.0);
  // r in (0, length) keeps the draw strictly inside [lower, upper).
  return top - partition.length(l) * rng.uniform_open();
}

RareSampler TailEstimate::sampler() const {
  return [tp = probabilities, part = partition](Rng& rng) { return sample_rare_change(tp, part, rng); };
}

TailEstimate estimate_tail(const ARModel& model, const TailPartition& partition, const FVConfig& fv,
                           std::size_t exit_mass_steps, std::uint64_t exit_mass_seed) {
  Rng rng(exit_mass_seed);
  const double exit_mass = estimate_exit_mass(model, partition.a(), exit_mass_steps, rng);
  const OccupationHistogram hist = fv_run(model, partition, fv);
  return TailEstimate{partition, tail_probabilities(hist.mass, exit_mass, partition), fv,
                      exit_mass_steps};
}

nlohmann::json to_json(const TailEstimate& e) {
  const auto& p = e.partition;
  nlohmann::json j;
  j["a"] = p.a();
  j["c_threshold"] = p.c_threshold();
  j["inner_edge"] = p.inner_edge();
  j["inner_count"] = p.inner_count();
  j["delta"] = p.delta();
  j["edges"] = std::vector<double>(p.edges().begin(), p.edges().end());
  j["p_hat"] = e.probabilities.p_hat;
  j["weights"] = e.probabilities.weights;
  j["occupation"] = e.probabilities.occupation;
  j["exit_mass"] = e.probabilities.exit_mass;
  j["config"] = {{"n_particles", e.fv.n_particles},
                 {"n_steps", e.fv.n_steps},
                 {"burn_in", e.fv.burn_in},
                 {"seed", e.fv.seed},
                 {"exit_mass_steps", e.exit_mass_steps}};
  return j;
}

TailEstimate tail_from_json(const nlohmann::json& j) {
  try {
    TailPartition partition(j.at("a").get<double>(), j.at("c_threshold").get<double>(),
                            j.at("inner_edge").get<double>(), j.at("inner_count").get<int>());
    const auto occupation = j.at("occupation").get<std::vector<double>>();
    TailProbabilities tp =
        tail_probabilities(occupation, j.at("exit_mass").get<double>(), partition);
    // Keep the stored numbers verbatim.
    tp.p_hat = j.at("p_hat").get<std::vector<double>>();
    tp.weights = j.at("weights").get<std::vector<double>>();
    if (tp.p_hat.size() != partition.interval_count() || tp.weights.size() != tp.p_hat.size())
      throw std::invalid_argument("p_hat/weights length does not match the partition");
    const auto& c = j.at("config");
    FVConfig fv{c.at("n_particles").get<std::size_t>(), c.at("n_steps").get<std::size_t>(),
                c.at("burn_in").get<std::size_t>(), c.at("seed").get<std::uint64_t>()};
    return TailEstimate{partition, std::move(tp), fv, c.at("exit_mass_steps").get<std::size_t>()};
  } catch (const nlohmann::json::exception& ex) {
    throw std::invalid_argument(fmt::format("malformed tail file: {}", ex.what()));
  }
}

}  // namespace fvtree
