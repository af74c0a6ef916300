#pragma once

// Finite belief-state calculus: Bayes updates over a discrete hypothesis set,
// Shannon uncertainty, realized and expected information gain, Blackwell
// garbling, and randomized checks of the properties these quantities obey.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "inforeasoner/error.hpp"
#include "inforeasoner/random.hpp"

namespace inforeasoner {

inline constexpr double kStochasticTol = 1e-9;

namespace detail {

inline void check_stochastic_row(std::span<const double> row, const char* what) {
  double sum = 0.0;
  for (double v : row) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::invalid_distribution, std::string(what) + " has a negative or non-finite entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kStochasticTol) {
    throw Error(ErrorKind::invalid_distribution, std::string(what) + " does not sum to 1");
  }
}

// Row-major dense matrix whose rows are probability vectors.
class StochasticMatrix {
 public:
  StochasticMatrix() = default;

  StochasticMatrix(std::vector<std::vector<double>> rows, const char* what) {
    if (rows.empty() || rows.front().empty()) {
      throw Error(ErrorKind::invalid_input, std::string(what) + " must be non-empty");
    }
    rows_ = rows.size();
    cols_ = rows.front().size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw Error(ErrorKind::dimension_mismatch, std::string(what) + " rows are ragged");
      check_stochastic_row(r, what);
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::vector<std::vector<double>> to_rows() const {
    std::vector<std::vector<double>> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r].assign(row(r).begin(), row(r).end());
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace detail

/// Normalized probability vector over K >= 1 hypotheses.
class BeliefState {
 public:
  /// Validates an already-normalized vector.
  static BeliefState from_probs(std::vector<double> probs) {
    if (probs.empty()) throw Error(ErrorKind::invalid_distribution, "belief needs at least one hypothesis");
    detail::check_stochastic_row(probs, "belief");
    return BeliefState(std::move(probs));
  }

  static BeliefState uniform(std::size_t k) {
    if (k == 0) throw Error(ErrorKind::invalid_distribution, "belief needs at least one hypothesis");
    return BeliefState(std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }

  static BeliefState degenerate(std::size_t k, std::size_t at) {
    if (at >= k) throw Error(ErrorKind::invalid_input, "degenerate index out of range");
    std::vector<double> p(k, 0.0);
    p[at] = 1.0;
    return BeliefState(std::move(p));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const noexcept { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }

  friend bool operator==(const BeliefState&, const BeliefState&) = default;

 private:
  explicit BeliefState(std::vector<double> p) : probs_(std::move(p)) {}
  std::vector<double> probs_;
};

inline BeliefState normalize_belief(std::span<const double> weights) {
  if (weights.empty()) throw Error(ErrorKind::invalid_distribution, "empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::invalid_distribution, "negative or non-finite weight");
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::invalid_distribution, "all weights are zero");
  std::vector<double> p(weights.begin(), weights.end());
  for (double& v : p) v /= total;
  return BeliefState::from_probs(std::move(p));
}

inline BeliefState normalize_belief(std::initializer_list<double> weights) {
  return normalize_belief(std::span<const double>(weights.begin(), weights.size()));
}

/// Likelihood table P(o | Y = y, a): K rows (hypotheses) by L columns (symbols).
class ObservationChannel {
 public:
  ObservationChannel() = default;
  explicit ObservationChannel(std::vector<std::vector<double>> rows, std::string action_label = {})
      : m_(std::move(rows), "observation channel"), action_label_(std::move(action_label)) {}

  /// K x L channel whose rows are all equal to `row`.
  static ObservationChannel uninformative(std::size_t k, std::vector<double> row, std::string label = {}) {
    return ObservationChannel(std::vector<std::vector<double>>(k, std::move(row)), std::move(label));
  }

  /// Square channel reporting the true hypothesis with probability `accuracy`,
  /// otherwise a uniformly chosen wrong one.
  static ObservationChannel symmetric(std::size_t k, double accuracy, std::string label = {}) {
    if (k < 2) throw Error(ErrorKind::invalid_input, "symmetric channel needs k >= 2");
    const double off = (1.0 - accuracy) / static_cast<double>(k - 1);
    std::vector<std::vector<double>> rows(k, std::vector<double>(k, off));
    for (std::size_t y = 0; y < k; ++y) rows[y][y] = accuracy;
    return ObservationChannel(std::move(rows), std::move(label));
  }

  std::size_t hypotheses() const noexcept { return m_.rows(); }
  std::size_t symbols() const noexcept { return m_.cols(); }
  double likelihood(std::size_t y, std::size_t obs) const noexcept { return m_(y, obs); }
  std::span<const double> row(std::size_t y) const noexcept { return m_.row(y); }
  const std::string& action_label() const noexcept { return action_label_; }
  std::vector<std::vector<double>> rows() const { return m_.to_rows(); }

  /// Marginal P(o | b) = sum_y b(y) P(o | y).
  double marginal(const BeliefState& b, std::size_t obs) const {
    double p = 0.0;
    for (std::size_t y = 0; y < hypotheses(); ++y) p += b[y] * likelihood(y, obs);
    return p;
  }

 private:
  detail::StochasticMatrix m_;
  std::string action_label_;
};

/// Row-stochastic post-processing kernel P(O2 | O1).
class GarblingKernel {
 public:
  explicit GarblingKernel(std::vector<std::vector<double>> rows) : m_(std::move(rows), "garbling kernel") {}

  static GarblingKernel identity(std::size_t l) {
    std::vector<std::vector<double>> rows(l, std::vector<double>(l, 0.0));
    for (std::size_t i = 0; i < l; ++i) rows[i][i] = 1.0;
    return GarblingKernel(std::move(rows));
  }

  std::size_t inputs() const noexcept { return m_.rows(); }
  std::size_t outputs() const noexcept { return m_.cols(); }
  double operator()(std::size_t from, std::size_t to) const noexcept { return m_(from, to); }

 private:
  detail::StochasticMatrix m_;
};

/// 0 * ln 0 is taken as 0. Result in nats, within [0, ln K].
inline double shannon_uncertainty(const BeliefState& b) {
  double h = 0.0;
  for (double p : b.probs()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

enum class UncertaintyKind { shannon };

struct UncertaintyFunctional {
  UncertaintyKind kind = UncertaintyKind::shannon;

  double operator()(const BeliefState& b) const {
    switch (kind) {
      case UncertaintyKind::shannon: return shannon_uncertainty(b);
    }
    return shannon_uncertainty(b);
  }
};

inline BeliefState bayes_update(const BeliefState& b, const ObservationChannel& ch, std::size_t obs) {
  if (ch.hypotheses() != b.size()) throw Error(ErrorKind::dimension_mismatch, "belief and channel disagree on K");
  if (obs >= ch.symbols()) throw Error(ErrorKind::invalid_input, "observation index out of range");
  std::vector<double> post(b.size());
  double z = 0.0;
  for (std::size_t y = 0; y < b.size(); ++y) {
    post[y] = ch.likelihood(y, obs) * b[y];
    z += post[y];
  }
  if (!(z > 0.0)) throw Error(ErrorKind::impossible_observation, "observation has zero probability under the belief");
  for (double& v : post) v /= z;
  return BeliefState::from_probs(std::move(post));
}

/// u(before) - u(after); negative when the observation was misleading.
inline double realized_ig(const BeliefState& before, const BeliefState& after, const UncertaintyFunctional& u = {}) {
  if (before.size() != after.size()) throw Error(ErrorKind::dimension_mismatch, "beliefs disagree on K");
  return u(before) - u(after);
}

/// Observation-averaged realized gain. Symbols with zero marginal contribute nothing.
inline double expected_ig(const BeliefState& b, const ObservationChannel& ch, const UncertaintyFunctional& u = {}) {
  if (ch.hypotheses() != b.size()) throw Error(ErrorKind::dimension_mismatch, "belief and channel disagree on K");
  const double prior = u(b);
  double eig = 0.0;
  for (std::size_t o = 0; o < ch.symbols(); ++o) {
    const double p_o = ch.marginal(b, o);
    if (p_o <= 0.0) continue;
    eig += p_o * (prior - u(bayes_update(b, ch, o)));
  }
  return eig;
}

/// Channel followed by a stochastic relabeling of its symbols (matrix product).
inline ObservationChannel garble_channel(const ObservationChannel& ch, const GarblingKernel& g) {
  if (g.inputs() != ch.symbols()) throw Error(ErrorKind::dimension_mismatch, "kernel rows must match channel symbols");
  std::vector<std::vector<double>> rows(ch.hypotheses(), std::vector<double>(g.outputs(), 0.0));
  for (std::size_t y = 0; y < ch.hypotheses(); ++y) {
    for (std::size_t o1 = 0; o1 < ch.symbols(); ++o1) {
      const double p = ch.likelihood(y, o1);
      if (p == 0.0) continue;
      for (std::size_t o2 = 0; o2 < g.outputs(); ++o2) rows[y][o2] += p * g(o1, o2);
    }
    // Rounding can drift the row sum by a few ulps; renormalize.
    const double s = std::accumulate(rows[y].begin(), rows[y].end(), 0.0);
    for (double& v : rows[y]) v /= s;
  }
  return ObservationChannel(std::move(rows), ch.action_label());
}

struct BeliefTrajectory {
  std::vector<BeliefState> beliefs;
  std::vector<std::size_t> observations;
  std::vector<double> igs;
  double discount = 1.0;  // carried as metadata only
};

inline std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  const double r = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (r < acc) return i;
  }
  // r landed in the rounding gap at the top; take the last positive entry.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

inline BeliefTrajectory simulate_belief_trajectory(const BeliefState& b0, std::span<const ObservationChannel> channels,
                                                   std::size_t true_y, std::uint64_t seed,
                                                   const UncertaintyFunctional& u = {}, double discount = 1.0) {
  if (true_y >= b0.size()) throw Error(ErrorKind::invalid_input, "true hypothesis out of range");
  for (const auto& ch : channels) {
    if (ch.hypotheses() != b0.size()) throw Error(ErrorKind::dimension_mismatch, "channel K differs from belief K");
  }
  Rng rng(seed);
  BeliefTrajectory traj;
  traj.discount = discount;
  traj.beliefs.push_back(b0);
  for (const auto& ch : channels) {
    const std::size_t obs = sample_index(ch.row(true_y), rng);
    BeliefState next = bayes_update(traj.beliefs.back(), ch, obs);
    traj.igs.push_back(realized_ig(traj.beliefs.back(), next, u));
    traj.observations.push_back(obs);
    traj.beliefs.push_back(std::move(next));
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Random instances for the property suites.

/// Dirichlet(1) draw; with probability `zero_prob` each entry is forced to 0
/// (at least one entry always stays positive).
inline std::vector<double> random_simplex(std::size_t n, Rng& rng, double zero_prob = 0.0) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> w(n);
  for (auto& v : w) v = expo(rng);
  if (zero_prob > 0.0) {
    const std::size_t keep = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (i != keep && uniform01(rng) < zero_prob) w[i] = 0.0;
    }
  }
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= s;
  return w;
}

inline BeliefState random_belief(std::size_t k, Rng& rng, double zero_prob = 0.0) {
  return normalize_belief(random_simplex(k, rng, zero_prob));
}

inline ObservationChannel random_channel(std::size_t k, std::size_t l, Rng& rng, double zero_prob = 0.0) {
  std::vector<std::vector<double>> rows(k);
  for (auto& r : rows) {
    r = random_simplex(l, rng, zero_prob);
  }
  return ObservationChannel(std::move(rows));
}

inline GarblingKernel random_kernel(std::size_t l_in, std::size_t l_out, Rng& rng, double zero_prob = 0.0) {
  std::vector<std::vector<double>> rows(l_in);
  for (auto& r : rows) r = random_simplex(l_out, rng, zero_prob);
  return GarblingKernel(std::move(rows));
}

// ---------------------------------------------------------------------------
// Axiom and proposition suites.

struct AxiomReport {
  std::size_t trials = 0;
  double minimality_violation = 0.0;
  double concavity_violation = 0.0;
  double monotonicity_violation = 0.0;

  double max_violation() const {
    return std::max({minimality_violation, concavity_violation, monotonicity_violation});
  }
  bool passed(double tol = kStochasticTol) const { return max_violation() <= tol; }
};

/// Samples degenerate beliefs, mixtures and channels; reports the largest
/// violation of minimality, concavity, and expected monotonicity.
inline AxiomReport check_axioms(const UncertaintyFunctional& u, std::size_t trials, std::uint64_t seed,
                                std::size_t max_k = 6, std::size_t max_l = 6) {
  if (trials == 0) throw Error(ErrorKind::invalid_input, "trials must be >= 1");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_k(1, max_k);
  std::uniform_int_distribution<std::size_t> pick_l(1, max_l);
  AxiomReport rep;
  rep.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t k = pick_k(rng);
    const std::size_t l = pick_l(rng);
    const std::size_t at = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
    rep.minimality_violation = std::max(rep.minimality_violation, std::abs(u(BeliefState::degenerate(k, at))));

    const BeliefState b1 = random_belief(k, rng, 0.2);
    const BeliefState b2 = random_belief(k, rng, 0.2);
    const double lam = uniform01(rng);
    std::vector<double> mix(k);
    for (std::size_t i = 0; i < k; ++i) mix[i] = lam * b1[i] + (1.0 - lam) * b2[i];
    const double gap = u(normalize_belief(mix)) - (lam * u(b1) + (1.0 - lam) * u(b2));
    rep.concavity_violation = std::max(rep.concavity_violation, -gap);

    const ObservationChannel ch = random_channel(k, l, rng, 0.2);
    double expected_post = 0.0;
    for (std::size_t o = 0; o < l; ++o) {
      const double p_o = ch.marginal(b1, o);
      if (p_o > 0.0) expected_post += p_o * u(bayes_update(b1, ch, o));
    }
    rep.monotonicity_violation = std::max(rep.monotonicity_violation, expected_post - u(b1));
  }
  return rep;
}

struct PropositionReport {
  std::size_t instances = 0;
  double min_eig = 0.0;                   // non-negativity: should be >= -tol
  double max_uninformative_eig = 0.0;     // equality case: rows identical
  double max_telescoping_error = 0.0;
  double max_blackwell_violation = 0.0;   // EIG(garbled) - EIG(original)
  std::size_t failures = 0;

  bool passed() const { return failures == 0; }
};

/// Randomized check of EIG non-negativity, telescoping of realized gains along
/// trajectories of length `horizon`, and monotonicity under garbling.
inline PropositionReport check_propositions(std::size_t trials, std::uint64_t seed, std::size_t max_k = 6,
                                            std::size_t max_l = 6, std::size_t horizon = 8,
                                            const UncertaintyFunctional& u = {}, double tol = kStochasticTol) {
  if (trials == 0) throw Error(ErrorKind::invalid_input, "trials must be >= 1");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_k(1, max_k);
  std::uniform_int_distribution<std::size_t> pick_l(1, max_l);
  PropositionReport rep;
  rep.instances = trials;
  rep.min_eig = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t k = pick_k(rng);
    const std::size_t l = pick_l(rng);
    const BeliefState b = random_belief(k, rng, 0.15);
    const ObservationChannel ch = random_channel(k, l, rng, 0.15);

    const double eig = expected_ig(b, ch, u);
    rep.min_eig = std::min(rep.min_eig, eig);
    if (eig < -tol) ++rep.failures;

    const auto flat = ObservationChannel::uninformative(k, random_simplex(l, rng));
    const double eig_flat = std::abs(expected_ig(b, flat, u));
    rep.max_uninformative_eig = std::max(rep.max_uninformative_eig, eig_flat);
    if (eig_flat > tol) ++rep.failures;

    std::vector<ObservationChannel> channels;
    for (std::size_t s = 0; s < horizon; ++s) channels.push_back(random_channel(k, pick_l(rng), rng, 0.15));
    const BeliefState b0 = random_belief(k, rng);
    const std::size_t true_y = sample_index(b0.probs(), rng);
    const auto traj = simulate_belief_trajectory(b0, channels, true_y, rng(), u);
    const double sum = std::accumulate(traj.igs.begin(), traj.igs.end(), 0.0);
    const double tele = std::abs(sum - (u(traj.beliefs.front()) - u(traj.beliefs.back())));
    rep.max_telescoping_error = std::max(rep.max_telescoping_error, tele);
    if (tele > tol) ++rep.failures;

    const GarblingKernel g = random_kernel(l, pick_l(rng), rng, 0.15);
    const double excess = expected_ig(b, garble_channel(ch, g), u) - eig;
    rep.max_blackwell_violation = std::max(rep.max_blackwell_violation, excess);
    if (excess > tol) ++rep.failures;
  }
  return rep;
}

}  // namespace inforeasoner
