#pragma once

// Group-relative advantages, the clipped surrogate with a KL penalty, and a
// softmax policy over a finite action set with its analytic gradient.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "inforeasoner/error.hpp"

namespace inforeasoner {

struct GRPOConfig {
  double clip_eps = 0.2;
  double adv_eps = 1e-6;
  double kl_coef = 0.001;
  std::size_t group_size = 3;
  double learning_rate = 0.01;
  std::size_t steps = 2000;
  std::size_t update_epochs = 2;  // gradient steps per sampled group

  void validate() const {
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw Error(ErrorKind::invalid_input, "clip_eps must lie in (0,1)");
    if (!(kl_coef >= 0.0)) throw Error(ErrorKind::invalid_input, "kl_coef must be >= 0");
    if (group_size < 2) throw Error(ErrorKind::invalid_input, "group_size must be >= 2");
    if (!(adv_eps >= 0.0)) throw Error(ErrorKind::invalid_input, "adv_eps must be >= 0");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::invalid_input, "learning_rate must be > 0");
    if (update_epochs == 0) throw Error(ErrorKind::invalid_input, "update_epochs must be >= 1");
  }
};

/// (R_i - mean) / (population_std + adv_eps); all zeros when the group has no spread.
inline std::vector<double> group_advantages(std::span<const double> rewards, double adv_eps) {
  if (rewards.size() < 2) throw Error(ErrorKind::invalid_input, "group needs at least two rewards");
  std::vector<double> adv(rewards.size(), 0.0);
  // Checked directly: the float mean of equal values can differ from them.
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return adv;
  // Offsets from the minimum first: a constant shift then cancels exactly
  // whenever the shifted rewards are themselves representable.
  std::vector<double> d(rewards.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = rewards[i] - *lo;
  const double n = static_cast<double>(d.size());
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double var = 0.0;
  for (double x : d) var += (x - mean) * (x - mean);
  const double sigma = std::sqrt(var / n);
  for (std::size_t i = 0; i < d.size(); ++i) adv[i] = (d[i] - mean) / (sigma + adv_eps);
  return adv;
}

inline std::vector<double> group_advantages(std::initializer_list<double> rewards, double adv_eps) {
  return group_advantages(std::span<const double>(rewards.begin(), rewards.size()), adv_eps);
}

namespace detail {
inline void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorKind::invalid_input, std::string("non-finite value in ") + what);
  }
}
}  // namespace detail

/// Mean over the group of min(r A, clip(r) A) - beta * KL_i, with
/// r_i = exp(new_i - old_i). `kl` holds each sample's KL(new || ref).
inline double grpo_objective(std::span<const double> new_logprobs, std::span<const double> old_logprobs,
                             std::span<const double> advantages, std::span<const double> kl, double clip_eps,
                             double kl_coef) {
  const std::size_t g = new_logprobs.size();
  if (g == 0 || old_logprobs.size() != g || advantages.size() != g || kl.size() != g) {
    throw Error(ErrorKind::dimension_mismatch, "objective inputs must all have length G");
  }
  detail::require_finite(new_logprobs, "new_logprobs");
  detail::require_finite(old_logprobs, "old_logprobs");
  detail::require_finite(advantages, "advantages");
  detail::require_finite(kl, "kl");
  double total = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const double r = std::exp(new_logprobs[i] - old_logprobs[i]);
    const double clipped = std::clamp(r, 1.0 - clip_eps, 1.0 + clip_eps);
    total += std::min(r * advantages[i], clipped * advantages[i]) - kl_coef * kl[i];
  }
  return total / static_cast<double>(g);
}

// ---------------------------------------------------------------------------
// Softmax policy over a finite action set.

inline std::vector<double> log_softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double lz = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lz;
  return out;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (double& v : out) v = std::exp(v);
  return out;
}

/// KL(softmax(p) || softmax(q)) in nats.
inline double softmax_kl(std::span<const double> p_logits, std::span<const double> q_logits) {
  const auto lp = log_softmax(p_logits);
  const auto lq = log_softmax(q_logits);
  double kl = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) kl += std::exp(lp[i]) * (lp[i] - lq[i]);
  return std::max(kl, 0.0);
}

struct ToyPolicy {
  std::vector<double> logits;

  std::size_t actions() const noexcept { return logits.size(); }
  std::vector<double> probs() const { return softmax(logits); }

  double entropy() const {
    const auto lp = log_softmax(logits);
    double h = 0.0;
    for (double l : lp) h -= std::exp(l) * l;
    return h;
  }

  /// Log-probability of an episode given how many times each action was drawn.
  double episode_logprob(std::span<const double> counts) const {
    const auto lp = log_softmax(logits);
    double s = 0.0;
    for (std::size_t a = 0; a < lp.size(); ++a) s += counts[a] * lp[a];
    return s;
  }
};

template <class F>
concept DifferentiableObjective = requires(const F& f, std::span<const double> x, double h) {
  { f.value(x) } -> std::convertible_to<double>;
  { f.gradient(x) } -> std::convertible_to<std::vector<double>>;
  { f.near_kink(x, h) } -> std::convertible_to<bool>;
};

/// The clipped objective as a function of the policy logits. Each episode is
/// summarized by its per-action decision counts; KL is taken exactly against
/// the reference logits and is the same for every episode.
class ToyGrpoObjective {
 public:
  ToyGrpoObjective(std::vector<std::vector<double>> episode_counts, std::vector<double> old_logprobs,
                   std::vector<double> advantages, std::vector<double> ref_logits, double clip_eps, double kl_coef)
      : counts_(std::move(episode_counts)),
        old_(std::move(old_logprobs)),
        adv_(std::move(advantages)),
        ref_(std::move(ref_logits)),
        clip_eps_(clip_eps),
        kl_coef_(kl_coef) {
    if (counts_.size() != old_.size() || counts_.size() != adv_.size() || counts_.empty()) {
      throw Error(ErrorKind::dimension_mismatch, "episodes, old logprobs and advantages must align");
    }
    for (const auto& c : counts_) {
      if (c.size() != ref_.size()) throw Error(ErrorKind::dimension_mismatch, "count vector size != action count");
    }
  }

  double value(std::span<const double> logits) const {
    const ToyPolicy pi{{logits.begin(), logits.end()}};
    const double kl = softmax_kl(logits, ref_);
    std::vector<double> lp(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i) lp[i] = pi.episode_logprob(counts_[i]);
    const std::vector<double> kls(counts_.size(), kl);
    return grpo_objective(lp, old_, adv_, kls, clip_eps_, kl_coef_);
  }

  std::vector<double> gradient(std::span<const double> logits) const {
    const std::size_t n = logits.size();
    const auto lp = log_softmax(logits);
    std::vector<double> pi(n);
    for (std::size_t a = 0; a < n; ++a) pi[a] = std::exp(lp[a]);
    std::vector<double> grad(n, 0.0);
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      double lpi = 0.0;
      double decisions = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        lpi += counts_[i][a] * lp[a];
        decisions += counts_[i][a];
      }
      const double r = std::exp(lpi - old_[i]);
      const double clipped = std::clamp(r, 1.0 - clip_eps_, 1.0 + clip_eps_);
      // Clipped branch selected and active: the term is locally constant.
      if (clipped * adv_[i] < r * adv_[i]) continue;
      for (std::size_t a = 0; a < n; ++a) grad[a] += r * adv_[i] * (counts_[i][a] - decisions * pi[a]);
    }
    const double g = static_cast<double>(counts_.size());
    for (double& v : grad) v /= g;
    if (kl_coef_ > 0.0) {
      const auto lq = log_softmax(ref_);
      double kl = 0.0;
      for (std::size_t a = 0; a < n; ++a) kl += pi[a] * (lp[a] - lq[a]);
      for (std::size_t a = 0; a < n; ++a) grad[a] -= kl_coef_ * pi[a] * (lp[a] - lq[a] - kl);
    }
    return grad;
  }

  /// True when a perturbation of size h could cross a clip boundary.
  bool near_kink(std::span<const double> logits, double h) const {
    const ToyPolicy pi{{logits.begin(), logits.end()}};
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      const double r = std::exp(pi.episode_logprob(counts_[i]) - old_[i]);
      if (std::abs(r - (1.0 - clip_eps_)) <= 10.0 * h || std::abs(r - (1.0 + clip_eps_)) <= 10.0 * h) return true;
    }
    return false;
  }

 private:
  std::vector<std::vector<double>> counts_;
  std::vector<double> old_;
  std::vector<double> adv_;
  std::vector<double> ref_;
  double clip_eps_;
  double kl_coef_;
};

struct GradientCheckResult {
  double max_rel_error = 0.0;
  bool reliable = true;  // false at clip kinks; the error is then not meaningful
};

/// Central differences against the analytic gradient. The per-component error
/// is |fd - analytic| / max(1, |fd|, |analytic|).
template <DifferentiableObjective F>
GradientCheckResult gradient_check(const ToyPolicy& policy, const F& objective, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw Error(ErrorKind::invalid_input, "h must lie in [1e-7, 1e-3]");
  GradientCheckResult res;
  if (objective.near_kink(policy.logits, h)) {
    res.reliable = false;
    return res;
  }
  const auto analytic = objective.gradient(policy.logits);
  std::vector<double> x = policy.logits;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double x0 = x[j];
    x[j] = x0 + h;
    const double fp = objective.value(x);
    x[j] = x0 - h;
    const double fm = objective.value(x);
    x[j] = x0;
    const double fd = (fp - fm) / (2.0 * h);
    const double scale = std::max({1.0, std::abs(fd), std::abs(analytic[j])});
    res.max_rel_error = std::max(res.max_rel_error, std::abs(fd - analytic[j]) / scale);
  }
  return res;
}

}  // namespace inforeasoner
