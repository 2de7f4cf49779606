// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "vpe/common.hpp"
#include "vpe/types.hpp"

// Synthetic idea space. Ideas are points of a finite grid over
// [lower, upper]^dimension; their reward is a mixture of Gaussian peaks.

namespace vpe {

struct Peak {
  std::vector<double> center;
  double height = 1.0;
  double width = 1.0;

  friend bool operator==(const Peak&, const Peak&) = default;
};

struct LandscapeConfig {
  int dimension = 2;
  std::vector<Peak> peaks;
  // Idea pool: `grid` evenly spaced values per axis, ends included.
  double lower = 0.0;
  double upper = 1.0;
  int grid = 41;
  std::vector<double> root;
  // Standard deviation of the evaluation noise.
  double noise_scale = 0.0;
  // Mean Euclidean length of a child's step away from its parent.
  double step_scale = 0.12;
  // s_gain = clamp(expectation_correlation * reward(child) + expectation_noise * N(0, 1)).
  double expectation_correlation = 1.0;
  double expectation_noise = 0.1;
  // s_novel = 1 - exp(-d^2 / novelty_scale^2), d = distance to the nearest sibling.
  double novelty_scale = 0.15;
  // Probability that a proposal self-reports feasibility 2.
  double infeasible_rate = 0.0;
  // Snap self-evaluation scores to the five integer levels.
  bool quantize_scores = false;
  std::uint64_t seed = 0;

  /// Three peaks on an 11x11 pool. The global one (0.95) is the narrowest
  /// and sits between the two local ones, away from the root. Scores are
  /// quantized and only loosely track the reward.
  static LandscapeConfig default_three_peak() {
    LandscapeConfig c;
    c.dimension = 2;
    c.grid = 11;
    c.root = {0.2, 0.6};
    c.peaks = {{{0.8, 0.8}, 0.55, 0.237}, {{0.8, 0.3}, 0.7, 0.24}, {{0.8, 0.5}, 0.95, 0.139}};
    c.step_scale = 0.164;
    c.expectation_correlation = 0.75;
    c.expectation_noise = 0.3;
    c.novelty_scale = 0.1;
    c.quantize_scores = true;
    return c;
  }

  void validate() const {
    if (dimension < 1) throw ConfigError("landscape dimension must be positive");
    if (grid < 2) throw ConfigError("landscape grid needs at least 2 points per axis");
    if (!(upper > lower)) throw ConfigError("landscape upper bound must exceed lower bound");
    if (static_cast<int>(root.size()) != dimension) throw ConfigError("landscape root has the wrong dimension");
    if (peaks.empty()) throw ConfigError("landscape needs at least one peak");
    for (const auto& p : peaks) {
      if (static_cast<int>(p.center.size()) != dimension) throw ConfigError("peak center has the wrong dimension");
      if (!(p.height >= 0.0 && p.height <= 1.0)) throw ConfigError("peak height must lie in [0, 1]");
      if (!(p.width > 0.0)) throw ConfigError("peak width must be positive");
    }
    if (noise_scale < 0 || step_scale < 0 || expectation_noise < 0 || !(novelty_scale > 0)) {
      throw ConfigError("landscape scales must be nonnegative (novelty_scale positive)");
    }
    if (infeasible_rate < 0 || infeasible_rate > 1) throw ConfigError("infeasible_rate must lie in [0, 1]");
    double points = std::pow(static_cast<double>(grid), dimension);
    if (points > 5e6) throw ConfigError("landscape idea pool is too large to enumerate");
  }

  friend bool operator==(const LandscapeConfig&, const LandscapeConfig&) = default;
};

inline void to_json(json& j, const Peak& p) { j = json{{"center", p.center}, {"height", p.height}, {"width", p.width}}; }
inline void from_json(const json& j, Peak& p) {
  p.center = j.at("center").get<std::vector<double>>();
  p.height = j.at("height").get<double>();
  p.width = j.at("width").get<double>();
}

inline void to_json(json& j, const LandscapeConfig& c) {
  j = json{{"dimension", c.dimension},
           {"peaks", c.peaks},
           {"lower", c.lower},
           {"upper", c.upper},
           {"grid", c.grid},
           {"root", c.root},
           {"noise_scale", c.noise_scale},
           {"step_scale", c.step_scale},
           {"expectation_correlation", c.expectation_correlation},
           {"expectation_noise", c.expectation_noise},
           {"novelty_scale", c.novelty_scale},
           {"infeasible_rate", c.infeasible_rate},
           {"quantize_scores", c.quantize_scores},
           {"seed", c.seed}};
}

/// Missing keys keep the default landscape's values.
inline void from_json(const json& j, LandscapeConfig& c) {
  c = LandscapeConfig::default_three_peak();
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("dimension", c.dimension);
  get("peaks", c.peaks);
  get("lower", c.lower);
  get("upper", c.upper);
  get("grid", c.grid);
  get("root", c.root);
  get("noise_scale", c.noise_scale);
  get("step_scale", c.step_scale);
  get("expectation_correlation", c.expectation_correlation);
  get("expectation_noise", c.expectation_noise);
  get("novelty_scale", c.novelty_scale);
  get("infeasible_rate", c.infeasible_rate);
  get("quantize_scores", c.quantize_scores);
  get("seed", c.seed);
}

struct LandscapeProposal {
  std::string idea;
  std::vector<double> latent;
  SelfEvaluation eval;
};

class SyntheticLandscape {
 public:
  explicit SyntheticLandscape(LandscapeConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    // E|z| for z ~ N(0, s^2 I_d) is s * sqrt(2) * Gamma((d+1)/2) / Gamma(d/2).
    const double d = cfg_.dimension;
    const double unit = std::sqrt(2.0) * std::exp(std::lgamma((d + 1) / 2) - std::lgamma(d / 2));
    sigma_ = cfg_.step_scale / unit;
  }

  const LandscapeConfig& config() const { return cfg_; }

  /// Noiseless peak mixture, clamped to [0, 1].
  double noiseless_reward(const std::vector<double>& x) const {
    check_dim(x);
    double best = 0.0;
    for (const auto& p : cfg_.peaks) {
      double d2 = 0.0;
      for (int i = 0; i < cfg_.dimension; ++i) d2 += (x[i] - p.center[i]) * (x[i] - p.center[i]);
      best = std::max(best, p.height * std::exp(-d2 / (p.width * p.width)));
    }
    return std::clamp(best, 0.0, 1.0);
  }

  /// Noisy evaluation. The noise is a pure function of (seed, call_index).
  double simulate_reward(const std::vector<double>& x, std::uint64_t call_index) const {
    double r = noiseless_reward(x);
    if (cfg_.noise_scale > 0) {
      std::mt19937_64 g(fnv1a64(std::to_string(call_index), cfg_.seed ^ 0x9e3779b97f4a7c15ULL));
      r += cfg_.noise_scale * std::normal_distribution<double>(0.0, 1.0)(g);
    }
    return std::clamp(r, 0.0, 1.0);
  }

  size_t pool_size() const {
    size_t n = 1;
    for (int i = 0; i < cfg_.dimension; ++i) n *= static_cast<size_t>(cfg_.grid);
    return n;
  }

  std::vector<double> pool_point(size_t index) const {
    std::vector<double> x(static_cast<size_t>(cfg_.dimension));
    for (int i = 0; i < cfg_.dimension; ++i) {
      x[i] = axis_value(static_cast<int>(index % static_cast<size_t>(cfg_.grid)));
      index /= static_cast<size_t>(cfg_.grid);
    }
    return x;
  }

  size_t nearest_index(const std::vector<double>& x) const {
    check_dim(x);
    size_t index = 0, stride = 1;
    const double step = (cfg_.upper - cfg_.lower) / (cfg_.grid - 1);
    for (int i = 0; i < cfg_.dimension; ++i) {
      long k = std::lround((x[i] - cfg_.lower) / step);
      k = std::clamp(k, 0L, static_cast<long>(cfg_.grid - 1));
      index += static_cast<size_t>(k) * stride;
      stride *= static_cast<size_t>(cfg_.grid);
    }
    return index;
  }

  std::vector<double> snap(const std::vector<double>& x) const { return pool_point(nearest_index(x)); }

  std::string idea_text(size_t index) const {
    const auto x = pool_point(index);
    std::vector<std::string> coords;
    for (double v : x) coords.push_back(text::fixed(v, 3));
    return "Strategy #" + std::to_string(index) + ": mix the visual cues in proportions (" + text::join(coords, ", ") +
           ")";
  }

  /// Exhaustive maximum of the noiseless reward over the idea pool.
  double pool_optimum() const {
    double best = 0.0;
    for (size_t i = 0, n = pool_size(); i < n; ++i) best = std::max(best, noiseless_reward(pool_point(i)));
    return best;
  }

  /// Isotropic Gaussian step whose mean length is step_scale.
  std::vector<double> sample_step(std::mt19937_64& rng) const {
    std::vector<double> z(static_cast<size_t>(cfg_.dimension));
    for (auto& v : z) v = sigma_ * std::normal_distribution<double>(0.0, 1.0)(rng);
    return z;
  }

  static double novelty(const std::vector<double>& x, const std::vector<std::vector<double>>& siblings, double scale) {
    if (siblings.empty()) return 1.0;
    double d2 = std::numeric_limits<double>::infinity();
    for (const auto& s : siblings) {
      double t = 0.0;
      for (size_t i = 0; i < x.size(); ++i) t += (x[i] - s[i]) * (x[i] - s[i]);
      d2 = std::min(d2, t);
    }
    return 1.0 - std::exp(-d2 / (scale * scale));
  }

  /// Child idea near the parent: a seeded step snapped to the pool, a gain
  /// estimate correlated with the true reward, and novelty from the distance
  /// to the nearest sibling. Always draws the same number of variates.
  LandscapeProposal propose(const std::vector<double>& parent, const std::vector<std::vector<double>>& siblings,
                            std::mt19937_64& rng) const {
    check_dim(parent);
    auto step = sample_step(rng);
    const double gain_noise = std::normal_distribution<double>(0.0, 1.0)(rng);
    const double feasible_draw = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    std::vector<double> x = parent;
    for (size_t i = 0; i < x.size(); ++i) x[i] += step[i];
    const size_t idx = nearest_index(x);
    LandscapeProposal p;
    p.latent = pool_point(idx);
    p.idea = idea_text(idx);
    const double gain = std::clamp(
        cfg_.expectation_correlation * noiseless_reward(p.latent) + cfg_.expectation_noise * gain_noise, 0.0, 1.0);
    const double nov = novelty(p.latent, siblings, cfg_.novelty_scale);
    const int feasibility = feasible_draw < cfg_.infeasible_rate ? 2 : 5;
    if (cfg_.quantize_scores) {
      p.eval = SelfEvaluation::from_raw(feasibility, 1 + static_cast<int>(std::lround(gain * 4)),
                                        1 + static_cast<int>(std::lround(nov * 4)));
    } else {
      p.eval = SelfEvaluation::from_signal(feasibility, gain, nov);
    }
    return p;
  }

 private:
  double axis_value(int k) const { return cfg_.lower + (cfg_.upper - cfg_.lower) * k / (cfg_.grid - 1); }

  void check_dim(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != cfg_.dimension) {
      throw ConfigError("point has dimension " + std::to_string(x.size()) + ", landscape has " +
                        std::to_string(cfg_.dimension));
    }
  }

  LandscapeConfig cfg_;
  double sigma_ = 0.0;
};

}  // namespace vpe
