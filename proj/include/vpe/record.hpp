// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vpe/common.hpp"

namespace vpe {

struct SampleResult {
  std::string sample_id;
  std::string prediction;
  bool correct = false;
  std::vector<std::string> final_images;
  std::optional<std::string> error;
  TokenUsage tokens;
  // Served from the evaluation cache: no model calls were made, tokens are zero.
  bool cached = false;

  friend bool operator==(const SampleResult&, const SampleResult&) = default;
};

/// Outcome of running one program over a sample set.
struct ExperimentRecord {
  NodeId node_id{};
  double reward = 0.0;
  std::vector<SampleResult> sample_results;
  std::optional<std::string> representative_success;
  std::optional<std::string> representative_failure;
  TokenUsage tokens_total;
  // Every sample errored.
  bool degraded = false;

  size_t correct_count() const {
    size_t n = 0;
    for (const auto& s : sample_results) n += s.correct ? 1 : 0;
    return n;
  }

  friend bool operator==(const ExperimentRecord&, const ExperimentRecord&) = default;
};

namespace detail {
inline json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }
inline std::optional<std::string> read_optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}
}  // namespace detail

inline void to_json(json& j, const SampleResult& s) {
  j = json{{"sample_id", s.sample_id},   {"prediction", s.prediction}, {"correct", s.correct},
           {"final_images", s.final_images}, {"tokens", s.tokens},       {"cached", s.cached}};
  j["error"] = detail::optional_string(s.error);
}

inline void from_json(const json& j, SampleResult& s) {
  s.sample_id = j.at("sample_id").get<std::string>();
  s.prediction = j.at("prediction").get<std::string>();
  s.correct = j.at("correct").get<bool>();
  s.final_images = j.at("final_images").get<std::vector<std::string>>();
  s.tokens = j.at("tokens").get<TokenUsage>();
  s.cached = j.value("cached", false);
  s.error = detail::read_optional_string(j, "error");
}

inline void to_json(json& j, const ExperimentRecord& r) {
  j = json{{"node_id", r.node_id},
           {"reward", r.reward},
           {"sample_results", r.sample_results},
           {"tokens_total", r.tokens_total},
           {"degraded", r.degraded}};
  j["representative_success"] = detail::optional_string(r.representative_success);
  j["representative_failure"] = detail::optional_string(r.representative_failure);
}

inline void from_json(const json& j, ExperimentRecord& r) {
  r.node_id = j.at("node_id").get<NodeId>();
  r.reward = j.at("reward").get<double>();
  r.sample_results = j.at("sample_results").get<std::vector<SampleResult>>();
  r.tokens_total = j.at("tokens_total").get<TokenUsage>();
  r.degraded = j.value("degraded", false);
  r.representative_success = detail::read_optional_string(j, "representative_success");
  r.representative_failure = detail::read_optional_string(j, "representative_failure");
}

/// Builds a record from per-sample results: reward is the exact fraction of
/// correct samples, representatives are the first success and first failure
/// in sample order.
inline ExperimentRecord make_record(NodeId node, std::vector<SampleResult> results) {
  ExperimentRecord r;
  r.node_id = node;
  r.sample_results = std::move(results);
  size_t correct = 0, errored = 0;
  for (const auto& s : r.sample_results) {
    r.tokens_total += s.tokens;
    if (s.correct) {
      ++correct;
      if (!r.representative_success) r.representative_success = s.sample_id;
    } else if (!r.representative_failure) {
      r.representative_failure = s.sample_id;
    }
    if (s.error) ++errored;
  }
  const size_t n = r.sample_results.size();
  r.reward = n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
  r.degraded = n > 0 && errored == n;
  return r;
}

}  // namespace vpe
