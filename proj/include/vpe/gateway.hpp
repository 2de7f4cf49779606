// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "vpe/common.hpp"

namespace vpe {

enum class Role { ideation, engineer, analyst, target_model };

inline std::string to_string(Role r) {
  switch (r) {
    case Role::ideation: return "ideation";
    case Role::engineer: return "engineer";
    case Role::analyst: return "analyst";
    case Role::target_model: return "target_model";
  }
  return "?";
}

inline Role parse_role(const std::string& s) {
  if (s == "ideation") return Role::ideation;
  if (s == "engineer") return Role::engineer;
  if (s == "analyst") return Role::analyst;
  if (s == "target_model") return Role::target_model;
  throw ConfigError("unknown role '" + s + "'");
}

/// One piece of a chat message: text, or an encoded PNG.
struct MessagePart {
  enum class Kind { text, image };
  Kind kind = Kind::text;
  std::string data;

  static MessagePart text(std::string s) { return {Kind::text, std::move(s)}; }
  static MessagePart png(std::string bytes) { return {Kind::image, std::move(bytes)}; }
};

struct Decoding {
  bool reasoning = true;
  int max_output_tokens = 2048;
  double temperature = 0.0;
};

/// Agents reason, the target model does not.
inline Decoding default_decoding(Role r) {
  Decoding d;
  d.reasoning = r != Role::target_model;
  d.max_output_tokens = r == Role::target_model ? 512 : 2048;
  return d;
}

struct ChatRequest {
  Role role = Role::ideation;
  std::vector<MessagePart> parts;
  Decoding decoding;
  std::optional<NodeId> node;
  // Set for per-sample calls; scripted replies can key on it.
  std::optional<std::string> sample_id;

  static ChatRequest make(Role r, std::string prompt, std::vector<std::string> pngs = {}) {
    ChatRequest q;
    q.role = r;
    q.decoding = default_decoding(r);
    for (auto& p : pngs) q.parts.push_back(MessagePart::png(std::move(p)));
    q.parts.push_back(MessagePart::text(std::move(prompt)));
    return q;
  }

  std::string text() const {
    std::string out;
    for (const auto& p : parts) {
      if (p.kind == MessagePart::Kind::text) out += p.data;
    }
    return out;
  }

  size_t image_count() const {
    size_t n = 0;
    for (const auto& p : parts) n += p.kind == MessagePart::Kind::image ? 1 : 0;
    return n;
  }
};

struct ChatReply {
  std::string text;
  TokenUsage usage;
  // The backend's usage report was missing or malformed; usage is zero.
  bool usage_warning = false;
};

/// Retryable backend failure (timeouts, 429, 5xx).
class TransientError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatReply send(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
  // Identifies the reply behavior for cache keys.
  virtual std::string fingerprint() const { return id(); }
  // Resumable internal state (scripted counters).
  virtual json state() const { return json::object(); }
  virtual void restore(const json&) {}
};

struct LedgerEntry {
  // Logical clock: position in the committed ledger.
  std::uint64_t timestamp = 0;
  Role role = Role::ideation;
  std::optional<NodeId> node;
  TokenUsage usage;
  std::string backend_id;
  bool usage_warning = false;
  // Failed round-trip (retried or fatal); usage is zero.
  bool failed = false;

  friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

inline void to_json(json& j, const LedgerEntry& e) {
  j = json{{"timestamp", e.timestamp}, {"role", to_string(e.role)}, {"usage", e.usage},
           {"backend_id", e.backend_id}, {"usage_warning", e.usage_warning}, {"failed", e.failed}};
  j["node_id"] = e.node ? json(to_int(*e.node)) : json(nullptr);
}

inline void from_json(const json& j, LedgerEntry& e) {
  e.timestamp = j.at("timestamp").get<std::uint64_t>();
  e.role = parse_role(j.at("role").get<std::string>());
  e.usage = j.at("usage").get<TokenUsage>();
  e.backend_id = j.at("backend_id").get<std::string>();
  e.usage_warning = j.value("usage_warning", false);
  e.failed = j.value("failed", false);
  e.node.reset();
  if (j.contains("node_id") && !j.at("node_id").is_null()) e.node = j.at("node_id").get<NodeId>();
}

/// Entries collected by one worker before they are merged into the ledger.
/// Buffers are committed in a fixed order so the ledger does not depend on
/// thread scheduling.
class LedgerBuffer {
 public:
  void add(LedgerEntry e) { entries_.push_back(std::move(e)); }
  void set_node(NodeId id) {
    for (auto& e : entries_) e.node = id;
  }
  TokenUsage total() const {
    TokenUsage t;
    for (const auto& e : entries_) t += e.usage;
    return t;
  }
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  void append(LedgerBuffer&& other) {
    for (auto& e : other.entries_) entries_.push_back(std::move(e));
    other.entries_.clear();
  }
  void clear() { entries_.clear(); }

 private:
  std::vector<LedgerEntry> entries_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
};

/// Chat-completion front door: retries, per-call accounting, and the
/// append-only cost ledger.
class Gateway {
 public:
  using SleepFn = std::function<void(std::chrono::milliseconds)>;

  explicit Gateway(std::shared_ptr<Backend> backend, RetryPolicy retry = {}, SleepFn sleep = nullptr)
      : backend_(std::move(backend)), retry_(retry), sleep_(std::move(sleep)) {
    if (!backend_) throw ConfigError("gateway needs a backend");
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }

  /// Sends a request. Entries go to `buffer` when given, otherwise straight
  /// into the ledger. Throws GatewayError once retries are exhausted.
  ChatReply complete(const ChatRequest& request, LedgerBuffer* buffer = nullptr) {
    std::string last_error;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
      LedgerEntry e;
      e.role = request.role;
      e.node = request.node;
      e.backend_id = backend_->id();
      try {
        ChatReply reply = backend_->send(request);
        e.usage = reply.usage;
        e.usage_warning = reply.usage_warning;
        record(std::move(e), buffer);
        return reply;
      } catch (const TransientError& err) {
        last_error = err.what();
        e.failed = true;
        record(std::move(e), buffer);
        if (attempt < retry_.max_attempts) {
          const double scale = std::pow(retry_.multiplier, attempt - 1);
          sleep_(std::chrono::milliseconds(static_cast<long>(retry_.base_delay.count() * scale)));
        }
      } catch (const GatewayError& err) {
        e.failed = true;
        record(std::move(e), buffer);
        throw GatewayError(backend_->id() + " (" + to_string(request.role) + "): " + err.what());
      }
    }
    throw GatewayError(backend_->id() + " (" + to_string(request.role) + "): gave up after " +
                       std::to_string(retry_.max_attempts) + " attempts; last error: " + last_error);
  }

  /// Merges a buffer into the ledger, assigning timestamps.
  void commit(LedgerBuffer& buffer) {
    std::lock_guard lock(mu_);
    for (auto e : buffer.entries()) append_locked(std::move(e));
    buffer.clear();
  }

  std::vector<LedgerEntry> ledger() const {
    std::lock_guard lock(mu_);
    return ledger_;
  }

  size_t ledger_size() const {
    std::lock_guard lock(mu_);
    return ledger_.size();
  }

  TokenUsage ledger_total(size_t from = 0) const {
    std::lock_guard lock(mu_);
    TokenUsage t;
    for (size_t i = from; i < ledger_.size(); ++i) t += ledger_[i].usage;
    return t;
  }

  /// Replaces the ledger (resume).
  void restore_ledger(std::vector<LedgerEntry> entries) {
    std::lock_guard lock(mu_);
    ledger_ = std::move(entries);
  }

  Backend& backend() { return *backend_; }
  const Backend& backend() const { return *backend_; }

 private:
  void record(LedgerEntry e, LedgerBuffer* buffer) {
    if (buffer) {
      buffer->add(std::move(e));
    } else {
      std::lock_guard lock(mu_);
      append_locked(std::move(e));
    }
  }

  void append_locked(LedgerEntry e) {
    e.timestamp = ledger_.size();
    ledger_.push_back(std::move(e));
  }

  std::shared_ptr<Backend> backend_;
  RetryPolicy retry_;
  SleepFn sleep_;
  mutable std::mutex mu_;
  std::vector<LedgerEntry> ledger_;
};

/// Usage estimate when a script gives none: a token per four characters
/// plus a flat cost per image.
inline TokenUsage estimate_usage(const ChatRequest& req, const std::string& reply) {
  TokenUsage u;
  u.input_tokens = (req.text().size() + 3) / 4 + 256 * req.image_count();
  u.output_tokens = (reply.size() + 3) / 4;
  return u;
}

/// Parses a usage object; anything but three nonnegative integers is
/// malformed.
inline std::optional<TokenUsage> parse_usage(const json& j) {
  if (!j.is_object()) return std::nullopt;
  TokenUsage u;
  auto field = [&](const char* key, std::uint64_t& out) {
    if (!j.contains(key)) return key == std::string("reasoning_tokens");
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) return false;
    out = v.get<std::uint64_t>();
    return true;
  };
  if (!field("input_tokens", u.input_tokens) || !field("output_tokens", u.output_tokens) ||
      !field("reasoning_tokens", u.reasoning_tokens)) {
    return std::nullopt;
  }
  return u;
}

/// Deterministic backend driven by a script. Per role, a request is answered
/// by the first matching rule, else by the role's sequence at the current
/// index, else by the role's fallback. Indices count per (role, sample).
///
/// Script format:
///   { "id": "...",
///     "roles": { "<role>": {
///         "rules":    [ {"match": "substr", "sample": "id", "reply": "...", "usage": {...}} ],
///         "sequence": [ "reply" | {"reply": "...", "usage": {...}} | {"error": "transient"} ],
///         "cycle": true,
///         "fallback": "reply" } } }
///
/// Replies may contain ${index}, ${choice:ABCD} and ${pick:a|b|c}; the latter
/// two pick by a hash of the request and the index.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(json script) : script_(std::move(script)) {
    if (!script_.is_object()) throw ConfigError("script must be a JSON object");
    id_ = script_.value("id", std::string("scripted"));
    if (script_.contains("roles") && !script_["roles"].is_object()) {
      throw ConfigError("script 'roles' must be an object");
    }
    const json roles = script_.value("roles", json::object());
    for (const auto& [name, _] : roles.items()) parse_role(name);
  }

  std::string id() const override { return id_; }
  std::string fingerprint() const override { return id_ + ":" + sha256_hex(script_.dump()).substr(0, 16); }

  ChatReply send(const ChatRequest& req) override {
    const std::string role = to_string(req.role);
    const std::string key = role + "|" + req.sample_id.value_or("");
    std::uint64_t index;
    {
      std::lock_guard lock(mu_);
      index = counters_[key]++;
    }
    const json spec = script_.value("roles", json::object()).value(role, json::object());
    const std::string prompt = req.text();

    json entry;
    for (const auto& rule : spec.value("rules", json::array())) {
      if (rule.contains("sample") && (!req.sample_id || rule["sample"].get<std::string>() != *req.sample_id)) {
        continue;
      }
      if (rule.contains("match") && prompt.find(rule["match"].get<std::string>()) == std::string::npos) {
        continue;
      }
      entry = rule;
      break;
    }
    if (entry.is_null()) {
      const json seq = spec.value("sequence", json::array());
      if (!seq.empty() && (index < seq.size() || spec.value("cycle", false))) {
        entry = seq[index % seq.size()];
      } else if (spec.contains("fallback")) {
        entry = spec["fallback"];
      } else {
        throw GatewayError("script has no reply for role " + role + " at index " + std::to_string(index));
      }
    }
    if (entry.is_string()) entry = json{{"reply", entry}};
    if (entry.contains("error")) {
      const std::string kind = entry["error"].get<std::string>();
      if (kind == "transient") throw TransientError("scripted transient failure");
      throw GatewayError("scripted failure: " + kind);
    }

    ChatReply reply;
    reply.text = expand(entry.at("reply").get<std::string>(), req, index);
    if (entry.contains("usage")) {
      if (auto u = parse_usage(entry["usage"])) {
        reply.usage = *u;
      } else {
        reply.usage_warning = true;
      }
    } else {
      reply.usage = estimate_usage(req, reply.text);
    }
    return reply;
  }

  json state() const override {
    std::lock_guard lock(mu_);
    json j = json::object();
    for (const auto& [k, v] : counters_) j[k] = v;
    return j;
  }

  void restore(const json& j) override {
    std::lock_guard lock(mu_);
    counters_.clear();
    for (const auto& [k, v] : j.items()) counters_[k] = v.get<std::uint64_t>();
  }

 private:
  static std::string expand(const std::string& tmpl, const ChatRequest& req, std::uint64_t index) {
    std::uint64_t h = fnv1a64(to_string(req.role) + "|" + std::to_string(index) + "|" + req.text());
    for (const auto& p : req.parts) {
      if (p.kind == MessagePart::Kind::image) h = fnv1a64(p.data, h);
    }
    std::string out;
    size_t pos = 0, salt = 0;
    while (true) {
      size_t start = tmpl.find("${", pos);
      if (start == std::string::npos) break;
      size_t end = tmpl.find('}', start);
      if (end == std::string::npos) break;
      out += tmpl.substr(pos, start - pos);
      const std::string token = tmpl.substr(start + 2, end - start - 2);
      const std::uint64_t r = fnv1a64(std::to_string(salt++), h);
      if (token == "index") {
        out += std::to_string(index);
      } else if (text::starts_with(token, "choice:") && token.size() > 7) {
        const std::string letters = token.substr(7);
        out += letters[r % letters.size()];
      } else if (text::starts_with(token, "pick:")) {
        std::vector<std::string> options;
        std::string rest = token.substr(5);
        size_t bar;
        while ((bar = rest.find('|')) != std::string::npos) {
          options.push_back(rest.substr(0, bar));
          rest = rest.substr(bar + 1);
        }
        options.push_back(rest);
        out += options[r % options.size()];
      } else {
        out += tmpl.substr(start, end - start + 1);
      }
      pos = end + 1;
    }
    out += tmpl.substr(pos);
    return out;
  }

  json script_;
  std::string id_;
  mutable std::mutex mu_;
  std::map<std::string, std::uint64_t> counters_;
};

}  // namespace vpe
