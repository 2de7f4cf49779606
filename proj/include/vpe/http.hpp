// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// HTTP transports: the tool-server client and an OpenAI-compatible chat
// backend. Both require cpp-httplib; TLS needs CPPHTTPLIB_OPENSSL_SUPPORT
// defined consistently in every translation unit (the CMake target does it).

#include <httplib.h>

#include <cstdlib>
#include <memory>
#include <string>

#include "vpe/common.hpp"
#include "vpe/gateway.hpp"
#include "vpe/tools.hpp"

namespace vpe {

/// "https://host:port/prefix" -> ("https://host:port", "/prefix").
struct BaseUrl {
  std::string origin;
  std::string prefix;

  static BaseUrl parse(const std::string& url) {
    const size_t scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("URL needs a scheme: '" + url + "'");
    const size_t path = url.find('/', scheme + 3);
    BaseUrl b;
    b.origin = url.substr(0, path);
    b.prefix = path == std::string::npos ? "" : url.substr(path);
    while (!b.prefix.empty() && b.prefix.back() == '/') b.prefix.pop_back();
    return b;
  }
};

inline std::string env_or(const char* name, const std::string& fallback = "") {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

/// Tool-server client for POST /v1/tools/{name} and GET /healthz.
class HttpToolClient : public ToolClient {
 public:
  explicit HttpToolClient(const std::string& base_url, int timeout_seconds = 60)
      : url_(BaseUrl::parse(base_url)), timeout_(timeout_seconds) {}

  std::string fingerprint() const override { return "http-tools:" + url_.origin + url_.prefix; }

  json health() override {
    auto client = connect();
    auto res = client.Get(url_.prefix + "/healthz");
    if (!res) throw ToolError("tool server unreachable at " + url_.origin + ": " + httplib::to_string(res.error()));
    if (res->status != 200) throw ToolError("tool server health check returned HTTP " + std::to_string(res->status));
    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("mode") || !j["mode"].is_string()) {
      throw ToolError("tool server health response is malformed");
    }
    return j;
  }

  Value call(const std::string& tool, const Image& image, const json& params) override {
    const json body = make_tool_request(image, params);
    auto client = connect();
    auto res = client.Post(url_.prefix + "/v1/tools/" + tool, body.dump(), "application/json");
    if (!res) throw ToolError("tool server unreachable at " + url_.origin + ": " + httplib::to_string(res.error()));
    json j = json::parse(res->body, nullptr, false);
    if (res->status != 200) {
      std::string msg = "HTTP " + std::to_string(res->status);
      if (!j.is_discarded() && j.contains("error") && j["error"].is_object()) {
        msg += " " + j["error"].value("code", std::string("error")) + ": " + j["error"].value("message", std::string());
      }
      throw ToolError(tool + " failed: " + msg);
    }
    if (j.is_discarded()) throw ToolError(tool + " response is not JSON");
    return parse_tool_response(tool, j, image);
  }

 private:
  // One connection per request, so concurrent sample workers never share one.
  httplib::Client connect() const {
    httplib::Client c(url_.origin);
    c.set_connection_timeout(timeout_);
    c.set_read_timeout(timeout_);
    return c;
  }

  BaseUrl url_;
  int timeout_;
};

/// Builds the chat-completions body for a request.
inline json openai_request_body(const ChatRequest& req, const std::string& model) {
  json content = json::array();
  for (const auto& p : req.parts) {
    if (p.kind == MessagePart::Kind::text) {
      content.push_back({{"type", "text"}, {"text", p.data}});
    } else {
      content.push_back({{"type", "image_url"},
                         {"image_url", {{"url", "data:image/png;base64," + base64_encode(p.data)}}}});
    }
  }
  json body{{"model", model},
            {"messages", json::array({{{"role", "user"}, {"content", content}}})},
            {"max_tokens", req.decoding.max_output_tokens},
            {"temperature", req.decoding.temperature}};
  if (req.decoding.reasoning) body["reasoning_effort"] = "medium";
  return body;
}

/// Reads reply text and usage from a chat-completions response. A missing
/// or malformed usage block yields zero usage with the warning flag.
inline ChatReply parse_openai_response(const json& j) {
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw GatewayError("response has no choices");
  }
  const json& msg = j["choices"][0].value("message", json::object());
  if (!msg.contains("content") || !msg["content"].is_string()) throw GatewayError("response message has no text");
  ChatReply r;
  r.text = msg["content"].get<std::string>();
  const json usage = j.value("usage", json());
  auto count = [](const json& v) -> std::optional<std::uint64_t> {
    if (!v.is_number_integer() || v.get<long long>() < 0) return std::nullopt;
    return v.get<std::uint64_t>();
  };
  if (!usage.is_object() || !usage.contains("prompt_tokens") || !usage.contains("completion_tokens")) {
    r.usage_warning = true;
    return r;
  }
  auto in = count(usage["prompt_tokens"]);
  auto out = count(usage["completion_tokens"]);
  std::optional<std::uint64_t> reasoning = 0;
  if (usage.contains("completion_tokens_details") && usage["completion_tokens_details"].is_object() &&
      usage["completion_tokens_details"].contains("reasoning_tokens")) {
    reasoning = count(usage["completion_tokens_details"]["reasoning_tokens"]);
  }
  if (!in || !out || !reasoning || *reasoning > *out) {
    r.usage_warning = true;
    return r;
  }
  // Reasoning tokens are billed inside completion_tokens; split them out.
  r.usage = {*in, *out - *reasoning, *reasoning};
  return r;
}

/// OpenAI-compatible chat-completions backend. Agents and the target model
/// may use different model names.
class HttpBackend : public Backend {
 public:
  struct Options {
    std::string base_url;
    std::string api_key;
    std::string agent_model;
    std::string target_model;
    int timeout_seconds = 120;
  };

  /// Reads VPE_LLM_BASE_URL, VPE_LLM_API_KEY, VPE_AGENT_MODEL, VPE_TARGET_MODEL.
  static Options options_from_env() {
    Options o;
    o.base_url = env_or("VPE_LLM_BASE_URL");
    o.api_key = env_or("VPE_LLM_API_KEY");
    o.agent_model = env_or("VPE_AGENT_MODEL");
    o.target_model = env_or("VPE_TARGET_MODEL", o.agent_model);
    if (o.base_url.empty()) throw ConfigError("VPE_LLM_BASE_URL is not set (use --offline for scripted runs)");
    if (o.agent_model.empty()) throw ConfigError("VPE_AGENT_MODEL is not set");
    return o;
  }

  explicit HttpBackend(Options o) : opts_(std::move(o)), url_(BaseUrl::parse(opts_.base_url)) {}

  std::string id() const override { return "http:" + url_.origin; }
  std::string fingerprint() const override {
    return id() + "|" + opts_.agent_model + "|" + opts_.target_model;
  }

  ChatReply send(const ChatRequest& req) override {
    const std::string& model = req.role == Role::target_model ? opts_.target_model : opts_.agent_model;
    httplib::Client client(url_.origin);
    client.set_connection_timeout(opts_.timeout_seconds);
    client.set_read_timeout(opts_.timeout_seconds);
    if (!opts_.api_key.empty()) client.set_bearer_token_auth(opts_.api_key);
    auto res = client.Post(url_.prefix + "/chat/completions", openai_request_body(req, model).dump(),
                            "application/json");
    if (!res) throw TransientError("connection failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
      throw TransientError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    if (res->status != 200) throw GatewayError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw TransientError("response is not JSON");
    return parse_openai_response(j);
  }

 private:
  Options opts_;
  BaseUrl url_;
};

}  // namespace vpe
