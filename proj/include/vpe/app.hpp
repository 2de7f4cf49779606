// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Run lifecycle behind the command-line tool: environments built from a
// snapshot description, the artifact lock, boundary snapshots, reports.

#include <fcntl.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "vpe/engine.hpp"
#include "vpe/export.hpp"
#include "vpe/http.hpp"

namespace vpe {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitOther = 1, kExitConfig = 2, kExitAborted = 3, kExitExhausted = 4 };

/// Exclusive ownership of an artifact directory for the life of a run.
class ArtifactLock {
 public:
  explicit ArtifactLock(const fs::path& dir) : path_(dir / ".vpe.lock") {
    fs::create_directories(dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST) {
        throw ConfigError("artifact directory " + dir.string() + " is locked by another run (remove " +
                          path_.string() + " if that run is gone)");
      }
      throw ConfigError("cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd, pid.data(), pid.size()) < 0) spdlog::warn("could not write pid to {}", path_.string());
    ::close(fd);
  }
  ~ArtifactLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  ArtifactLock(const ArtifactLock&) = delete;
  ArtifactLock& operator=(const ArtifactLock&) = delete;

 private:
  fs::path path_;
};

/// Where model calls and tool calls go.
struct ClientOptions {
  bool offline = false;
  // Scripted backend for offline runs.
  fs::path script;
  // Tool server for online runs; VPE_TOOL_SERVER_URL when empty.
  std::string tool_server;
};

struct Clients {
  std::shared_ptr<Backend> backend;
  std::unique_ptr<Gateway> gateway;
  std::unique_ptr<ToolClient> tools;
};

inline json load_json_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw ConfigError(std::string(what) + " " + p.string() + " does not exist");
  json j = json::parse(read_file(p), nullptr, false);
  if (j.is_discarded()) throw ConfigError(std::string(what) + " " + p.string() + " is not valid JSON");
  return j;
}

/// Offline: scripted backend plus the deterministic local tool stub.
/// Online: HTTP backend from the environment plus the tool server, which
/// must not be in stub mode.
inline Clients make_clients(const ClientOptions& o) {
  Clients c;
  if (o.offline) {
    if (o.script.empty()) throw ConfigError("--offline task runs need --script");
    c.backend = std::make_shared<ScriptedBackend>(load_json_file(o.script, "script"));
    c.tools = std::make_unique<OfflineToolClient>();
  } else {
    c.backend = std::make_shared<HttpBackend>(HttpBackend::options_from_env());
    const std::string url = o.tool_server.empty() ? env_or("VPE_TOOL_SERVER_URL") : o.tool_server;
    if (url.empty()) throw ConfigError("VPE_TOOL_SERVER_URL is not set (use --offline for stub tools)");
    auto tools = std::make_unique<HttpToolClient>(url);
    const json health = tools->health();
    if (health.value("mode", std::string()) == "stub") {
      throw ConfigError("tool server at " + url + " runs in stub mode; refusing a real run (use --offline)");
    }
    c.tools = std::move(tools);
  }
  c.gateway = std::make_unique<Gateway>(c.backend);
  return c;
}

inline std::string relative_to(const fs::path& p, const fs::path& base) {
  return fs::relative(fs::absolute(p), fs::absolute(base)).generic_string();
}

/// Everything a run needs besides the exploration config.
struct RunSetup {
  // Exactly one of the two.
  std::optional<fs::path> task_manifest;
  std::optional<LandscapeConfig> landscape;
  ClientOptions clients;
  fs::path artifacts;
  fs::path snapshot;
};

/// A constructed environment plus the clients it borrows.
struct Session {
  Clients clients;
  std::unique_ptr<Environment> env;
};

/// Snapshot description: paths are stored relative to the snapshot's
/// directory so a run directory can be moved as a whole.
inline json describe_setup(const RunSetup& s) {
  const fs::path base = s.snapshot.parent_path().empty() ? fs::path(".") : s.snapshot.parent_path();
  if (s.landscape) return json{{"kind", "landscape"}, {"landscape", *s.landscape}};
  json d{{"kind", "task"},
         {"manifest", relative_to(*s.task_manifest, base)},
         {"offline", s.clients.offline},
         {"script", s.clients.script.empty() ? json(nullptr) : json(relative_to(s.clients.script, base))}};
  return d;
}

inline Session open_session(const RunSetup& s, const ExplorationConfig& cfg) {
  Session out;
  if (s.landscape) {
    out.env = std::make_unique<LandscapeEnvironment>(*s.landscape);
    return out;
  }
  Task task = load_task(*s.task_manifest);
  if (task.dev_ids.empty()) throw ConfigError("task '" + task.name + "' has an empty dev split");
  out.clients = make_clients(s.clients);
  ExecutorOptions eo;
  eo.eval_width = cfg.eval_width;
  eo.artifact_root = s.artifacts;
  out.env = std::make_unique<AgentEnvironment>(std::move(task), *out.clients.gateway, *out.clients.tools, eo,
                                               describe_setup(s));
  return out;
}

/// Rebuilds a RunSetup from a snapshot's environment section.
inline RunSetup setup_from_snapshot(const RunState& st, const fs::path& snapshot, const ClientOptions& override_clients) {
  const fs::path base = snapshot.parent_path().empty() ? fs::path(".") : snapshot.parent_path();
  RunSetup s;
  s.snapshot = snapshot;
  s.artifacts = base / st.artifact_root;
  const std::string kind = st.environment.value("kind", std::string());
  if (kind == "landscape") {
    s.landscape = st.environment.at("landscape").get<LandscapeConfig>();
  } else if (kind == "task") {
    s.task_manifest = base / st.environment.at("manifest").get<std::string>();
    s.clients = override_clients;
    if (st.environment.value("offline", false)) s.clients.offline = true;
    if (s.clients.script.empty() && st.environment.contains("script") && !st.environment["script"].is_null()) {
      s.clients.script = base / st.environment["script"].get<std::string>();
    }
  } else {
    throw SnapshotError("snapshot has unknown environment kind '" + kind + "'");
  }
  return s;
}

struct RunOutcome {
  int exit_code = kExitOk;
  std::optional<RunState> final_state;
};

inline void print_report(std::ostream& os, const Explorer& ex, const Environment& env) {
  const auto& c = ex.config();
  os << "vpe exploration report\n";
  os << "lambda_expl=" << c.lambda_expl << " lambda_novel=" << c.lambda_novel << " lambda_sat=" << c.lambda_sat
     << " k=" << c.k << "\n";
  os << "policy=" << to_string(c.policy) << " seed=" << c.seed << " iterations=" << ex.iteration() << "/"
     << c.iteration_budget << " status=" << to_string(ex.status()) << "\n";
  const SearchTree& t = ex.tree();
  size_t rejected = 0;
  for (const auto& n : t.nodes()) rejected += n.status == NodeStatus::rejected;
  os << "nodes=" << t.size() << " executed=" << t.executed_count() << " rejected=" << rejected << "\n";
  const NodeId best = t.best_node();
  const IdeaNode& b = t.at(best);
  os << "best node: " << to_int(best) << "\n";
  os << "  idea: " << b.idea << "\n";
  if (b.record && !b.record->sample_results.empty()) {
    os << "  dev accuracy: " << text::fixed(*b.reward, 6) << " (" << b.record->correct_count() << "/"
       << b.record->sample_results.size() << ")\n";
  } else {
    os << "  reward: " << text::fixed(*b.reward, 6) << "\n";
  }
  if (b.implementation) os << "  program: " << json(*b.implementation).dump() << "\n";
  if (const auto* land = dynamic_cast<const LandscapeEnvironment*>(&env)) {
    os << "  pool optimum: " << text::fixed(land->landscape().pool_optimum(), 6) << "\n";
  }
  const CostSummary cost = ex.costs();
  os << "tokens: ledger=" << cost.ledger_total.total() << " execution=" << cost.execution.total()
     << " agents=" << cost.agents.total() << "\n";
}

/// Drives an Explorer with boundary snapshots. `stop_after` stops at that
/// boundary with status "aborted" so the run can be resumed.
class RunDriver {
 public:
  RunDriver(Explorer& ex, fs::path snapshot, std::string artifact_root)
      : ex_(ex), snapshot_(std::move(snapshot)), artifact_root_(std::move(artifact_root)) {}

  RunOutcome drive(std::optional<int> stop_after) {
    RunOutcome out;
    std::optional<RunState> last;
    auto save = [&](RunState s) {
      s.artifact_root = artifact_root_;
      write_snapshot(snapshot_, s);
      last = std::move(s);
    };
    try {
      if (ex_.iteration() == 0 && ex_.tree().empty()) ex_.initialize();
      if (!last || last->iteration_counter != ex_.iteration()) save(ex_.state());
      ex_.run(stop_after, save);
      RunState final_state = ex_.state();
      if (ex_.iteration() < ex_.config().iteration_budget) {
        final_state.status = RunStatus::aborted;
        out.exit_code = kExitAborted;
        spdlog::info("stopped at iteration {}; resume to continue", ex_.iteration());
      }
      save(final_state);
      out.final_state = std::move(final_state);
    } catch (const ExhaustedFrontierError& e) {
      spdlog::error("{}", e.what());
      if (last) {
        last->status = RunStatus::completed;
        save(*last);
      }
      out.exit_code = kExitExhausted;
      out.final_state = last;
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      spdlog::error("run aborted: {}", e.what());
      if (!last) throw;
      last->status = RunStatus::aborted;
      save(*last);
      out.exit_code = kExitAborted;
      out.final_state = last;
    }
    return out;
  }

 private:
  Explorer& ex_;
  fs::path snapshot_;
  std::string artifact_root_;
};

inline RunOutcome run_explore(const RunSetup& setup, const ExplorationConfig& cfg, std::optional<int> stop_after,
                              std::ostream& report) {
  cfg.validate();
  ArtifactLock lock(setup.artifacts);
  Session session = open_session(setup, cfg);
  Explorer ex(cfg, *session.env);
  const fs::path base = setup.snapshot.parent_path().empty() ? fs::path(".") : setup.snapshot.parent_path();
  RunDriver driver(ex, setup.snapshot, relative_to(setup.artifacts, base));
  RunOutcome out = driver.drive(stop_after);
  if (!ex.tree().empty()) print_report(report, ex, *session.env);
  return out;
}

inline RunOutcome run_resume(const fs::path& snapshot, const ClientOptions& clients, std::optional<int> iterations,
                             std::optional<int> stop_after, std::ostream& report) {
  RunState st = read_snapshot(snapshot);
  RunSetup setup = setup_from_snapshot(st, snapshot, clients);
  if (iterations) {
    st.config.iteration_budget = *iterations;
    if (st.iteration_counter < *iterations && st.status == RunStatus::completed) st.status = RunStatus::running;
  }
  ArtifactLock lock(setup.artifacts);
  Session session = open_session(setup, st.config);
  Explorer ex(st.config, *session.env);
  ex.restore(st);
  RunOutcome out;
  if (ex.iteration() >= ex.config().iteration_budget) {
    spdlog::info("snapshot is already complete");
    out.final_state = ex.state();
  } else {
    RunDriver driver(ex, snapshot, st.artifact_root);
    out = driver.drive(stop_after);
  }
  print_report(report, ex, *session.env);
  return out;
}

/// Resolves "best" (max reward, lowest id on ties) or a numeric id.
inline NodeId resolve_node(const SearchTree& tree, const std::string& which) {
  if (which == "best") return tree.best_node();
  size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(which, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != which.size() || which.empty()) throw ConfigError("node must be 'best' or a node id, got '" + which + "'");
  const NodeId id = node_id(static_cast<std::uint32_t>(v));
  if (!tree.contains(id)) throw ConfigError("unknown node id " + which);
  if (!tree.at(id).executed()) throw ConfigError("node " + which + " is " + to_string(tree.at(id).status));
  return id;
}

struct InferenceReport {
  NodeId node{};
  size_t correct = 0;
  size_t total = 0;
  double accuracy = 0.0;
  std::uint64_t span_tokens = 0;
  double mean_tokens_per_sample = 0.0;
};

/// Evaluates an executed node's program on a test split. Uses the manifest's
/// test ids, or every sample when the manifest has no split.
inline InferenceReport run_inference(const fs::path& snapshot, const std::string& which,
                                     std::optional<fs::path> manifest, const ClientOptions& clients,
                                     const fs::path& out_dir) {
  const RunState st = read_snapshot(snapshot);
  const RunSetup setup = setup_from_snapshot(st, snapshot, clients);
  if (!setup.task_manifest) throw ConfigError("inference needs a task snapshot, not a landscape run");
  const NodeId id = resolve_node(st.tree, which);
  const Task task = load_task(manifest ? *manifest : *setup.task_manifest);
  std::vector<Sample> samples = task.test_ids.empty() ? task.samples : task.test();
  if (samples.empty()) throw ConfigError("test split of '" + task.name + "' is empty");

  ArtifactLock lock(out_dir);
  Clients c = make_clients(setup.clients);
  ExecutorOptions eo;
  eo.eval_width = st.config.eval_width;
  eo.artifact_root = out_dir;
  Executor ex(*c.gateway, *c.tools, ToolCatalog::standard(), eo);
  const size_t mark = c.gateway->ledger_size();
  const ExperimentRecord r = ex.evaluate_on_devset(id, *st.tree.at(id).implementation, samples);

  InferenceReport rep;
  rep.node = id;
  rep.correct = r.correct_count();
  rep.total = r.sample_results.size();
  rep.accuracy = r.reward;
  rep.span_tokens = c.gateway->ledger_total(mark).total();
  rep.mean_tokens_per_sample = static_cast<double>(rep.span_tokens) / static_cast<double>(rep.total);
  write_file(out_dir / "inference.json",
             json{{"node", id}, {"record", r}, {"ledger", c.gateway->ledger()}}.dump(2) + "\n");
  return rep;
}

inline std::string run_export(const fs::path& snapshot, ExportFormat format) {
  return export_tree(read_snapshot(snapshot).tree, format);
}

}  // namespace vpe
