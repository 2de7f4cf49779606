// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

// vpe: explore / resume / infer / export-tree.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <optional>
#include <string>

#include "vpe/app.hpp"

namespace {

struct Args {
  std::string config;
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;
  std::string snapshot;
  bool offline = false;
  std::string script;
  std::string policy;
  std::string task;
  std::string landscape;
  bool default_landscape = false;
  std::string artifacts;
  std::optional<int> stop_after;
  std::string tool_server;
  std::string node = "best";
  std::string format = "graph-dot";
  std::string out;
  std::string log_level = "info";
};

vpe::ExplorationConfig load_config(const Args& a) {
  vpe::ExplorationConfig c;
  if (!a.config.empty()) c = vpe::load_json_file(a.config, "config").get<vpe::ExplorationConfig>();
  if (a.iterations) c.iteration_budget = *a.iterations;
  if (a.seed) c.seed = *a.seed;
  if (!a.policy.empty()) c.policy = vpe::parse_policy(a.policy);
  c.validate();
  return c;
}

vpe::ClientOptions client_options(const Args& a) {
  vpe::ClientOptions o;
  o.offline = a.offline;
  o.script = a.script;
  o.tool_server = a.tool_server;
  return o;
}

int explore(const Args& a) {
  const vpe::ExplorationConfig cfg = load_config(a);
  vpe::RunSetup s;
  const int sources = !a.task.empty() + !a.landscape.empty() + a.default_landscape;
  if (sources != 1) throw vpe::ConfigError("give exactly one of --task, --landscape, --default-landscape");
  if (!a.task.empty()) {
    s.task_manifest = a.task;
  } else if (!a.landscape.empty()) {
    s.landscape = vpe::load_json_file(a.landscape, "landscape").get<vpe::LandscapeConfig>();
  } else {
    s.landscape = vpe::LandscapeConfig::default_three_peak();
  }
  s.clients = client_options(a);
  s.artifacts = a.artifacts.empty() ? std::string("vpe-run") : a.artifacts;
  s.snapshot = a.snapshot.empty() ? s.artifacts / "snapshot.json" : vpe::fs::path(a.snapshot);
  return vpe::run_explore(s, cfg, a.stop_after, std::cout).exit_code;
}

int resume(const Args& a) {
  if (a.snapshot.empty()) throw vpe::ConfigError("resume needs --snapshot");
  return vpe::run_resume(a.snapshot, client_options(a), a.iterations, a.stop_after, std::cout).exit_code;
}

int infer(const Args& a) {
  if (a.snapshot.empty()) throw vpe::ConfigError("infer needs --snapshot");
  const vpe::fs::path snap = a.snapshot;
  const vpe::fs::path out = a.artifacts.empty() ? snap.parent_path() / "inference" : vpe::fs::path(a.artifacts);
  std::optional<vpe::fs::path> manifest;
  if (!a.task.empty()) manifest = a.task;
  const auto r = vpe::run_inference(snap, a.node, manifest, client_options(a), out);
  std::cout << "node " << vpe::to_int(r.node) << "\n";
  std::cout << "accuracy " << vpe::text::fixed(r.accuracy, 6) << " (" << r.correct << "/" << r.total << ")\n";
  std::cout << "tokens " << r.span_tokens << " mean_per_sample " << vpe::text::fixed(r.mean_tokens_per_sample, 2)
            << "\n";
  return vpe::kExitOk;
}

int export_tree(const Args& a) {
  if (a.snapshot.empty()) throw vpe::ConfigError("export-tree needs --snapshot");
  const std::string body = vpe::run_export(a.snapshot, vpe::parse_export_format(a.format));
  if (a.out.empty()) {
    std::cout << body;
  } else {
    vpe::write_file(a.out, body);
  }
  return vpe::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  Args a;
  CLI::App app{"Visual prompt exploration over an idea tree"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--log-level", a.log_level, "trace, debug, info, warn, error");

  auto common = [&](CLI::App* c) {
    c->add_option("--snapshot", a.snapshot, "snapshot file");
    c->add_flag("--offline", a.offline, "scripted model backend and local stub tools");
    c->add_option("--script", a.script, "scripted backend JSON (offline)");
    c->add_option("--tool-server", a.tool_server, "tool server base URL (default $VPE_TOOL_SERVER_URL)");
  };

  CLI::App* ex = app.add_subcommand("explore", "run an exploration");
  common(ex);
  ex->add_option("--config", a.config, "ExplorationConfig JSON");
  ex->add_option("--iterations", a.iterations, "iteration budget");
  ex->add_option("--seed", a.seed, "RNG seed");
  ex->add_option("--policy", a.policy, "nuct, greedy or random");
  ex->add_option("--task", a.task, "task manifest (JSONL)");
  ex->add_option("--landscape", a.landscape, "synthetic landscape JSON");
  ex->add_flag("--default-landscape", a.default_landscape, "built-in three-peak landscape");
  ex->add_option("--artifacts", a.artifacts, "artifact directory (default vpe-run)");
  ex->add_option("--stop-after", a.stop_after, "stop at this iteration boundary, resumable");

  CLI::App* rs = app.add_subcommand("resume", "continue a run from its snapshot");
  common(rs);
  rs->add_option("--iterations", a.iterations, "new iteration budget");
  rs->add_option("--stop-after", a.stop_after, "stop at this iteration boundary, resumable");

  CLI::App* in = app.add_subcommand("infer", "evaluate a node on the test split");
  common(in);
  in->add_option("--node", a.node, "node id or 'best'");
  in->add_option("--task", a.task, "test manifest (default: the run's manifest)");
  in->add_option("--artifacts", a.artifacts, "output directory (default <snapshot dir>/inference)");

  CLI::App* et = app.add_subcommand("export-tree", "write the tree as graphviz or structured JSON");
  et->add_option("--snapshot", a.snapshot, "snapshot file");
  et->add_option("--format", a.format, "graph-dot or structured");
  et->add_option("--out", a.out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return vpe::kExitConfig;
  }

  auto logger = spdlog::stderr_color_mt("vpe");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(a.log_level));

  try {
    if (*ex) return explore(a);
    if (*rs) return resume(a);
    if (*in) return infer(a);
    if (*et) return export_tree(a);
  } catch (const vpe::ConfigError& e) {
    spdlog::error("{}", e.what());
    return vpe::kExitConfig;
  } catch (const vpe::DatasetError& e) {
    spdlog::error("{}", e.what());
    return vpe::kExitConfig;
  } catch (const vpe::SnapshotError& e) {
    spdlog::error("{}", e.what());
    return vpe::kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return vpe::kExitOther;
  }
  return vpe::kExitOther;
}
