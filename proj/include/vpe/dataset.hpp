// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "vpe/common.hpp"
#include "vpe/image.hpp"

namespace vpe {

enum class AnswerMode { multiple_choice, exact, numeric };

inline std::string to_string(AnswerMode m) {
  switch (m) {
    case AnswerMode::multiple_choice: return "multiple_choice";
    case AnswerMode::exact: return "exact";
    case AnswerMode::numeric: return "numeric";
  }
  return "?";
}

inline std::optional<AnswerMode> parse_answer_mode(const std::string& s) {
  if (s == "multiple_choice") return AnswerMode::multiple_choice;
  if (s == "exact") return AnswerMode::exact;
  if (s == "numeric") return AnswerMode::numeric;
  return std::nullopt;
}

/// First choice letter in a prediction: a parenthesized letter "(B)" wins,
/// otherwise the first standalone capital A-H, otherwise a reply that is a
/// single letter of either case.
inline std::optional<char> extract_choice(const std::string& prediction) {
  static const std::regex kParen(R"(\(\s*([A-Za-z])\s*\))");
  static const std::regex kBare(R"((?:^|[^A-Za-z0-9])([A-H])(?![A-Za-z0-9]))");
  std::smatch m;
  if (std::regex_search(prediction, m, kParen)) return static_cast<char>(std::toupper(m[1].str()[0]));
  if (std::regex_search(prediction, m, kBare)) return m[1].str()[0];
  const std::string t = text::trim(prediction);
  if (t.size() == 1 && std::isalpha(static_cast<unsigned char>(t[0]))) {
    return static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
  }
  return std::nullopt;
}

inline std::optional<double> extract_number(const std::string& s) {
  static const std::regex kNum(R"([-+]?(?:\d+\.?\d*|\.\d+))");
  std::smatch m;
  if (!std::regex_search(s, m, kNum)) return std::nullopt;
  return std::stod(m[0].str());
}

inline bool match_answer(const std::string& prediction, const std::string& truth, AnswerMode mode) {
  switch (mode) {
    case AnswerMode::multiple_choice: {
      auto p = extract_choice(prediction);
      auto t = extract_choice(truth);
      return p && t && *p == *t;
    }
    case AnswerMode::exact:
      return text::lower(text::trim(prediction)) == text::lower(text::trim(truth));
    case AnswerMode::numeric: {
      auto p = extract_number(prediction);
      auto t = extract_number(truth);
      return p && t && *p == *t;
    }
  }
  return false;
}

struct Sample {
  std::string id;
  std::filesystem::path image_path;
  std::string question;
  std::string answer;
  AnswerMode mode = AnswerMode::multiple_choice;
  // Encoded file contents, loaded once.
  std::shared_ptr<const std::string> image_bytes;
};

struct Task {
  std::string name;
  std::string problem_description;
  std::vector<Sample> samples;
  std::vector<std::string> dev_ids;
  std::vector<std::string> test_ids;

  const Sample& sample(const std::string& id) const {
    for (const auto& s : samples) {
      if (s.id == id) return s;
    }
    throw DatasetError("unknown sample '" + id + "'");
  }

  std::vector<Sample> select(const std::vector<std::string>& ids) const {
    std::vector<Sample> out;
    for (const auto& id : ids) out.push_back(sample(id));
    return out;
  }
  std::vector<Sample> dev() const { return select(dev_ids); }
  std::vector<Sample> test() const { return select(test_ids); }
};

/// Deterministic dev split: Fisher-Yates over the manifest order with a
/// seeded mt19937_64 (index drawn as rng() % (i + 1)), first `dev_size` ids.
inline std::vector<std::string> sample_split(std::vector<std::string> ids, size_t dev_size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (size_t i = ids.size(); i-- > 1;) {
    const size_t j = static_cast<size_t>(rng() % (i + 1));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(std::min(dev_size, ids.size()));
  return ids;
}

/// Loads a JSONL manifest. An optional first line {"task": {...}} carries
/// name, problem_description and the split (explicit "dev"/"test" id lists,
/// or "dev_size" + "split_seed"); every other line is one sample
/// {"sample_id", "image", "question", "answer", "answer_mode"} with the image
/// path relative to the manifest. Without a split, every sample is dev.
inline Task load_task(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DatasetError("cannot open manifest " + manifest.string());
  const auto base = manifest.parent_path();
  Task task;
  task.name = manifest.stem().string();
  json header = json::object();
  std::set<std::string> seen;
  std::vector<std::string> duplicates, missing, errors;

  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const std::string where = manifest.string() + ":" + std::to_string(lineno);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      errors.push_back(where + ": not a JSON object");
      continue;
    }
    if (j.contains("task")) {
      header = j["task"];
      continue;
    }
    Sample s;
    try {
      s.id = j.at("sample_id").is_string() ? j["sample_id"].get<std::string>() : j["sample_id"].dump();
      s.image_path = base / j.at("image").get<std::string>();
      s.question = j.at("question").get<std::string>();
      s.answer = j.at("answer").is_string() ? j["answer"].get<std::string>() : j["answer"].dump();
      const std::string mode = j.value("answer_mode", std::string("multiple_choice"));
      auto m = parse_answer_mode(mode);
      if (!m) {
        errors.push_back(where + ": unknown answer_mode '" + mode + "'");
        continue;
      }
      s.mode = *m;
    } catch (const json::exception& e) {
      errors.push_back(where + ": " + e.what());
      continue;
    }
    if (!seen.insert(s.id).second) {
      duplicates.push_back(s.id);
      continue;
    }
    if (!std::filesystem::exists(s.image_path)) {
      missing.push_back(s.image_path.string());
    } else {
      try {
        auto bytes = std::make_shared<std::string>(read_file(s.image_path));
        decode_image(*bytes);
        s.image_bytes = std::move(bytes);
      } catch (const Error& e) {
        errors.push_back(where + ": " + e.what());
      }
    }
    task.samples.push_back(std::move(s));
  }

  if (!errors.empty()) throw DatasetError("invalid manifest:\n  " + text::join(errors, "\n  "));
  if (!duplicates.empty()) throw DatasetError("duplicate sample ids: " + text::join(duplicates, ", "));
  if (!missing.empty()) throw DatasetError("missing image files:\n  " + text::join(missing, "\n  "));
  if (task.samples.empty()) throw DatasetError("manifest " + manifest.string() + " has no samples");

  task.name = header.value("name", task.name);
  task.problem_description = header.value("problem_description", std::string());
  std::vector<std::string> all;
  for (const auto& s : task.samples) all.push_back(s.id);
  if (header.contains("dev")) {
    task.dev_ids = header["dev"].get<std::vector<std::string>>();
  } else if (header.contains("dev_size")) {
    task.dev_ids = sample_split(all, header["dev_size"].get<size_t>(), header.value("split_seed", 0ULL));
  } else {
    task.dev_ids = all;
  }
  if (header.contains("test")) {
    task.test_ids = header["test"].get<std::vector<std::string>>();
  } else if (header.contains("dev") || header.contains("dev_size")) {
    std::set<std::string> dev(task.dev_ids.begin(), task.dev_ids.end());
    for (const auto& id : all) {
      if (!dev.count(id)) task.test_ids.push_back(id);
    }
  }

  std::vector<std::string> unknown, overlap;
  for (const auto* ids : {&task.dev_ids, &task.test_ids}) {
    for (const auto& id : *ids) {
      if (!seen.count(id)) unknown.push_back(id);
    }
  }
  std::set<std::string> dev(task.dev_ids.begin(), task.dev_ids.end());
  for (const auto& id : task.test_ids) {
    if (dev.count(id)) overlap.push_back(id);
  }
  if (!unknown.empty()) throw DatasetError("split names unknown samples: " + text::join(unknown, ", "));
  if (!overlap.empty()) throw DatasetError("dev and test splits overlap: " + text::join(overlap, ", "));
  if (task.dev_ids.empty()) throw DatasetError("dev split is empty");
  return task;
}

}  // namespace vpe
