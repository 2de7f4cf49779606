// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

// Rasterizer, executor, dataset and tool wire-format tests.

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <thread>

#include "vpe/dataset.hpp"
#include "vpe/executor.hpp"
#include "vpe/gateway.hpp"
#include "vpe/http.hpp"
#include "vpe/image.hpp"
#include "vpe/raster.hpp"
#include "vpe/tools.hpp"

using namespace vpe;
namespace fs = std::filesystem;

namespace {

const Rgb kWhite{255, 255, 255};
const Rgb kRed{255, 0, 0};

Image random_image(std::mt19937_64& g, int w, int h) {
  Image img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(g());
  return img;
}

fs::path fixture_dir() { return fs::path(VPE_SOURCE_DIR) / "samples" / "fixture"; }

json load_json_file_for_test(const fs::path& p) { return json::parse(read_file(p)); }

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("vpe_test_executor_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

// ---- raster ----

TEST(Raster, DiagonalLineOnFourByFour) {
  Image out = raster::draw_line(Image(4, 4, kWhite), {0, 0}, {3, 3}, kRed, 1);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) EXPECT_EQ(out.at(x, y), x == y ? kRed : kWhite) << x << "," << y;
  }
}

TEST(Raster, LineMatchesFloatDdaOracle) {
  // Oracle: at step t of n = max(|dx|, |dy|) the pixel is
  // floor(p0 + d * t / n + 0.5) on both axes.
  std::mt19937_64 g(101);
  for (int trial = 0; trial < 400; ++trial) {
    const int w = 1 + static_cast<int>(g() % 40), h = 1 + static_cast<int>(g() % 40);
    auto coord = [&](int lim) { return static_cast<int>(g() % (lim + 20)) - 10; };
    raster::Point a{coord(w), coord(h)}, b{coord(w), coord(h)};
    Image out = raster::draw_line(Image(w, h, kWhite), a, b, kRed, 1);
    Image want(w, h, kWhite);
    const int n = std::max(std::abs(b.x - a.x), std::abs(b.y - a.y));
    for (int t = 0; t <= n; ++t) {
      const int x = static_cast<int>(std::floor(a.x + static_cast<double>((b.x - a.x) * t) / n + 0.5));
      const int y = static_cast<int>(std::floor(a.y + static_cast<double>((b.y - a.y) * t) / n + 0.5));
      if (want.contains(x, y)) want.set(x, y, kRed);
    }
    ASSERT_EQ(out.pixels, want.pixels) << "trial " << trial;
  }
}

TEST(Raster, WideLineStampsSquares) {
  Image out = raster::draw_line(Image(7, 7, kWhite), {3, 3}, {3, 3}, kRed, 3);
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 7; ++x) EXPECT_EQ(out.at(x, y), (std::abs(x - 3) <= 1 && std::abs(y - 3) <= 1) ? kRed : kWhite);
  }
}

TEST(Raster, GrayscaleIsRoundedLuma) {
  std::mt19937_64 g(5);
  Image in = random_image(g, 64, 64);
  Image out = raster::grayscale(in);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const Rgb p = in.at(x, y), q = out.at(x, y);
      ASSERT_EQ(q.r, q.g);
      ASSERT_EQ(q.g, q.b);
      // 1000 * luma, exact. The result is the nearest integer, ties upward.
      const long s = 299L * p.r + 587L * p.g + 114L * p.b;
      const long diff = 1000L * q.r - s;
      ASSERT_TRUE(diff > -500 && diff <= 500) << s << " -> " << int(q.r);
    }
  }
  EXPECT_EQ(raster::grayscale(Image(1, 1, {255, 255, 255})).at(0, 0), (Rgb{255, 255, 255}));
}

TEST(Raster, CropDimensionsAndPixels) {
  std::mt19937_64 g(6);
  Image in = random_image(g, 10, 10);
  Image c = raster::crop(in, {2, 2, 6, 6});
  ASSERT_EQ(c.width, 4);
  ASSERT_EQ(c.height, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) EXPECT_EQ(c.at(x, y), in.at(x + 2, y + 2));
  }
  Image clipped = raster::crop(in, {-3, 8, 4, 20});
  EXPECT_EQ(clipped.width, 4);
  EXPECT_EQ(clipped.height, 2);
  EXPECT_EQ(clipped.at(0, 0), in.at(0, 8));
  EXPECT_THROW(raster::crop(in, {12, 0, 15, 4}), ToolError);
  EXPECT_THROW(raster::crop(in, {5, 5, 5, 9}), ToolError);
}

TEST(Raster, OverlayBlendOracle) {
  std::mt19937_64 g(7);
  for (double a : {0.0, 0.25, 0.5, 1.0}) {
    Image base = random_image(g, 12, 9), over = random_image(g, 5, 6);
    const raster::Point pos{9, -2};
    Image out = raster::overlay(base, over, pos, a);
    for (int y = 0; y < base.height; ++y) {
      for (int x = 0; x < base.width; ++x) {
        const int ox = x - pos.x, oy = y - pos.y;
        Rgb want = base.at(x, y);
        if (ox >= 0 && oy >= 0 && ox < over.width && oy < over.height) {
          const Rgb b = base.at(x, y), o = over.at(ox, oy);
          auto mix = [&](int bv, int ov) { return static_cast<std::uint8_t>(std::floor((1 - a) * bv + a * ov + 0.5)); };
          want = {mix(b.r, o.r), mix(b.g, o.g), mix(b.b, o.b)};
        }
        ASSERT_EQ(out.at(x, y), want) << a << " " << x << "," << y;
      }
    }
  }
}

TEST(Raster, BoxOutlineAndFill) {
  for (int w = 1; w <= 3; ++w) {
    const raster::Box b{2, 1, 9, 8};
    Image out = raster::draw_box(Image(12, 10, kWhite), b, kRed, w);
    for (int y = 0; y < 10; ++y) {
      for (int x = 0; x < 12; ++x) {
        const bool inside = x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1;
        const bool edge = inside && (x - b.x0 < w || b.x1 - 1 - x < w || y - b.y0 < w || b.y1 - 1 - y < w);
        ASSERT_EQ(out.at(x, y), edge ? kRed : kWhite) << w << " " << x << "," << y;
      }
    }
  }
  Image f = raster::draw_filled_box(Image(5, 5, kWhite), {-2, 3, 2, 99}, kRed);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) EXPECT_EQ(f.at(x, y), (x < 2 && y >= 3) ? kRed : kWhite);
  }
}

TEST(Image, PngRoundTripIsLossless) {
  std::mt19937_64 g(8);
  for (int i = 0; i < 10; ++i) {
    Image img = random_image(g, 1 + static_cast<int>(g() % 50), 1 + static_cast<int>(g() % 50));
    Image back = decode_png(encode_png(img));
    EXPECT_EQ(back.width, img.width);
    EXPECT_EQ(back.pixels, img.pixels);
    EXPECT_EQ(decode_png(base64_decode(base64_encode(encode_png(img)))).pixels, img.pixels);
  }
  EXPECT_THROW(decode_image("not an image"), Error);
}

// ---- answer matching ----

TEST(Match, Modes) {
  EXPECT_TRUE(match_answer("(B)", "B", AnswerMode::multiple_choice));
  EXPECT_TRUE(match_answer("The answer is (C).", "(C)", AnswerMode::multiple_choice));
  EXPECT_TRUE(match_answer("B", "(B)", AnswerMode::multiple_choice));
  EXPECT_FALSE(match_answer("(A)", "(B)", AnswerMode::multiple_choice));
  EXPECT_TRUE(match_answer("The answer is 2 intersections", "2", AnswerMode::numeric));
  EXPECT_FALSE(match_answer("3 lines", "2", AnswerMode::numeric));
  EXPECT_TRUE(match_answer("b", "B", AnswerMode::exact));
  EXPECT_TRUE(match_answer("  Yes ", "yes", AnswerMode::exact));
  EXPECT_FALSE(match_answer("yes!", "yes", AnswerMode::exact));
}

// ---- dataset ----

TEST(Dataset, FixtureSplits) {
  Task t = load_task(fixture_dir() / "manifest.jsonl");
  EXPECT_EQ(t.name, "circle-count");
  EXPECT_EQ(t.dev().size(), 30u);
  EXPECT_EQ(t.test().size(), 10u);
  EXPECT_FALSE(t.problem_description.empty());
  for (const auto& s : t.dev()) ASSERT_TRUE(s.image_bytes);
}

TEST(Dataset, SplitIsDeterministicSubset) {
  std::vector<std::string> ids;
  for (int i = 0; i < 50; ++i) ids.push_back("x" + std::to_string(i));
  auto a = sample_split(ids, 30, 9), b = sample_split(ids, 30, 9), c = sample_split(ids, 30, 10);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(a.size(), 30u);
  EXPECT_EQ(std::set<std::string>(a.begin(), a.end()).size(), 30u);
  EXPECT_EQ(sample_split(ids, 80, 1).size(), 50u);
}

TEST(Dataset, ManifestErrors) {
  const fs::path d = scratch("manifest");
  save_png(d / "a.png", Image(2, 2));
  auto write = [&](const std::string& body) {
    write_file(d / "m.jsonl", body);
    return d / "m.jsonl";
  };
  const std::string a = R"({"sample_id": "a", "image": "a.png", "question": "q", "answer": "A"})";
  EXPECT_NO_THROW(load_task(write(a + "\n")));
  EXPECT_THROW(load_task(write(a + "\n" + a + "\n")), DatasetError);
  EXPECT_THROW(load_task(write(R"({"sample_id": "b", "image": "gone.png", "question": "q", "answer": "A"})")),
               DatasetError);
  EXPECT_THROW(load_task(write("{not json\n")), DatasetError);
  EXPECT_THROW(load_task(write(R"({"sample_id": "a", "image": "a.png", "question": "q", "answer": "A", )"
                               R"("answer_mode": "fuzzy"})")),
               DatasetError);
  EXPECT_THROW(load_task(write(R"({"task": {"dev": ["a"], "test": ["a"]}})" "\n" + a)), DatasetError);
  EXPECT_THROW(load_task(write(R"({"task": {"dev": ["zz"]}})" "\n" + a)), DatasetError);
  EXPECT_THROW(load_task(write("")), DatasetError);
  EXPECT_THROW(load_task(d / "missing.jsonl"), DatasetError);
}

// ---- executor ----

namespace {

/// Scripted target model: replies per sample id.
json target_script(const std::map<std::string, std::string>& replies) {
  json rules = json::array();
  for (const auto& [id, r] : replies) {
    rules.push_back({{"sample", id}, {"reply", r}, {"usage", {{"input_tokens", 100}, {"output_tokens", 3}}}});
  }
  return json{{"id", "exec-test"}, {"roles", {{"target_model", {{"rules", rules}, {"fallback", "(Z)"}}}}}};
}

std::vector<Sample> synthetic_samples(int n) {
  std::vector<Sample> out;
  std::mt19937_64 g(42);
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.id = "s" + std::to_string(100 + i);
    s.question = "Q" + std::to_string(i) + "?";
    s.answer = "(A)";
    s.image_bytes = std::make_shared<std::string>(encode_png(random_image(g, 8, 6)));
    out.push_back(std::move(s));
  }
  return out;
}

/// Records every request the target model sees.
class RecordingBackend : public Backend {
 public:
  ChatReply send(const ChatRequest& r) override {
    std::lock_guard lock(mu);
    requests.push_back(r);
    return {"(A)", {10, 1, 0}, false};
  }
  std::string id() const override { return "recording"; }
  std::mutex mu;
  std::vector<ChatRequest> requests;
};

class EmptyDetections : public ToolClient {
 public:
  Value call(const std::string&, const Image&, const json&) override { return Detections{}; }
  std::string fingerprint() const override { return "empty"; }
  json health() override { return {{"mode", "stub"}}; }
};

}  // namespace

TEST(Executor, TwentySevenOfThirtyIsPointNine) {
  auto samples = synthetic_samples(30);
  std::map<std::string, std::string> replies;
  for (size_t i = 0; i < samples.size(); ++i) replies[samples[i].id] = i % 10 == 3 ? "(B)" : "(A)";
  Gateway gw(std::make_shared<ScriptedBackend>(target_script(replies)));
  OfflineToolClient tools;
  Executor ex(gw, tools, ToolCatalog::standard());
  ExperimentRecord r = ex.evaluate_on_devset(node_id(4), VisualPromptProgram::identity(), samples);
  EXPECT_EQ(r.correct_count(), 27u);
  EXPECT_EQ(r.reward, 27.0 / 30.0);
  EXPECT_EQ(text::fixed(r.reward, 6), "0.900000");
  EXPECT_EQ(r.representative_success, samples[0].id);
  EXPECT_EQ(r.representative_failure, samples[3].id);
  EXPECT_EQ(r.node_id, node_id(4));
  EXPECT_FALSE(r.degraded);
  // Ledger total for the span equals the record total.
  EXPECT_EQ(r.tokens_total, gw.ledger_total());
  EXPECT_EQ(r.tokens_total.input_tokens, 3000u);
}

TEST(Executor, ZeroCorrect) {
  auto samples = synthetic_samples(30);
  Gateway gw(std::make_shared<ScriptedBackend>(target_script({})));
  OfflineToolClient tools;
  Executor ex(gw, tools, ToolCatalog::standard());
  ExperimentRecord r = ex.evaluate_on_devset(node_id(1), VisualPromptProgram::identity(), samples);
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_FALSE(r.representative_success);
  EXPECT_EQ(r.representative_failure, samples[0].id);
  EXPECT_THROW(ex.evaluate_on_devset(node_id(1), VisualPromptProgram::identity(), {}), DatasetError);
}

TEST(Executor, IdentitySendsTheOriginalImageAndQuestion) {
  auto samples = synthetic_samples(5);
  auto backend = std::make_shared<RecordingBackend>();
  Gateway gw(backend);
  OfflineToolClient tools;
  Executor ex(gw, tools, ToolCatalog::standard(), {1, {}});
  ExperimentRecord r = ex.evaluate_on_devset(node_id(0), VisualPromptProgram::identity(), samples);
  EXPECT_EQ(r.reward, 1.0);
  ASSERT_EQ(backend->requests.size(), 5u);
  for (size_t i = 0; i < samples.size(); ++i) {
    const ChatRequest& q = backend->requests[i];
    EXPECT_EQ(q.role, Role::target_model);
    EXPECT_EQ(q.text(), samples[i].question);
    ASSERT_EQ(q.image_count(), 1u);
    EXPECT_EQ(decode_png(q.parts[0].data).pixels, decode_png(*samples[i].image_bytes).pixels);
    EXPECT_FALSE(q.decoding.reasoning);
  }
}

TEST(Executor, FixtureIdentityMatchesDesignedBaseline) {
  Task t = load_task(fixture_dir() / "manifest.jsonl");
  Gateway gw(std::make_shared<ScriptedBackend>(load_json_file_for_test(fixture_dir() / "script.json")));
  OfflineToolClient tools;
  Executor ex(gw, tools, ToolCatalog::standard());
  ExperimentRecord r = ex.evaluate_on_devset(node_id(0), VisualPromptProgram::identity(), t.dev());
  EXPECT_EQ(r.correct_count(), 27u);
  EXPECT_EQ(text::fixed(r.reward, 6), "0.900000");
  ExperimentRecord test = ex.evaluate_on_devset(node_id(0), VisualPromptProgram::identity(), t.test());
  EXPECT_EQ(test.correct_count(), 7u);
}

TEST(Executor, CacheServesIdenticalTriples) {
  auto samples = synthetic_samples(12);
  std::map<std::string, std::string> replies;
  for (size_t i = 0; i < samples.size(); ++i) replies[samples[i].id] = i % 3 ? "(A)" : "(C)";
  Gateway gw(std::make_shared<ScriptedBackend>(target_script(replies)));
  OfflineToolClient tools;
  Executor ex(gw, tools, ToolCatalog::standard());
  const auto first = ex.evaluate_on_devset(node_id(1), VisualPromptProgram::identity(), samples);
  const size_t calls = gw.ledger_size();
  const auto second = ex.evaluate_on_devset(node_id(2), VisualPromptProgram::identity(), samples);
  EXPECT_EQ(gw.ledger_size(), calls);
  EXPECT_EQ(ex.cache_hits(), 12u);
  EXPECT_EQ(second.reward, first.reward);
  EXPECT_EQ(second.tokens_total, TokenUsage{});
  for (const auto& s : second.sample_results) EXPECT_TRUE(s.cached);

  VisualPromptProgram other = VisualPromptProgram::identity();
  other.answer_prompt_template = "Look closely. {question}";
  ex.evaluate_on_devset(node_id(3), other, samples);
  EXPECT_EQ(gw.ledger_size(), calls + 12);
}

TEST(Executor, RewardIndependentOfOrderAndWidth) {
  auto samples = synthetic_samples(20);
  std::map<std::string, std::string> replies;
  for (size_t i = 0; i < samples.size(); ++i) replies[samples[i].id] = i % 4 ? "(A)" : "(B)";
  VisualPromptProgram p;
  p.steps = {{"convert_image_grayscale", json::object(), {"input_image"}, "g"},
             {"draw_box", {{"box", {1, 1, 5, 4}}}, {"g"}, "boxed"}};
  p.final_image_refs = {"boxed"};

  auto run = [&](std::vector<Sample> s, int width) {
    Gateway gw(std::make_shared<ScriptedBackend>(target_script(replies)));
    OfflineToolClient tools;
    Executor ex(gw, tools, ToolCatalog::standard(), {width, {}});
    return std::pair{ex.evaluate_on_devset(node_id(1), p, s), gw.ledger()};
  };
  auto [a, la] = run(samples, 1);
  auto [b, lb] = run(samples, 4);
  EXPECT_EQ(a, b);
  EXPECT_EQ(la, lb);
  std::reverse(samples.begin(), samples.end());
  EXPECT_EQ(run(samples, 3).first.reward, a.reward);
}

TEST(Executor, EmptyDetectionFailsTheSampleNamingTheStep) {
  auto samples = synthetic_samples(3);
  Gateway gw(std::make_shared<RecordingBackend>());
  EmptyDetections tools;
  Executor ex(gw, tools, ToolCatalog::standard());
  VisualPromptProgram p;
  p.steps = {{"detect_objects", {{"query", "circle"}}, {"input_image"}, "dets"},
             {"crop", {{"index", 0}}, {"input_image", "dets"}, "zoom"}};
  p.final_image_refs = {"zoom"};
  ASSERT_TRUE(validate_program(p, ToolCatalog::standard()).empty());
  ExperimentRecord r = ex.evaluate_on_devset(node_id(1), p, samples);
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_TRUE(r.degraded);
  for (const auto& s : r.sample_results) {
    EXPECT_FALSE(s.correct);
    ASSERT_TRUE(s.error);
    EXPECT_NE(s.error->find("step 1 (crop -> zoom)"), std::string::npos) << *s.error;
    EXPECT_NE(s.error->find("empty"), std::string::npos);
  }
}

TEST(Executor, UnreachableToolServerIsASampleError) {
  auto samples = synthetic_samples(4);
  Gateway gw(std::make_shared<RecordingBackend>());
  HttpToolClient tools("http://127.0.0.1:1", 1);
  Executor ex(gw, tools, ToolCatalog::standard());
  VisualPromptProgram p;
  p.steps = {{"estimate_depth", json::object(), {"input_image"}, "depth"}};
  p.final_image_refs = {"depth"};
  ExperimentRecord r = ex.evaluate_on_devset(node_id(1), p, samples);
  ASSERT_EQ(r.sample_results.size(), 4u);
  for (const auto& s : r.sample_results) {
    ASSERT_TRUE(s.error);
    EXPECT_NE(s.error->find("unreachable"), std::string::npos);
  }
}

TEST(Executor, ToolValuesAndTemplates) {
  Gateway gw(std::make_shared<RecordingBackend>());
  OfflineToolClient tools;
  Executor ex(gw, tools, ToolCatalog::standard());
  std::map<std::string, Value> store{{"input_image", Image(640, 480)}};
  Value v = ex.apply_tool({"get_image_size", json::object(), {"input_image"}, "size"}, store, {});
  EXPECT_EQ(std::get<ImageSize>(v), (ImageSize{640, 480}));
  EXPECT_EQ(value_text(v), "640x480");
  EXPECT_EQ(fill_answer_template("{question} size={size} {other}", {{"question", "Q"}, {"size", "2x2"}}),
            "Q size=2x2 {other}");
}

TEST(Executor, PerSampleTokensSumAllCalls) {
  auto samples = synthetic_samples(3);
  auto backend = std::make_shared<RecordingBackend>();
  Gateway gw(backend);
  OfflineToolClient tools;
  Executor ex(gw, tools, ToolCatalog::standard());
  VisualPromptProgram p;
  p.steps = {{"ask_to_LVLM", {{"prompt", "describe"}}, {"input_image"}, "desc"}};
  p.answer_prompt_template = "Hint: {desc}. {question}";
  ExperimentRecord r = ex.evaluate_on_devset(node_id(1), p, samples);
  for (const auto& s : r.sample_results) EXPECT_EQ(s.tokens, (TokenUsage{20, 2, 0}));
  EXPECT_EQ(r.tokens_total, gw.ledger_total());
  EXPECT_EQ(backend->requests.size(), 6u);
}

TEST(Executor, ArtifactsWritten) {
  const fs::path root = scratch("artifacts");
  auto samples = synthetic_samples(2);
  Gateway gw(std::make_shared<RecordingBackend>());
  OfflineToolClient tools;
  Executor ex(gw, tools, ToolCatalog::standard(), {2, root});
  VisualPromptProgram p;
  p.steps = {{"convert_image_grayscale", json::object(), {"input_image"}, "g"}};
  p.final_image_refs = {"input_image", "g"};
  ExperimentRecord r = ex.evaluate_on_devset(node_id(7), p, samples);
  for (const auto& s : r.sample_results) {
    ASSERT_EQ(s.final_images.size(), 2u);
    for (const auto& f : s.final_images) EXPECT_TRUE(fs::exists(root / f)) << f;
    EXPECT_TRUE(fs::exists(root / "nodes" / "7" / "samples" / s.sample_id / "transcript.txt"));
  }
}

// ---- tool wire format ----

TEST(Wire, RequestValidation) {
  const auto& cat = ToolCatalog::standard();
  const Image img(16, 12);
  EXPECT_NO_THROW(validate_tool_request("detect_objects", make_tool_request(img, {{"query", "dog"}}), cat));
  EXPECT_NO_THROW(validate_tool_request("sliding_window_detection", make_tool_request(img, {{"query", "x"}}), cat));
  EXPECT_NO_THROW(validate_tool_request("segment_and_mark", make_tool_request(img, {{"granularity", 3}}), cat));
  EXPECT_NO_THROW(validate_tool_request("estimate_depth", make_tool_request(img, json::object()), cat));
  EXPECT_THROW(validate_tool_request("detect_objects", make_tool_request(img, json::object()), cat), ToolError);
  EXPECT_THROW(validate_tool_request("segment_and_mark", make_tool_request(img, {{"granularity", 9}}), cat),
               ToolError);
  EXPECT_THROW(validate_tool_request("estimate_depth", make_tool_request(img, {{"bogus", 1}}), cat), ToolError);
  EXPECT_THROW(validate_tool_request("rotate", make_tool_request(img, json::object()), cat), ToolError);
  EXPECT_THROW(validate_tool_request("estimate_depth", json{{"image", "@@@"}}, cat), ToolError);
}

TEST(Wire, ResponseValidation) {
  const Image img(16, 12);
  json ok{{"server_mode", "stub"}, {"model_version", "1"},
          {"detections", {{{"box", {1, 1, 4, 4}}, {"label", "dog"}, {"score", 0.9}}}}};
  EXPECT_EQ(std::get<Detections>(parse_tool_response("detect_objects", ok, img)).size(), 1u);
  json bad = ok;
  bad["server_mode"] = "fake";
  EXPECT_THROW(parse_tool_response("detect_objects", bad, img), ToolError);
  bad = ok;
  bad["detections"][0]["score"] = 1.5;
  EXPECT_THROW(parse_tool_response("detect_objects", bad, img), ToolError);
  bad = ok;
  bad["detections"][0]["box"] = {0, 0, 40, 4};
  EXPECT_THROW(parse_tool_response("detect_objects", bad, img), ToolError);
  bad = ok;
  bad.erase("model_version");
  EXPECT_THROW(parse_tool_response("detect_objects", bad, img), ToolError);
  json depth{{"server_mode", "stub"}, {"model_version", "1"}, {"image", base64_encode(encode_png(Image(3, 3)))}};
  EXPECT_THROW(parse_tool_response("estimate_depth", depth, img), ToolError);
}

TEST(Wire, OfflineStubIsDeterministicPerImage) {
  Task t = load_task(fixture_dir() / "manifest.jsonl");
  ASSERT_GE(t.samples.size(), 40u);
  // 40 fixture images plus 10 generated ones.
  std::vector<Image> images;
  for (const auto& s : t.samples) images.push_back(decode_image(*s.image_bytes));
  std::mt19937_64 g(50);
  while (images.size() < 50) images.push_back(random_image(g, 20 + static_cast<int>(g() % 30), 20));
  OfflineToolClient a, b;
  const json params[] = {{{"query", "circle"}}, {{"query", "circle"}}, {{"granularity", 2}}, json::object()};
  for (const auto& img : images) {
    for (size_t i = 0; i < remote_image_tools().size(); ++i) {
      const std::string& tool = remote_image_tools()[i];
      const json r1 = a.respond(tool, img, params[i]);
      EXPECT_EQ(r1, b.respond(tool, decode_png(encode_png(img)), params[i]));
      EXPECT_NO_THROW(parse_tool_response(tool, r1, img));
    }
  }
  EXPECT_EQ(a.health()["mode"], "stub");
}

TEST(Wire, HttpClientAgainstFakeServer) {
  // A minimal in-process server speaking the wire protocol, backed by the
  // offline stub.
  httplib::Server srv;
  OfflineToolClient stub;
  std::string last_image_hash;
  srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"status", "ok"}, {"mode", "stub"}, {"model_versions", json::object()}}.dump(),
                    "application/json");
  });
  srv.Post(R"(/v1/tools/([A-Za-z_]+))", [&](const httplib::Request& req, httplib::Response& res) {
    const std::string tool = req.matches[1];
    json body = json::parse(req.body, nullptr, false);
    try {
      validate_tool_request(tool, body, ToolCatalog::standard());
    } catch (const ToolError& e) {
      res.status = 400;
      res.set_content(json{{"error", {{"code", "bad_request"}, {"message", e.what()}}}}.dump(), "application/json");
      return;
    }
    const Image img = decode_png(base64_decode(body["image"].get<std::string>()));
    last_image_hash = sha256_hex(std::string(img.pixels.begin(), img.pixels.end()));
    res.set_content(stub.respond(tool, img, body.value("params", json::object())).dump(), "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  HttpToolClient client("http://127.0.0.1:" + std::to_string(port));
  EXPECT_EQ(client.health()["mode"], "stub");
  std::mt19937_64 g(3);
  const Image img = random_image(g, 24, 18);
  const Value det = client.call("detect_objects", img, {{"query", "circle"}});
  EXPECT_EQ(det, stub.call("detect_objects", img, {{"query", "circle"}}));
  EXPECT_EQ(last_image_hash, sha256_hex(std::string(img.pixels.begin(), img.pixels.end())));
  const Value depth = client.call("estimate_depth", img, json::object());
  EXPECT_EQ(std::get<Image>(depth).pixels, std::get<Image>(stub.call("estimate_depth", img, {})).pixels);
  try {
    client.call("segment_and_mark", img, {{"granularity", 42}});
    ADD_FAILURE() << "expected a ToolError";
  } catch (const ToolError& e) {
    EXPECT_NE(std::string(e.what()).find("HTTP 400 bad_request"), std::string::npos) << e.what();
  }
  srv.stop();
  th.join();
}
