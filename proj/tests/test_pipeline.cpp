#include <gtest/gtest.h>

#include <filesystem>

#include "adfit/pipeline.hpp"
#include "adfit/synthetic.hpp"

using namespace adfit;
namespace fs = std::filesystem;

namespace {

const Resources& resources() {
  static const Resources r = Resources::load();
  return r;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("adfit_test_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(ProjectIo, RoundTrip) {
  auto demo = make_demo_project();
  demo.doc.coherence_overrides[{"bench", "A long bench"}] = 2.5;
  demo.doc.optimizer = {{"skip_cost", 5000.0}};
  demo.doc.project.descriptions[3].lock_time = true;
  Recording r;
  r.path = "bench.wav";
  r.duration = Millis{1900};
  for (int i = 0; i < 6; ++i) r.alignment.push_back({Millis{300 * i}, Millis{300 * i + 250}});
  demo.doc.project.descriptions[3].recording = r;
  const auto text = document_to_json(demo.doc).dump();
  const auto back = parse_document(text);
  EXPECT_TRUE(same_document(back, demo.doc));
  EXPECT_EQ(document_to_json(back).dump(), text);
  const auto& d = back.project.descriptions[3];
  EXPECT_TRUE(d.lock_time);
  ASSERT_TRUE(d.recording);
  EXPECT_EQ(d.recording->alignment[5].end, Millis{1750});
  EXPECT_EQ(back.project.transcript.size(), demo.doc.project.transcript.size());
  EXPECT_EQ(back.project.transcript[3].start, demo.doc.project.transcript[3].start);
  EXPECT_EQ(back.project.descriptions[0].words[8].dep_head, 1);
  EXPECT_EQ(back.coherence_overrides.at({"bench", "A long bench"}), 2.5);
}

TEST(ProjectIo, ReportsWhereTheFileIsWrong) {
  try {
    parse_document(R"({"source_duration": 10, "descriptions": [{"id": "a", "words": []}]})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "validation");
    EXPECT_NE(std::string(e.what()).find("descriptions[0]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("anchor_time"), std::string::npos);
  }
  EXPECT_THROW(parse_document("{not json"), Error);
  EXPECT_THROW(parse_document(R"({"source_duration": 10, "labels": [{"start": 0, "end": 1, "label": "noise"}]})"),
               Error);
}

TEST(ProjectIo, OptimizerOverrides) {
  auto cfg = apply_config(OptimizerConfig{}, {{"time_grid", 0.05}, {"skip_cost", 123.0}, {"mode", "extended"}});
  EXPECT_EQ(cfg.time_grid, Millis{50});
  EXPECT_EQ(cfg.skip_cost, 123.0);
  EXPECT_EQ(cfg.mode, RenderMode::kExtended);
  EXPECT_THROW(apply_config(OptimizerConfig{}, {{"skip", 1}}), Error);
  EXPECT_THROW(apply_config(OptimizerConfig{}, {{"time_grid", -1}}), Error);
  EXPECT_THROW(apply_config(OptimizerConfig{}, {{"w_coh", "high"}}), Error);
  // Defaults survive a round trip through JSON.
  const auto round = apply_config(OptimizerConfig{}, config_to_json(OptimizerConfig{}));
  EXPECT_EQ(config_to_json(round), config_to_json(OptimizerConfig{}));
}

TEST(ExtendabilityGate, SyntheticMusic) {
  const OptimizerConfig cfg;
  auto gate = [&](double seconds, double bpm) {
    const auto clip = synthetic_music(seconds, bpm);
    const auto tempo = estimate_tempo(clip);
    GapSegment g{Millis{0}, from_seconds(seconds), AudioLabel::kMusic, false, Millis{0}};
    return std::pair{tempo, classify_extendable(g, tempo, cfg).extendable};
  };
  auto [t72, long72] = gate(35, 72);
  ASSERT_TRUE(t72);
  EXPECT_NEAR(*t72, 72, 3);
  EXPECT_TRUE(long72);
  EXPECT_FALSE(gate(25, 72).second);
  auto [t50, long50] = gate(35, 50);
  ASSERT_TRUE(t50);
  EXPECT_NEAR(*t50, 50, 3);
  EXPECT_FALSE(long50);
  GapSegment s{Millis{0}, Millis{400}, AudioLabel::kSilence, false, Millis{0}};
  EXPECT_TRUE(classify_extendable(s, std::nullopt, cfg).extendable);
}

TEST(Pipeline, DemoProjectAllModes) {
  const auto dir = scratch("modes");
  const auto path = write_demo_project(dir.string());
  const auto doc = load_document(path);
  for (auto mode : {RenderMode::kInline, RenderMode::kExtended, RenderMode::kExtendedInline}) {
    PipelineOptions opt;
    opt.config = project_config(doc);
    opt.config.mode = mode;
    opt.seed = 5;
    const auto r = run_pipeline(doc, resources(), opt);
    EXPECT_TRUE(check_plan(r.plan, doc.project, r.analysis.gaps, opt.config.time_grid).empty()) << to_string(mode);
    // The music bed is long and at 96 bpm, so it can be extended.
    ASSERT_FALSE(r.analysis.gaps.empty());
    EXPECT_TRUE(r.analysis.gaps[0].extendable);
    EXPECT_EQ(r.plan.placed.size() + r.plan.skipped.size(), doc.project.descriptions.size());
    if (mode == RenderMode::kInline) EXPECT_EQ(r.rendered.audio.frames(), frames_of_seconds(60.0, 22050));
    if (mode == RenderMode::kExtended) EXPECT_EQ(r.plan.placed.size(), doc.project.descriptions.size());
    EXPECT_NE(r.report.find("total cost E"), std::string::npos);
  }
}

TEST(Pipeline, ArtifactsAreDeterministic) {
  const auto dir = scratch("determinism");
  const auto doc = load_document(write_demo_project((dir / "in").string()));
  PipelineOptions opt;
  opt.config = project_config(doc);
  opt.config.mode = RenderMode::kExtendedInline;
  opt.seed = 42;
  const auto a = write_artifacts((dir / "a").string(), run_pipeline(doc, resources(), opt));
  const auto b = write_artifacts((dir / "b").string(), run_pipeline(doc, resources(), opt));
  for (auto [x, y] : {std::pair{a.plan, b.plan}, {a.manifest, b.manifest}, {a.audio, b.audio}, {a.report, b.report}}) {
    ASSERT_TRUE(fs::exists(x));
    EXPECT_EQ(read_file(x), read_file(y)) << x;
  }
}

TEST(Pipeline, InvalidProjectCarriesDiagnostics) {
  auto demo = make_demo_project();
  demo.doc.project.source_audio.clear();
  demo.doc.project.labels[1].start = Millis{5000};  // overlaps the first speech label
  try {
    run_pipeline(demo.doc, resources(), PipelineOptions{});
    FAIL();
  } catch (const ValidationError& e) {
    bool found = false;
    for (const auto& d : e.diagnostics()) found |= d.code == "label_overlap";
    EXPECT_TRUE(found);
    EXPECT_NE(std::string(e.what()).find("labels[1]"), std::string::npos);
  }
}

TEST(Pipeline, NoSourceAudioRendersOverSilence) {
  auto demo = make_demo_project();
  demo.doc.project.source_audio.clear();
  const auto r = run_pipeline(demo.doc, resources(), PipelineOptions{});
  EXPECT_EQ(r.rendered.audio.sample_rate, 16000);
  EXPECT_EQ(r.rendered.audio.frames(), 16000u * 60);
  EXPECT_NE(r.report.find("no_source_audio"), std::string::npos);
}
