#include <gtest/gtest.h>

#include <random>

#include "adfit/timeline.hpp"
#include "support/fixtures.hpp"

namespace adfit {
namespace {

using testing::words_at;

AudioLabelSegment seg(double a, double b, AudioLabel l) { return {from_seconds(a), from_seconds(b), l}; }

TEST(ComputeGaps, SingleMusicRegionBetweenSpeech) {
  auto gaps = compute_gaps({seg(0, 5, AudioLabel::kSpeech), seg(5, 40, AudioLabel::kMusic),
                            seg(40, 60, AudioLabel::kSpeech)},
                           {});
  ASSERT_EQ(gaps.size(), 1u);
  EXPECT_EQ(gaps[0].start, Millis{5000});
  EXPECT_EQ(gaps[0].end, Millis{40000});
  EXPECT_EQ(gaps[0].label, AudioLabel::kMusic);
  EXPECT_FALSE(gaps[0].extendable);
}

TEST(ComputeGaps, TranscriptWordsCarveMislabeledMusic) {
  TimedWord w;
  w.text = "hello";
  w.start = Millis{2000};
  w.end = Millis{3000};
  auto gaps = compute_gaps({seg(0, 10, AudioLabel::kMusic)}, {w});
  ASSERT_EQ(gaps.size(), 2u);
  EXPECT_EQ(gaps[0].start, Millis{0});
  EXPECT_EQ(gaps[0].end, Millis{2000});
  EXPECT_EQ(gaps[1].start, Millis{3000});
  EXPECT_EQ(gaps[1].end, Millis{10000});
}

TEST(ComputeGaps, AllSpeechHasNoGaps) {
  EXPECT_TRUE(compute_gaps({seg(0, 30, AudioLabel::kSpeech)}, {}).empty());
}

TEST(ComputeGaps, TouchingNonSpeechMergesUnderDominantLabel) {
  auto gaps = compute_gaps({seg(0, 2, AudioLabel::kSilence), seg(2, 9, AudioLabel::kMusic),
                            seg(9, 10, AudioLabel::kSilence), seg(10, 12, AudioLabel::kSpeech)},
                           {});
  ASSERT_EQ(gaps.size(), 1u);
  EXPECT_EQ(gaps[0].label, AudioLabel::kMusic);
  EXPECT_EQ(gaps[0].end, Millis{10000});
}

TEST(ComputeGaps, OverlappingLabelsNameThePair) {
  try {
    compute_gaps({seg(0, 5, AudioLabel::kSpeech), seg(4, 8, AudioLabel::kMusic)}, {});
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "validation");
    EXPECT_NE(std::string(e.what()).find("labels[0]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("labels[1]"), std::string::npos);
  }
}

// Random tilings: gaps, speech labels and word spans cover the timeline
// exactly, gaps avoid speech and words, and recomputing from the gaps is a
// fixed point.
TEST(ComputeGaps, PropertyCoverageAndIdempotence) {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 300; ++iter) {
    std::uniform_int_distribution<int> len(1, 3000), kind(0, 3);
    std::vector<AudioLabelSegment> labels;
    Millis t{0};
    const Millis dur{60000};
    while (t < dur) {
      Millis e = std::min(dur, t + Millis{len(rng)});
      labels.push_back({t, e, static_cast<AudioLabel>(kind(rng))});
      t = e;
    }
    std::shuffle(labels.begin(), labels.end(), rng);
    std::vector<TimedWord> words;
    Millis w{0};
    while (true) {
      w += Millis{len(rng) * 3};
      Millis e = w + Millis{len(rng) / 4 + 1};
      if (e >= dur) break;
      TimedWord tw;
      tw.text = "x";
      tw.start = w;
      tw.end = e;
      words.push_back(tw);
      w = e;
    }
    auto gaps = compute_gaps(labels, words);

    std::vector<int> cover(dur.count(), 0);  // 1 ms resolution
    for (const auto& g : gaps)
      for (auto k = g.start.count(); k < g.end.count(); ++k) cover[k] |= 1;
    for (const auto& l : labels)
      if (l.label == AudioLabel::kSpeech)
        for (auto k = l.start.count(); k < l.end.count(); ++k) cover[k] |= 2;
    for (const auto& tw : words)
      for (auto k = tw.start.count(); k < tw.end.count(); ++k) cover[k] |= 4;
    for (std::int64_t k = 0; k < dur.count(); ++k) {
      ASSERT_NE(cover[k], 0) << "uncovered ms " << k;
      ASSERT_FALSE((cover[k] & 1) && (cover[k] & 6)) << "gap intersects speech at ms " << k;
    }
    for (std::size_t i = 1; i < gaps.size(); ++i) ASSERT_LT(gaps[i - 1].end, gaps[i].start);

    std::vector<AudioLabelSegment> back;
    Millis c{0};
    for (const auto& g : gaps) {
      if (g.start > c) back.push_back({c, g.start, AudioLabel::kSpeech});
      back.push_back({g.start, g.end, g.label});
      c = g.end;
    }
    if (c < dur) back.push_back({c, dur, AudioLabel::kSpeech});
    ASSERT_EQ(compute_gaps(back, {}), gaps);
  }
}

TEST(EstimateDuration, ZeroForEmptyText) { EXPECT_EQ(estimate_description_duration(""), Millis{0}); }

TEST(EstimateDuration, TenWordsIsThreeSeconds) {
  EXPECT_EQ(estimate_description_duration("one two three four five six seven eight nine ten"), Millis{3000});
}

TEST(EstimateDuration, SixWordBench) {
  EXPECT_EQ(estimate_description_duration("A long bench with blue birds"), Millis{1800});
}

TEST(EstimateDuration, LinearInWordCountAndIgnoresPunctuation) {
  std::string text;
  for (int n = 0; n < 40; ++n) {
    EXPECT_EQ(estimate_description_duration(text + " ."), Millis{300 * n});
    text += " word";
  }
}

Project well_formed() {
  Project p = testing::project_with_gaps(30.0, {testing::gap(5, 12), testing::gap(20, 26, AudioLabel::kSilence)});
  p.transcript = words_at("hello there everyone", 1.0, 1.0);
  p.shots = {Millis{8000}, Millis{21000}};
  p.descriptions = {testing::bench_description(6.0), testing::dog_description(21.0)};
  return p;
}

TEST(ValidateProject, WellFormedHasNoDiagnostics) {
  auto diags = validate_project(well_formed());
  for (const auto& d : diags) ADD_FAILURE() << to_string(d);
}

TEST(ValidateProject, AnchorPastEndIsOutOfRange) {
  Project p = well_formed();
  p.descriptions[1].anchor_time = p.source_duration + Millis{1000};
  auto diags = validate_project(p);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].code, "out_of_range");
  EXPECT_NE(diags[0].location.find("anchor_time"), std::string::npos);
}

TEST(ValidateProject, DuplicateIdsReportedOnce) {
  Project p = well_formed();
  p.descriptions[1].id = p.descriptions[0].id;
  auto diags = validate_project(p);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].code, "duplicate_id");
}

TEST(ValidateProject, LabelOverlapAndHoles) {
  Project p = well_formed();
  p.labels.push_back({Millis{1000}, Millis{2000}, AudioLabel::kMusic});
  auto diags = validate_project(p);
  EXPECT_TRUE(std::any_of(diags.begin(), diags.end(), [](auto& d) { return d.code == "label_overlap"; }));

  Project q = well_formed();
  q.labels.erase(q.labels.begin());
  auto holes = validate_project(q);
  EXPECT_TRUE(std::any_of(holes.begin(), holes.end(), [](auto& d) { return d.code == "label_hole"; }));
}

TEST(ValidateProject, MissingAnnotationAndBadAlignment) {
  Project p = well_formed();
  p.descriptions[0].words[1].pos.clear();
  Recording r;
  r.duration = Millis{2000};
  r.alignment = {{Millis{0}, Millis{100}}};
  p.descriptions[1].recording = r;
  auto diags = validate_project(p);
  EXPECT_TRUE(std::any_of(diags.begin(), diags.end(), [](auto& d) { return d.code == "missing_annotation"; }));
  EXPECT_TRUE(std::any_of(diags.begin(), diags.end(), [](auto& d) { return d.code == "bad_alignment"; }));
}

TEST(ValidateProject, ShotsMustIncrease) {
  Project p = well_formed();
  p.shots = {Millis{9000}, Millis{9000}};
  auto diags = validate_project(p);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].code, "unsorted");
}

TEST(ValidateProject, MislabeledWordIsOnlyAWarning) {
  Project p = well_formed();
  TimedWord w;
  w.text = "stray";
  w.start = Millis{6000};
  w.end = Millis{6500};
  p.transcript.push_back(w);
  auto diags = validate_project(p);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_FALSE(diags[0].is_error());
  EXPECT_FALSE(has_errors(diags));
}

}  // namespace
}  // namespace adfit
