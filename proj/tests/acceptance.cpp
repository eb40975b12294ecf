// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any
// fails.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "adfit/pipeline.hpp"
#include "adfit/synthetic.hpp"
#include "support/fixtures.hpp"

using namespace adfit;
using namespace adfit::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void run(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << (o.detail.empty() ? "" : "  (" + o.detail + ")") << std::endl;
}

Candidate candidate_of(const DraftDescription& d, const std::string& text) {
  for (const auto& c : generate_candidates(d, droppable_units(d, {})))
    if (c.text == text) return c;
  throw Error("validation", "no candidate '" + text + "' of '" + d.id + "'");
}

Outcome dp_optimality() {
  const auto t0 = Clock::now();
  int mismatches = 0, compared = 0, infeasible = 0;
  std::string first;
  std::mt19937_64 rng(20240501);
  const RenderMode modes[] = {RenderMode::kInline, RenderMode::kExtended, RenderMode::kExtendedInline};
  for (int i = 0; i < 200; ++i) {
    auto inst = random_instance(rng, modes[i % 3]);
    std::optional<Cost> dp, bf;
    try {
      dp = optimize(inst.project, inst.gaps, inst.table, inst.config).total_cost;
    } catch (const Error& e) {
      if (e.code() != "infeasible") throw;
    }
    try {
      bf = brute_force_optimize(inst.project, inst.gaps, inst.table, inst.config).total_cost;
    } catch (const Error& e) {
      if (e.code() != "infeasible") throw;
    }
    if (!dp && !bf) {
      ++infeasible;
      continue;
    }
    ++compared;
    if (dp != bf) {
      ++mismatches;
      if (first.empty()) first = "instance " + std::to_string(i);
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream s;
  s << compared << " compared, " << infeasible << " jointly infeasible, " << mismatches << " mismatches, " << secs
    << " s" << (first.empty() ? "" : ", first at " + first);
  return {mismatches == 0 && secs < 60.0, s.str()};
}

Outcome constants() {
  std::ostringstream s;
  bool ok = true;
  // Every candidate is longer than the only gap: the description is skipped.
  {
    const std::vector<GapSegment> gaps{gap(10, 12)};
    Project p = project_with_gaps(30, gaps);
    p.descriptions = {plain_description("d", 10.0)};
    CandidateTable t{{synthetic_candidate("d", 2.5, 5.0), synthetic_candidate("d", 3.0, 1.0, true)}};
    const auto plan = optimize(p, gaps, t, OptimizerConfig{});
    ok &= plan.skipped.size() == 1 && plan.total_cost == Cost::from_double(10000.0);
    s << "skip " << plan.total();
  }
  // Ends 0.2 s before speech.
  {
    const std::vector<GapSegment> gaps{gap(10, 20)};
    Project p = project_with_gaps(60, gaps);
    p.descriptions = {plain_description("d", 12.0)};
    const OptimizerConfig cfg;
    PlacedDescription pd;
    pd.description_id = "d";
    pd.start = from_seconds(16.8);
    pd.duration = from_seconds(3.0);
    const auto near = placement_penalty(pd, nullptr, {&p, &gaps, &cfg});
    pd.start = from_seconds(12.0);
    const auto clear = placement_penalty(pd, nullptr, {&p, &gaps, &cfg});
    ok &= near == Cost::from_double(10.0) && clear == Cost{};
    s << ", near " << near.value();
  }
  // weighted = 1 coh + 500 info + 10 edit on scored candidates.
  {
    Project p;
    p.descriptions = fixture_corpus();
    const auto res = Resources::load();
    const ProjectScorer scorer(p, res, {});
    const OptimizerConfig cfg;
    std::vector<Candidate> pool;
    for (const auto& d : p.descriptions)
      for (const auto& c : scorer.candidates(d, cfg.candidate_cap).candidates) pool.push_back(c);
    std::mt19937_64 rng(5);
    int bad = 0;
    for (int i = 0; i < 100; ++i) {
      const auto& c = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
      const auto k = scorer.cost(c, cfg);
      const double want = 1.0 * k.coherence + 500.0 * k.informativeness + 10.0 * k.edit;
      if (std::abs(k.weighted_total - want) > 1e-9 * std::max(1.0, want)) ++bad;
    }
    ok &= bad == 0 && cfg.w_coh == 1.0 && cfg.w_info == 500.0 && cfg.w_edit == 10.0;
    s << ", identity broken on " << bad << "/100 (pool " << pool.size() << ")";
  }
  return {ok, s.str()};
}

Outcome edit_oracle() {
  const auto bench = bench_description();
  const double a = edit_cost(candidate_of(bench, "A bench with birds"));
  const double b = edit_cost(candidate_of(bench, "A long bench"));
  return {a == 4.0 && b == 21.0, "A bench with birds = " + std::to_string(a) + ", A long bench = " + std::to_string(b)};
}

Outcome candidate_oracle() {
  Project p;
  p.descriptions = fixture_corpus();
  p.transcript = words_at("a man walks past shops . the shops are closed . shops and cafes line the street", 0, 0.4);
  const auto glossary = Glossary::load(default_data_path("film_glossary.txt"));
  const auto stop = load_word_set(default_data_path("stopwords.txt"));
  const NgramCounter ngrams(p);
  int checked = 0, differ = 0;
  std::string which;
  for (const auto& d : p.descriptions) {
    if (d.words.size() > 12) continue;
    const auto prot = collect_protected_phrases(d, ngrams, glossary, stop);
    std::set<std::string> got;
    for (const auto& c : generate_candidates(d, droppable_units(d, prot))) got.insert(c.text);
    ++checked;
    if (got != oracle_texts(d, prot)) {
      ++differ;
      which += " " + d.id;
    }
  }
  return {differ == 0 && checked > 0, std::to_string(checked) + " descriptions, " + std::to_string(differ) + " differ" + which};
}

Outcome fig6_ordering() {
  Project p;
  p.descriptions = fixture_corpus();
  const auto lm = train_project_model(p, default_data_path("general_corpus.txt"));
  const auto& beach = *p.find_description("beach");
  const double bad = coherence_cost(candidate_of(beach, "People walking with an sky ."), lm);
  const double good = coherence_cost(candidate_of(beach, "People walking along a beach ."), lm);
  std::ostringstream s;
  s << "\"with an sky\" " << bad << " vs \"along a beach\" " << good;
  return {bad > good, s.str()};
}

// Speech in source time: everything the labels mark as speech.
std::vector<std::pair<std::int64_t, std::int64_t>> speech_frames(const Project& p, int rate) {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (const auto& l : p.labels)
    if (l.label == AudioLabel::kSpeech)
      out.emplace_back(static_cast<std::int64_t>(frame_of(l.start, rate)), static_cast<std::int64_t>(frame_of(l.end, rate)));
  return out;
}

// Narration overlapping another narration or audible source speech, found
// from the rendered manifest alone.
int manifest_overlaps(const RenderManifest& m, const Project& p) {
  int bad = 0;
  auto n = m.narrations;
  std::sort(n.begin(), n.end(), [](const auto& a, const auto& b) { return a.out_start < b.out_start; });
  for (std::size_t k = 1; k < n.size(); ++k)
    if (n[k - 1].out_start + n[k - 1].frames > n[k].out_start) ++bad;
  const auto speech = speech_frames(p, m.sample_rate);
  for (const auto& nd : n) {
    const std::int64_t a = nd.out_start, b = nd.out_start + nd.frames;
    for (const auto& d : m.bed) {
      if (d.kind != BedDecision::Kind::kCopy) continue;
      const std::int64_t lo = std::max(a, d.out_start), hi = std::min(b, d.out_end);
      if (lo >= hi) continue;
      const std::int64_t s0 = d.src_start + (lo - d.out_start), s1 = d.src_start + (hi - d.out_start);
      for (const auto& [x, y] : speech)
        if (std::max(s0, x) < std::min(s1, y)) ++bad;
    }
  }
  return bad;
}

Outcome no_overlap() {
  std::mt19937_64 rng(777);
  int violations = 0, plans = 0, placed = 0;
  std::map<std::string, AudioClip> none;
  for (int i = 0; i < 500; ++i) {
    auto base = random_instance(rng, RenderMode::kInline);
    use_prefix_candidates(base, rng);
    const auto src = source_for(base.project, 8000, static_cast<std::uint64_t>(i));
    for (auto mode : {RenderMode::kInline, RenderMode::kExtended, RenderMode::kExtendedInline}) {
      auto inst = base;
      inst.config.mode = mode;
      CompositionPlan plan;
      try {
        plan = optimize(inst.project, inst.gaps, inst.table, inst.config);
      } catch (const Error& e) {
        if (e.code() != "infeasible") throw;
        continue;
      }
      ++plans;
      placed += static_cast<int>(plan.placed.size());
      violations += static_cast<int>(check_plan(plan, inst.project, inst.gaps, inst.config.time_grid).size());
      const auto r = render(inst.project, plan, inst.gaps, src, default_narration(none, 8000, 1), 3);
      violations += manifest_overlaps(r.manifest, inst.project);
    }
  }
  return {violations == 0 && plans > 1000,
          std::to_string(plans) + " plans, " + std::to_string(placed) + " placements, " + std::to_string(violations) +
              " violations"};
}

Outcome duration_conservation() {
  std::mt19937_64 rng(4242);
  const int rate = 16000;
  int bad = 0, rendered = 0, extended_gaps = 0;
  std::map<std::string, AudioClip> none;
  for (int i = 0; i < 300; ++i) {
    const RenderMode mode = static_cast<RenderMode>(i % 3);
    auto inst = random_instance(rng, mode);
    // Longer drafts, so that gaps often need extending.
    for (auto& d : inst.project.descriptions) {
      auto longer = plain_description(d.id, to_seconds(d.anchor_time), std::uniform_int_distribution<std::size_t>(4, 16)(rng));
      longer.lock_time = d.lock_time;
      longer.lock_presence = d.lock_presence;
      d = longer;
    }
    use_prefix_candidates(inst, rng);
    CompositionPlan plan;
    try {
      plan = optimize(inst.project, inst.gaps, inst.table, inst.config);
    } catch (const Error&) {
      continue;
    }
    const auto src = source_for(inst.project, rate, static_cast<std::uint64_t>(i));
    const auto r = render(inst.project, plan, inst.gaps, src, default_narration(none, rate, 1), 11);
    const auto n = static_cast<std::int64_t>(src.frames());
    const auto out = static_cast<std::int64_t>(r.audio.frames());
    std::int64_t narr = 0, ext = 0;
    for (const auto& nd : r.manifest.narrations) narr += nd.frames;
    for (const auto& p : plan.placed) ext += static_cast<std::int64_t>(frame_of(p.extension, rate));
    switch (mode) {
      case RenderMode::kInline: bad += out != n; break;
      case RenderMode::kExtended: bad += std::abs(out - (n + narr)) > 1; break;
      case RenderMode::kExtendedInline: bad += std::abs(out - (n + ext)) > 1; break;
    }
    // Per gap: total extension at most its own length (2x cap).
    std::map<Millis, Millis> per_gap;
    for (const auto& p : plan.placed)
      if (p.extension > Millis{0})
        for (const auto& g : inst.gaps)
          if (g.start <= p.start && p.start < g.end) per_gap[g.start] += p.extension;
    for (const auto& [start, e] : per_gap) {
      ++extended_gaps;
      for (const auto& g : inst.gaps)
        if (g.start == start && e > g.length()) ++bad;
    }
    ++rendered;
  }
  return {bad == 0 && rendered > 50,
          std::to_string(rendered) + " renders, " + std::to_string(extended_gaps) + " extended gaps, " +
              std::to_string(bad) + " off"};
}

Outcome extendability_gate() {
  const OptimizerConfig cfg;
  auto music = [&](double seconds, double bpm) {
    const auto clip = synthetic_music(seconds, bpm);
    GapSegment g{Millis{0}, from_seconds(seconds), AudioLabel::kMusic, false, Millis{0}};
    return classify_extendable(g, estimate_tempo(clip), cfg).extendable;
  };
  const bool a = music(35, 72), b = music(25, 72), c = music(35, 50);
  bool silence = true;
  for (double len : {0.2, 3.0, 45.0}) {
    GapSegment g{Millis{0}, from_seconds(len), AudioLabel::kSilence, false, Millis{0}};
    silence &= classify_extendable(g, std::nullopt, cfg).extendable;
  }
  std::ostringstream s;
  s << std::boolalpha << "35s@72 " << a << ", 25s@72 " << b << ", 35s@50 " << c << ", silence " << silence;
  return {a && !b && !c && silence, s.str()};
}

Outcome tempo() {
  bool ok = true;
  std::ostringstream s;
  for (double bpm : {60.0, 90.0, 120.0, 180.0}) {
    const auto t = estimate_tempo(click_track(bpm, 20.0));
    s << bpm << "->" << (t ? std::to_string(*t) : "none") << " ";
    ok &= t && std::abs(*t - bpm) <= 5.0;
  }
  return {ok, s.str()};
}

Outcome cli_determinism() {
  const auto dir = fs::temp_directory_path() / "adfit_acceptance_cli";
  fs::remove_all(dir);
  const auto project = write_demo_project((dir / "in").string());
  auto run_cli = [&](const std::string& out) {
    const std::string cmd = std::string("\"") + ADFIT_CLI + "\" render \"" + project +
                            "\" --mode extended-inline --seed 9 --out-dir \"" + (dir / out).string() + "\" > /dev/null";
    return std::system(cmd.c_str());
  };
  const int a = run_cli("a"), b = run_cli("b");
  if (a != 0 || b != 0) return {false, "cli exit " + std::to_string(a) + "/" + std::to_string(b)};
  int same = 0;
  for (const char* f : {"plan.json", "manifest.json", "output.wav", "report.txt"})
    same += read_file((dir / "a" / f).string()) == read_file((dir / "b" / f).string());
  return {same == 4, std::to_string(same) + "/4 artifacts byte-identical"};
}

Outcome performance() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<GapSegment> gaps;
  for (double t = 2.0; t < 590.0;) {
    const double len = 4.0 + unit(rng) * 20.0;
    const double r = unit(rng);
    const AudioLabel label = r < 0.5 ? AudioLabel::kMusic : (r < 0.8 ? AudioLabel::kSilence : AudioLabel::kAmbient);
    gaps.push_back(gap(t, std::min(600.0, t + len), label));
    t += len + 3.0 + unit(rng) * 10.0;
  }
  Project p = project_with_gaps(600.0, gaps);
  OptimizerConfig cfg;
  cfg.mode = RenderMode::kExtendedInline;
  std::vector<GapSegment> classified;
  for (const auto& g : gaps) classified.push_back(classify_extendable(g, 100.0, cfg));
  CandidateTable table;
  for (int i = 0; i < 20; ++i) {
    auto d = plain_description("d" + std::to_string(i), 5.0 + i * 29.0, 12);
    p.descriptions.push_back(d);
    std::vector<ScoredCandidate> row;
    for (int j = 0; j < 50; ++j)
      row.push_back(synthetic_candidate(d.id, 0.5 + unit(rng) * 8.0, unit(rng) * 400.0, j == 49, 12));
    table.push_back(row);
  }
  const auto t0 = Clock::now();
  const auto plan = optimize(p, classified, table, cfg);
  const double secs = seconds_since(t0);
  std::ostringstream s;
  s << "6000 slots, 20 x 50 candidates, extended-inline: " << secs << " s, " << plan.placed.size() << " placed";
  return {secs < 10.0, s.str()};
}

}  // namespace

int main() {
  run("dp-optimality: DP equals brute force on 200 random instances in < 60 s", dp_optimality);
  run("constants: skip 10000, near-speech +10, weights (1, 500, 10)", constants);
  run("edit-oracle: bench 4 and 21", edit_oracle);
  run("candidate-oracle: generator equals subset enumeration", candidate_oracle);
  run("fig6-ordering: 'with an sky' less coherent than 'along a beach'", fig6_ordering);
  run("no-overlap: 500 projects x 3 modes", no_overlap);
  run("duration-conservation: inline exact, extended +narration, extended-inline +extensions, <= 2x", duration_conservation);
  run("extendability-gate: 35s@72 yes, 25s@72 no, 35s@50 no, silence yes", extendability_gate);
  run("tempo: within 5 bpm at 60, 90, 120, 180", tempo);
  run("determinism: CLI twice gives identical plan, manifest and WAV", cli_determinism);
  run("performance: 10-minute project optimizes in < 10 s", performance);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
