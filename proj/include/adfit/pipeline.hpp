#ifndef ADFIT_PIPELINE_HPP
#define ADFIT_PIPELINE_HPP

// Project file in, plan + manifest + audio out.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adfit/audio.hpp"
#include "adfit/candidates.hpp"
#include "adfit/dsp.hpp"
#include "adfit/language_model.hpp"
#include "adfit/optimizer.hpp"
#include "adfit/project_io.hpp"
#include "adfit/render.hpp"
#include "adfit/scorer.hpp"
#include "adfit/text.hpp"

namespace adfit {

/// Validation failure carrying every diagnostic found.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Diagnostic> diags, std::string code = "validation")
      : Error(std::move(code), summarize(diags)), diagnostics_(std::move(diags)) {}
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  static std::string summarize(const std::vector<Diagnostic>& diags) {
    std::string s = "project is invalid";
    for (const auto& d : diags)
      if (d.is_error()) s += "\n  " + to_string(d);
    return s;
  }
  std::vector<Diagnostic> diagnostics_;
};

/// Word lists and tables shared by every project.
struct Resources {
  Glossary glossary;
  WordSet stopwords;
  CorpusFrequencyTable freq;
  std::string general_corpus;  // path; empty skips it

  /// Empty paths fall back to the shipped data files.
  static Resources load(const std::string& glossary_path = "", const std::string& freq_path = "",
                        const std::string& stopwords_path = "", const std::string& corpus_path = "") {
    auto or_default = [](const std::string& p, const char* file) { return p.empty() ? default_data_path(file) : p; };
    Resources r;
    r.glossary = Glossary::load(or_default(glossary_path, "film_glossary.txt"));
    r.stopwords = load_word_set(or_default(stopwords_path, "stopwords.txt"));
    r.freq = CorpusFrequencyTable::load(or_default(freq_path, "corpus_freq.tsv"));
    r.general_corpus = or_default(corpus_path, "general_corpus.txt");
    return r;
  }
};

/// Language model and counts for one project revision.
class ProjectScorer {
 public:
  ProjectScorer(const Project& p, const Resources& r, CoherenceOverrides overrides)
      : project_(p),
        res_(r),
        overrides_(std::move(overrides)),
        lm_(train_project_model(project_, r.general_corpus)),
        occ_(project_),
        ngrams_(project_) {}

  const Project& project() const { return project_; }
  const NgramCounter& ngrams() const { return ngrams_; }

  CandidateSet candidates(const DraftDescription& d, std::size_t cap) const {
    return build_candidate_set(d, ngrams_, res_.glossary, res_.stopwords, cap);
  }
  ProtectedPhraseSet protected_phrases(const DraftDescription& d) const {
    return collect_protected_phrases(d, ngrams_, res_.glossary, res_.stopwords);
  }
  CostBreakdown cost(const Candidate& c, const OptimizerConfig& cfg) const {
    const ScoringContext ctx{&project_, &lm_, &res_.freq, &occ_, &res_.glossary, &overrides_};
    return candidate_cost(c, cfg, ctx);
  }

 private:
  Project project_;
  const Resources& res_;
  CoherenceOverrides overrides_;
  BigramLanguageModel lm_;
  OccurrenceTable occ_;
  NgramCounter ngrams_;
};

struct Analysis {
  OptimizerConfig config;
  std::vector<GapSegment> gaps;
  std::vector<CandidateSet> sets;  // draft order
  CandidateTable table;
  std::vector<Diagnostic> diagnostics;
};

/// Defaults, then the project's own optimizer section.
inline OptimizerConfig project_config(const ProjectDocument& doc) { return apply_config(OptimizerConfig{}, doc.optimizer); }

/// Gaps of a valid project, classified by tempo where audio is given.
inline std::vector<GapSegment> analyze_gaps(const Project& p, const OptimizerConfig& cfg, const AudioClip* source,
                                            std::vector<Diagnostic>& diags) {
  std::vector<GapSegment> out;
  for (const auto& g : compute_gaps(p.labels, p.transcript)) {
    std::optional<double> tempo;
    if (g.label == AudioLabel::kMusic && source) {
      std::vector<Diagnostic> td;
      const auto clip = source->slice(frame_of(g.start, source->sample_rate), frame_of(g.end, source->sample_rate));
      tempo = estimate_tempo(clip, &td);
      for (auto& d : td) {
        d.location = "gap " + detail::fmt_time(g.start) + "-" + detail::fmt_time(g.end);
        if (g.length() >= cfg.min_extendable_music) diags.push_back(d);
      }
    }
    std::vector<Diagnostic> cd;
    out.push_back(classify_extendable(g, tempo, cfg, source && g.length() >= cfg.min_extendable_music ? &cd : nullptr));
    diags.insert(diags.end(), cd.begin(), cd.end());
  }
  return out;
}

/// Validates, then derives gaps, candidates and their costs.
inline Analysis analyze(const ProjectDocument& doc, const Resources& res, const OptimizerConfig& cfg,
                        const AudioClip* source) {
  Analysis a;
  a.config = cfg;
  a.diagnostics = validate_project(doc.project);
  if (has_errors(a.diagnostics)) throw ValidationError(a.diagnostics);
  const Project& p = doc.project;
  a.gaps = analyze_gaps(p, cfg, source, a.diagnostics);
  const ProjectScorer scorer(p, res, doc.coherence_overrides);
  for (const auto* d : detail::draft_order(p)) {
    auto set = scorer.candidates(*d, cfg.candidate_cap);
    for (const auto& ps : set.protected_set.diagnostics) a.diagnostics.push_back(ps);
    std::vector<ScoredCandidate> row;
    for (const auto& c : set.candidates) row.push_back({c, scorer.cost(c, cfg)});
    a.table.push_back(std::move(row));
    a.sets.push_back(std::move(set));
  }
  return a;
}

/// Project source audio at its own format, padded or trimmed to the
/// project's duration. Without audio, a silent 16 kHz bed.
inline AudioClip load_source(const ProjectDocument& doc, std::vector<Diagnostic>& diags) {
  const Project& p = doc.project;
  if (p.source_audio.empty()) {
    diags.push_back({Diagnostic::Severity::kWarning, "no_source_audio", "source_audio",
                     "no source audio; rendering over silence"});
    return AudioClip::silence(frame_of(p.source_duration, 16000), 16000, 1);
  }
  AudioClip c = read_wav(resolve_path(doc, p.source_audio));
  const auto want = frame_of(p.source_duration, c.sample_rate);
  if (c.frames() != want) {
    const double off = (static_cast<double>(c.frames()) - static_cast<double>(want)) / c.sample_rate;
    if (std::abs(off) > 0.05)
      diags.push_back({Diagnostic::Severity::kWarning, "source_length", "source_audio",
                       "audio is " + std::to_string(c.seconds()) + " s, project says " +
                           std::to_string(to_seconds(p.source_duration)) + " s; padded or trimmed"});
    c.samples.resize(want * c.channels, 0.0f);
  }
  return c;
}

/// Recorded takes by description id. A recording without an audio path
/// renders as silence of its length.
inline std::map<std::string, AudioClip> load_recordings(const ProjectDocument& doc, int rate,
                                                        std::vector<Diagnostic>& diags) {
  std::map<std::string, AudioClip> out;
  for (const auto& d : doc.project.descriptions) {
    if (!d.recording) continue;
    if (d.recording->path.empty()) {
      diags.push_back({Diagnostic::Severity::kWarning, "no_recording_audio", d.id,
                       "recording has an alignment but no audio file; rendered silent"});
      out[d.id] = AudioClip::silence(frame_of(d.recording->duration, rate), rate, 1);
      continue;
    }
    out[d.id] = read_wav(resolve_path(doc, d.recording->path));
  }
  return out;
}

struct PipelineOptions {
  OptimizerConfig config;
  std::uint64_t seed = 0;
  RenderOptions render;
};

struct PipelineResult {
  Analysis analysis;
  CompositionPlan plan;
  RenderResult rendered;
  std::string report;
};

/// Full run. With `fixed_plan`, the optimizer is skipped and that plan is
/// rendered as given.
inline PipelineResult run_pipeline(const ProjectDocument& doc, const Resources& res, const PipelineOptions& opt,
                                   const CompositionPlan* fixed_plan = nullptr) {
  PipelineResult r;
  std::vector<Diagnostic> io_diags;
  // Validate before touching audio files.
  if (auto diags = validate_project(doc.project); has_errors(diags)) throw ValidationError(diags);
  const AudioClip source = load_source(doc, io_diags);
  const auto recordings = load_recordings(doc, source.sample_rate, io_diags);
  r.analysis = analyze(doc, res, opt.config, &source);
  r.analysis.diagnostics.insert(r.analysis.diagnostics.begin(), io_diags.begin(), io_diags.end());
  r.plan = fixed_plan ? *fixed_plan : optimize(doc.project, r.analysis.gaps, r.analysis.table, opt.config);
  r.rendered = render(doc.project, r.plan, r.analysis.gaps, source,
                      default_narration(recordings, source.sample_rate, source.channels), opt.seed, opt.render);
  auto all = r.analysis.diagnostics;
  all.insert(all.end(), r.rendered.manifest.diagnostics.begin(), r.rendered.manifest.diagnostics.end());
  r.report = plan_report(doc.project, r.plan, r.analysis.gaps, all);
  return r;
}

inline nlohmann::json plan_document(const PipelineResult& r) {
  auto j = plan_to_json(r.plan);
  j["gaps"] = gaps_to_json(r.analysis.gaps);
  nlohmann::json diags = nlohmann::json::array();
  for (const auto& d : r.analysis.diagnostics) diags.push_back(to_string(d));
  j["diagnostics"] = diags;
  return j;
}

struct ArtifactPaths {
  std::string plan, manifest, audio, report;
};

/// plan.json, manifest.json, output.wav and report.txt in `dir`.
inline ArtifactPaths write_artifacts(const std::string& dir, const PipelineResult& r) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("io", "cannot create '" + dir + "': " + ec.message());
  ArtifactPaths p{(fs::path(dir) / "plan.json").string(), (fs::path(dir) / "manifest.json").string(),
                  (fs::path(dir) / "output.wav").string(), (fs::path(dir) / "report.txt").string()};
  write_file_atomic(p.plan, plan_document(r).dump(2) + "\n");
  write_file_atomic(p.manifest, manifest_to_json(r.rendered.manifest).dump(2) + "\n");
  write_file_atomic(p.audio, encode_wav(r.rendered.audio));
  write_file_atomic(p.report, r.report);
  return p;
}

}  // namespace adfit

#endif  // ADFIT_PIPELINE_HPP
