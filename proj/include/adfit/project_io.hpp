#ifndef ADFIT_PROJECT_IO_HPP
#define ADFIT_PROJECT_IO_HPP

// JSON project files, plans and reports.
//
// Times are seconds (JSON numbers) on the way in and out; they are held as
// whole milliseconds, so a file written by this code reads back identically.

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "adfit/config.hpp"
#include "adfit/optimizer.hpp"
#include "adfit/scorer.hpp"
#include "adfit/timeline.hpp"

namespace adfit {

/// A project as stored on disk: the model plus per-project settings.
struct ProjectDocument {
  Project project;
  CoherenceOverrides coherence_overrides;
  nlohmann::json optimizer = nlohmann::json::object();  // overrides, applied over defaults
  std::string base_dir;  // resolves relative audio paths; not serialized
};

namespace detail {

using nlohmann::json;

inline double secs(Millis t) { return to_seconds(t); }

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error("validation", where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error("validation", where + "." + key + ": wrong type");
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return field<T>(j, key, where);
}

inline Millis time_field(const json& j, const char* key, const std::string& where) {
  const double v = field<double>(j, key, where);
  if (!std::isfinite(v)) throw Error("validation", where + "." + key + ": not a finite number");
  return from_seconds(v);
}

inline json word_to_json(const TimedWord& w, bool timed, bool annotated) {
  json j = {{"text", w.text}};
  if (timed) {
    j["start"] = secs(w.start);
    j["end"] = secs(w.end);
  }
  if (annotated || !w.pos.empty()) j["pos"] = w.pos;
  if (annotated || w.dep_head >= 0) j["head"] = w.dep_head;
  if (annotated || !w.dep_label.empty()) j["deprel"] = w.dep_label;
  return j;
}

inline TimedWord word_from_json(const json& j, const std::string& where, bool timed) {
  if (!j.is_object()) throw Error("validation", where + ": expected an object");
  TimedWord w;
  w.text = field<std::string>(j, "text", where);
  if (timed) {
    w.start = time_field(j, "start", where);
    w.end = time_field(j, "end", where);
  } else if (j.contains("start")) {
    w.start = time_field(j, "start", where);
    w.end = time_field(j, "end", where);
  }
  w.pos = field_or<std::string>(j, "pos", "", where);
  w.dep_head = field_or<int>(j, "head", -1, where);
  w.dep_label = field_or<std::string>(j, "deprel", "", where);
  return w;
}

}  // namespace detail

inline nlohmann::json recording_to_json(const Recording& r) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& s : r.alignment) spans.push_back({detail::secs(s.start), detail::secs(s.end)});
  return {{"path", r.path}, {"duration", detail::secs(r.duration)}, {"alignment", spans}};
}

inline Recording recording_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw Error("validation", where + ": expected an object");
  Recording r;
  r.path = detail::field_or<std::string>(j, "path", "", where);
  r.duration = detail::time_field(j, "duration", where);
  const auto a = detail::field<nlohmann::json>(j, "alignment", where);
  if (!a.is_array()) throw Error("validation", where + ".alignment: expected an array");
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& s = a[i];
    if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number())
      throw Error("validation", where + ".alignment[" + std::to_string(i) + "]: expected [start, end]");
    r.alignment.push_back({from_seconds(s[0].get<double>()), from_seconds(s[1].get<double>())});
  }
  return r;
}

inline nlohmann::json description_to_json(const DraftDescription& d) {
  nlohmann::json words = nlohmann::json::array();
  for (const auto& w : d.words) words.push_back(detail::word_to_json(w, false, true));
  nlohmann::json j = {{"id", d.id},
                      {"anchor_time", detail::secs(d.anchor_time)},
                      {"words", words},
                      {"lock_text", d.lock_text},
                      {"lock_time", d.lock_time},
                      {"lock_presence", d.lock_presence}};
  if (d.recording) j["recording"] = recording_to_json(*d.recording);
  return j;
}

inline DraftDescription description_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw Error("validation", where + ": expected an object");
  DraftDescription d;
  d.id = detail::field<std::string>(j, "id", where);
  d.anchor_time = detail::time_field(j, "anchor_time", where);
  const auto words = detail::field<nlohmann::json>(j, "words", where);
  if (!words.is_array()) throw Error("validation", where + ".words: expected an array");
  for (std::size_t i = 0; i < words.size(); ++i)
    d.words.push_back(detail::word_from_json(words[i], where + ".words[" + std::to_string(i) + "]", false));
  d.lock_text = detail::field_or<bool>(j, "lock_text", false, where);
  d.lock_time = detail::field_or<bool>(j, "lock_time", false, where);
  d.lock_presence = detail::field_or<bool>(j, "lock_presence", false, where);
  if (j.contains("recording") && !j.at("recording").is_null())
    d.recording = recording_from_json(j.at("recording"), where + ".recording");
  return d;
}

inline nlohmann::json document_to_json(const ProjectDocument& doc) {
  using nlohmann::json;
  const auto& p = doc.project;
  json transcript = json::array();
  for (const auto& w : p.transcript) transcript.push_back(detail::word_to_json(w, true, false));
  json labels = json::array();
  for (const auto& l : p.labels)
    labels.push_back({{"start", detail::secs(l.start)}, {"end", detail::secs(l.end)}, {"label", to_string(l.label)}});
  json shots = json::array();
  for (auto s : p.shots) shots.push_back(detail::secs(s));
  json descs = json::array();
  for (const auto& d : p.descriptions) descs.push_back(description_to_json(d));
  json j = {{"version", 1},
            {"source_duration", detail::secs(p.source_duration)},
            {"source_audio", p.source_audio},
            {"transcript", transcript},
            {"labels", labels},
            {"shots", shots},
            {"descriptions", descs}};
  if (!doc.coherence_overrides.empty()) {
    json o = json::array();
    for (const auto& [key, v] : doc.coherence_overrides)
      o.push_back({{"description_id", key.first}, {"text", key.second}, {"coherence", v}});
    j["coherence_overrides"] = o;
  }
  if (!doc.optimizer.empty()) j["optimizer"] = doc.optimizer;
  return j;
}

/// Equality of everything that is serialized.
inline bool same_document(const ProjectDocument& a, const ProjectDocument& b) {
  return document_to_json(a) == document_to_json(b);
}

inline ProjectDocument document_from_json(const nlohmann::json& j) {
  using nlohmann::json;
  if (!j.is_object()) throw Error("validation", "project: expected a JSON object");
  const int version = detail::field_or<int>(j, "version", 1, "project");
  if (version != 1) throw Error("validation", "project: unsupported version " + std::to_string(version));
  ProjectDocument doc;
  auto& p = doc.project;
  p.source_duration = detail::time_field(j, "source_duration", "project");
  p.source_audio = detail::field_or<std::string>(j, "source_audio", "", "project");
  auto array = [&](const char* key) {
    if (!j.contains(key)) return json::array();
    if (!j.at(key).is_array()) throw Error("validation", std::string("project.") + key + ": expected an array");
    return j.at(key);
  };
  const auto transcript = array("transcript");
  for (std::size_t i = 0; i < transcript.size(); ++i)
    p.transcript.push_back(detail::word_from_json(transcript[i], "transcript[" + std::to_string(i) + "]", true));
  const auto labels = array("labels");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string where = "labels[" + std::to_string(i) + "]";
    AudioLabelSegment s;
    s.start = detail::time_field(labels[i], "start", where);
    s.end = detail::time_field(labels[i], "end", where);
    try {
      s.label = parse_audio_label(detail::field<std::string>(labels[i], "label", where));
    } catch (const Error& e) {
      throw Error("validation", where + ": " + e.what());
    }
    p.labels.push_back(s);
  }
  const auto shots = array("shots");
  for (std::size_t i = 0; i < shots.size(); ++i) {
    if (!shots[i].is_number()) throw Error("validation", "shots[" + std::to_string(i) + "]: expected seconds");
    p.shots.push_back(from_seconds(shots[i].get<double>()));
  }
  const auto descs = array("descriptions");
  for (std::size_t i = 0; i < descs.size(); ++i)
    p.descriptions.push_back(description_from_json(descs[i], "descriptions[" + std::to_string(i) + "]"));
  const auto overrides = array("coherence_overrides");
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    const std::string where = "coherence_overrides[" + std::to_string(i) + "]";
    doc.coherence_overrides[{detail::field<std::string>(overrides[i], "description_id", where),
                             detail::field<std::string>(overrides[i], "text", where)}] =
        detail::field<double>(overrides[i], "coherence", where);
  }
  if (j.contains("optimizer")) {
    if (!j.at("optimizer").is_object()) throw Error("validation", "project.optimizer: expected an object");
    doc.optimizer = j.at("optimizer");
  }
  return doc;
}

inline ProjectDocument parse_document(const std::string& text, const std::string& name = "<memory>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("validation", name + ": " + e.what());
  }
  return document_from_json(j);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a temporary file and rename, so readers never see a partial file.
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  static std::atomic<unsigned> counter{0};
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp" + std::to_string(::getpid()) + "." + std::to_string(counter++);
  FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw Error("io", "cannot write '" + tmp.string() + "'");
  const bool ok = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size() && std::fflush(f) == 0 &&
                  ::fsync(::fileno(f)) == 0;
  std::fclose(f);
  std::error_code ec;
  if (!ok) {
    fs::remove(tmp, ec);
    throw Error("io", "short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("io", "cannot replace '" + path + "': " + ec.message());
  }
}

inline ProjectDocument load_document(const std::string& path) {
  auto doc = parse_document(read_file(path), path);
  doc.base_dir = std::filesystem::path(path).parent_path().string();
  return doc;
}

inline std::string resolve_path(const ProjectDocument& doc, const std::string& rel) {
  namespace fs = std::filesystem;
  fs::path p(rel);
  if (p.is_absolute() || doc.base_dir.empty()) return p.string();
  return (fs::path(doc.base_dir) / p).string();
}

// Optimizer settings: every OptimizerConfig field by name, seconds for times.

inline nlohmann::json config_to_json(const OptimizerConfig& c) {
  return {{"w_coh", c.w_coh},
          {"w_info", c.w_info},
          {"w_edit", c.w_edit},
          {"last_word_penalty", c.last_word_penalty},
          {"info_ceiling", c.info_ceiling},
          {"skip_cost", c.skip_cost},
          {"near_overlap_penalty", c.near_overlap_penalty},
          {"near_overlap_margin", to_seconds(c.near_overlap_margin)},
          {"unlabeled_region_penalty", c.unlabeled_region_penalty},
          {"time_grid", to_seconds(c.time_grid)},
          {"placement_window", to_seconds(c.placement_window)},
          {"max_shot_crossings", c.max_shot_crossings},
          {"extension_cap_factor", c.extension_cap_factor},
          {"extension_penalty", c.extension_penalty},
          {"min_extendable_music", to_seconds(c.min_extendable_music)},
          {"min_extendable_bpm", c.min_extendable_bpm},
          {"mode", to_string(c.mode)},
          {"candidate_cap", c.candidate_cap}};
}

/// Applies the keys present in `j` over `base`; unknown keys are errors.
inline OptimizerConfig apply_config(OptimizerConfig c, const nlohmann::json& j) {
  const std::string where = "optimizer";
  for (const auto& [key, v] : j.items()) {
    const char* k = key.c_str();
    if (key == "w_coh") c.w_coh = detail::field<double>(j, k, where);
    else if (key == "w_info") c.w_info = detail::field<double>(j, k, where);
    else if (key == "w_edit") c.w_edit = detail::field<double>(j, k, where);
    else if (key == "last_word_penalty") c.last_word_penalty = detail::field<double>(j, k, where);
    else if (key == "info_ceiling") c.info_ceiling = detail::field<double>(j, k, where);
    else if (key == "skip_cost") c.skip_cost = detail::field<double>(j, k, where);
    else if (key == "near_overlap_penalty") c.near_overlap_penalty = detail::field<double>(j, k, where);
    else if (key == "near_overlap_margin") c.near_overlap_margin = detail::time_field(j, k, where);
    else if (key == "unlabeled_region_penalty") c.unlabeled_region_penalty = detail::field<double>(j, k, where);
    else if (key == "time_grid") c.time_grid = detail::time_field(j, k, where);
    else if (key == "placement_window") c.placement_window = detail::time_field(j, k, where);
    else if (key == "max_shot_crossings") c.max_shot_crossings = detail::field<int>(j, k, where);
    else if (key == "extension_cap_factor") c.extension_cap_factor = detail::field<double>(j, k, where);
    else if (key == "extension_penalty") c.extension_penalty = detail::field<double>(j, k, where);
    else if (key == "min_extendable_music") c.min_extendable_music = detail::time_field(j, k, where);
    else if (key == "min_extendable_bpm") c.min_extendable_bpm = detail::field<double>(j, k, where);
    else if (key == "mode") c.mode = parse_render_mode(detail::field<std::string>(j, k, where));
    else if (key == "candidate_cap") c.candidate_cap = detail::field<std::size_t>(j, k, where);
    else throw Error("validation", "optimizer: unknown setting '" + key + "'");
  }
  if (auto err = c.check(); !err.empty()) throw Error("validation", "optimizer: " + err);
  return c;
}

// Plans.

inline nlohmann::json cost_to_json(const CostBreakdown& c) {
  return {{"coherence", c.coherence}, {"informativeness", c.informativeness}, {"edit", c.edit},
          {"weighted_total", c.weighted_total}};
}

inline nlohmann::json gaps_to_json(const std::vector<GapSegment>& gaps) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& g : gaps)
    out.push_back({{"start", to_seconds(g.start)},
                   {"end", to_seconds(g.end)},
                   {"label", to_string(g.label)},
                   {"extendable", g.extendable},
                   {"max_extension", to_seconds(g.max_extension)}});
  return out;
}

inline nlohmann::json plan_to_json(const CompositionPlan& plan) {
  using nlohmann::json;
  json placed = json::array();
  for (const auto& p : plan.placed)
    placed.push_back({{"description_id", p.description_id},
                      {"candidate_index", p.candidate_index},
                      {"text", p.candidate.text},
                      {"kept_indices", p.candidate.kept_indices},
                      {"cut_count", p.candidate.cut_count},
                      {"start", to_seconds(p.start)},
                      {"duration", to_seconds(p.duration)},
                      {"extension", to_seconds(p.extension)},
                      {"cost", cost_to_json(p.cost)},
                      {"placement_penalty", p.placement_penalty}});
  json entries = json::array();
  for (const auto& e : plan.entries)
    entries.push_back({{"description_id", e.description_id},
                       {"skipped", e.skipped},
                       {"candidate_cost", e.candidate_cost},
                       {"placement_penalty", e.placement_penalty}});
  return {{"mode", to_string(plan.mode)},
          {"total_cost", plan.total()},
          {"total_cost_micros", plan.total_cost.micros()},
          {"placed", placed},
          {"skipped", plan.skipped},
          {"entries", entries}};
}

/// Inverse of plan_to_json. Candidates are rebuilt from their kept word
/// indices against `project`, so durations follow the current recordings.
inline CompositionPlan plan_from_json(const nlohmann::json& j, const Project& project) {
  const std::string where = "plan";
  CompositionPlan plan;
  plan.mode = parse_render_mode(detail::field<std::string>(j, "mode", where));
  plan.total_cost = Cost::micros(detail::field<std::int64_t>(j, "total_cost_micros", where));
  for (const auto& e : detail::field<nlohmann::json>(j, "placed", where)) {
    PlacedDescription p;
    p.description_id = detail::field<std::string>(e, "description_id", where);
    const auto* d = project.find_description(p.description_id);
    if (!d) throw Error("validation", "plan places unknown description '" + p.description_id + "'");
    auto kept = detail::field<std::vector<int>>(e, "kept_indices", where);
    for (int k : kept)
      if (k < 0 || static_cast<std::size_t>(k) >= d->words.size())
        throw Error("validation", "plan keeps word " + std::to_string(k) + " of '" + d->id + "', which has " +
                                      std::to_string(d->words.size()) + " words");
    p.candidate = make_candidate(*d, std::move(kept));
    p.candidate_index = detail::field_or<int>(e, "candidate_index", -1, where);
    p.start = detail::time_field(e, "start", where);
    p.duration = p.candidate.duration;
    p.extension = detail::time_field(e, "extension", where);
    const auto c = detail::field<nlohmann::json>(e, "cost", where);
    p.cost = {detail::field<double>(c, "coherence", where), detail::field<double>(c, "informativeness", where),
              detail::field<double>(c, "edit", where), detail::field<double>(c, "weighted_total", where)};
    p.placement_penalty = detail::field_or<double>(e, "placement_penalty", 0.0, where);
    plan.placed.push_back(std::move(p));
  }
  plan.skipped = detail::field_or<std::vector<std::string>>(j, "skipped", {}, where);
  if (j.contains("entries"))
    for (const auto& e : j.at("entries"))
      plan.entries.push_back({detail::field<std::string>(e, "description_id", where),
                              detail::field_or<bool>(e, "skipped", false, where),
                              detail::field_or<double>(e, "candidate_cost", 0.0, where),
                              detail::field_or<double>(e, "placement_penalty", 0.0, where)});
  return plan;
}

/// Human-readable summary of a plan.
inline std::string plan_report(const Project& project, const CompositionPlan& plan,
                               const std::vector<GapSegment>& gaps, const std::vector<Diagnostic>& diags) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(3);
  o << "mode: " << to_string(plan.mode) << "\n";
  o << "descriptions: " << project.descriptions.size() << "  placed: " << plan.placed.size()
    << "  skipped: " << plan.skipped.size() << "\n";
  o << "gaps: " << gaps.size() << "\n";
  for (const auto& g : gaps)
    o << "  " << to_seconds(g.start) << "-" << to_seconds(g.end) << "  " << to_string(g.label)
      << (g.extendable ? "  extendable" : "") << "\n";
  o << "\n";
  for (const auto& e : plan.entries) {
    const auto* d = project.find_description(e.description_id);
    o << e.description_id << ": ";
    if (e.skipped) {
      o << "SKIPPED (cost " << e.candidate_cost << ")\n";
      if (d) o << "  draft: " << d->text() << "\n";
      continue;
    }
    const auto* p = plan.find(e.description_id);
    o << "placed at " << to_seconds(p->start) << " s for " << to_seconds(p->duration) << " s";
    if (p->extension > Millis{0}) o << " (gap extended " << to_seconds(p->extension) << " s)";
    o << "\n";
    if (d) o << "  draft: " << d->text() << "\n";
    o << "  spoken: " << p->candidate.text << "\n";
    o << "  coherence " << p->cost.coherence << "  informativeness " << p->cost.informativeness << "  edit "
      << p->cost.edit << "  weighted " << p->cost.weighted_total << "  placement " << p->placement_penalty << "\n";
  }
  o << "\ntotal cost E = " << plan.total() << "\n";
  if (!diags.empty()) {
    o << "\ndiagnostics:\n";
    for (const auto& d : diags) o << "  " << to_string(d) << "\n";
  }
  return o.str();
}

}  // namespace adfit

#endif  // ADFIT_PROJECT_IO_HPP
