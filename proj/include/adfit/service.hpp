#ifndef ADFIT_SERVICE_HPP
#define ADFIT_SERVICE_HPP

// Project store and HTTP API.
//
// Each project lives in <root>/<id>/: store.json holds the revision, the
// document and the editing state; audio/ holds uploads and renders/ holds
// render artifacts. Audio files are never overwritten, so a render pinned to
// an old revision keeps reading the files that revision names.

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "adfit/pipeline.hpp"

namespace adfit {

/// One committed revision of a project.
struct ProjectState {
  std::string id;
  std::int64_t revision = 0;
  ProjectDocument doc;
  nlohmann::json plan;                              // last plan, or null
  std::map<std::string, std::vector<int>> selections;  // user-chosen kept words by description

  nlohmann::json state_json() const { return {{"plan", plan}, {"selections", selections}}; }
};

inline std::string base64_decode(const std::string& in) {
  static const std::string chars = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  int val = 0, bits = -8;
  for (char c : in) {
    if (c == '=') break;
    const auto k = chars.find(c);
    if (k == std::string::npos) {
      if (std::isspace(static_cast<unsigned char>(c))) continue;
      throw Error("validation", "invalid base64 data");
    }
    val = (val << 6) + static_cast<int>(k);
    bits += 6;
    if (bits >= 0) {
      out.push_back(static_cast<char>((val >> bits) & 0xFF));
      bits -= 8;
    }
  }
  return out;
}

class ProjectStore {
 public:
  explicit ProjectStore(std::string root) : root_(std::move(root)) {
    std::error_code ec;
    if (!std::filesystem::is_directory(root_, ec)) throw Error("io", "store root '" + root_ + "' is not a directory");
  }

  /// ADFIT_STORE, else `fallback`.
  static std::string root_from_env(const std::string& fallback = "") {
    const char* v = std::getenv("ADFIT_STORE");
    return v && *v ? v : fallback;
  }

  const std::string& root() const { return root_; }

  std::string dir(const std::string& id) const {
    static const std::regex ok("p[0-9]{6}");
    if (!std::regex_match(id, ok)) throw Error("not_found", "no project '" + id + "'");
    return (std::filesystem::path(root_) / id).string();
  }

  /// Stores a new project at revision 1. `files` maps paths relative to the
  /// project directory to their contents and are written first.
  std::string create(ProjectDocument doc, const nlohmann::json& state = nullptr,
                     const std::map<std::string, std::string>& files = {}) {
    namespace fs = std::filesystem;
    std::string id;
    {
      std::lock_guard<std::mutex> lock(create_mutex_);
      for (int n = next_id();; ++n) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "p%06d", n);
        std::error_code ec;
        if (fs::create_directory(fs::path(root_) / buf, ec)) {
          id = buf;
          break;
        }
        if (ec) throw Error("io", "cannot create project directory: " + ec.message());
      }
    }
    for (const auto& [rel, bytes] : files) put_file(id, rel, bytes);
    ProjectState s;
    s.id = id;
    s.revision = 1;
    s.doc = std::move(doc);
    if (state.is_object()) {
      s.plan = state.value("plan", nlohmann::json(nullptr));
      if (state.contains("selections")) s.selections = state.at("selections").get<std::map<std::string, std::vector<int>>>();
    }
    commit(s);
    return id;
  }

  ProjectState get(const std::string& id) const {
    const auto path = (std::filesystem::path(dir(id)) / "store.json").string();
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) throw Error("not_found", "no project '" + id + "'");
    const auto j = nlohmann::json::parse(read_file(path));
    ProjectState s;
    s.id = id;
    s.revision = j.at("revision").get<std::int64_t>();
    s.doc = document_from_json(j.at("document"));
    s.doc.base_dir = dir(id);
    s.plan = j.at("state").value("plan", nlohmann::json(nullptr));
    s.selections = j.at("state").value("selections", std::map<std::string, std::vector<int>>{});
    return s;
  }

  std::vector<std::pair<std::string, std::int64_t>> list() const {
    std::vector<std::pair<std::string, std::int64_t>> out;
    for (const auto& e : std::filesystem::directory_iterator(root_)) {
      const auto id = e.path().filename().string();
      try {
        out.emplace_back(id, get(id).revision);
      } catch (const Error&) {
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Applies `fn` to the current revision and commits the result as the
  /// next one. With `base`, fails with "conflict" unless it is current.
  /// Nothing is written if `fn` throws.
  ProjectState update(const std::string& id, std::optional<std::int64_t> base,
                      const std::function<void(ProjectState&)>& fn) {
    std::lock_guard<std::mutex> lock(mutex_for(id));
    ProjectState s = get(id);
    if (base && *base != s.revision)
      throw Error("conflict", "revision " + std::to_string(*base) + " is stale; current is " + std::to_string(s.revision));
    fn(s);
    ++s.revision;
    commit(s);
    return s;
  }

  /// Writes a file under the project directory; `rel` must stay inside it.
  void put_file(const std::string& id, const std::string& rel, const std::string& bytes) {
    namespace fs = std::filesystem;
    const auto path = fs::path(dir(id)) / safe_relative(rel);
    fs::create_directories(path.parent_path());
    write_file_atomic(path.string(), bytes);
  }

  /// Absolute path of a file inside the project, or not_found.
  std::string file(const std::string& id, const std::string& rel) const {
    const auto path = std::filesystem::path(dir(id)) / safe_relative(rel);
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) throw Error("not_found", "no file '" + rel + "'");
    return path.string();
  }

  static std::filesystem::path safe_relative(const std::string& rel) {
    const std::filesystem::path p(rel);
    if (rel.empty() || p.is_absolute()) throw Error("validation", "bad path '" + rel + "'");
    for (const auto& part : p)
      if (part == ".." || part == "." || part.empty()) throw Error("validation", "bad path '" + rel + "'");
    return p;
  }

 private:
  int next_id() const {
    int n = 1;
    for (const auto& e : std::filesystem::directory_iterator(root_)) {
      const auto name = e.path().filename().string();
      if (name.size() == 7 && name[0] == 'p') n = std::max(n, std::atoi(name.c_str() + 1) + 1);
    }
    return n;
  }

  void commit(const ProjectState& s) {
    nlohmann::json j = {{"revision", s.revision}, {"document", document_to_json(s.doc)}, {"state", s.state_json()}};
    write_file_atomic((std::filesystem::path(dir(s.id)) / "store.json").string(), j.dump(1) + "\n");
  }

  std::mutex& mutex_for(const std::string& id) {
    std::lock_guard<std::mutex> lock(locks_mutex_);
    auto& m = locks_[id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
  }

  std::string root_;
  std::mutex create_mutex_;
  std::mutex locks_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

/// Self-contained copy of a project: document, editing state and the audio
/// files the document names, base64-encoded.
inline nlohmann::json export_project(const ProjectStore& store, const ProjectState& s) {
  nlohmann::json files = nlohmann::json::object();
  auto add = [&](const std::string& rel) {
    if (rel.empty() || files.contains(rel)) return;
    files[rel] = httplib::detail::base64_encode(read_file(store.file(s.id, rel)));
  };
  add(s.doc.project.source_audio);
  for (const auto& d : s.doc.project.descriptions)
    if (d.recording) add(d.recording->path);
  return {{"format", "adfit-project"},
          {"version", 1},
          {"document", document_to_json(s.doc)},
          {"state", s.state_json()},
          {"files", files}};
}

struct ImportedProject {
  ProjectDocument doc;
  nlohmann::json state;
  std::map<std::string, std::string> files;
};

inline ImportedProject import_project(const nlohmann::json& bundle) {
  ImportedProject out;
  out.doc = document_from_json(bundle.at("document"));
  out.state = bundle.value("state", nlohmann::json::object());
  const auto files = bundle.value("files", nlohmann::json::object());
  for (const auto& [rel, data] : files.items()) {
    ProjectStore::safe_relative(rel);
    out.files[rel] = base64_decode(data.get<std::string>());
  }
  return out;
}

/// Audio, gaps and scorer for one revision, built once and shared by
/// concurrent readers.
struct Snapshot {
  ProjectState state;
  OptimizerConfig config;
  std::vector<Diagnostic> diagnostics;
  bool valid = false;
  AudioClip source;
  std::map<std::string, AudioClip> recordings;
  std::vector<GapSegment> gaps;
  std::unique_ptr<ProjectScorer> scorer;
};

/// Candidates of `d` by ascending duration, the order of the slider.
inline std::vector<Candidate> slider_order(std::vector<Candidate> cs) {
  std::stable_sort(cs.begin(), cs.end(), [](const Candidate& a, const Candidate& b) { return a.duration < b.duration; });
  return cs;
}

inline nlohmann::json candidate_json(const Candidate& c) {
  return {{"text", c.text},
          {"kept_indices", c.kept_indices},
          {"cut_count", c.cut_count},
          {"duration", to_seconds(c.duration)}};
}

class Service {
 public:
  Service(ProjectStore& store, const Resources& res) : store_(store), res_(res) {
    server_.set_payload_max_length(std::size_t{1} << 30);
    server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        respond_error(res, 500, "internal", e.what());
      }
    });
    routes();
  }

  httplib::Server& server() { return server_; }

  /// Binds to `port` (0 picks one) and returns the port.
  int bind(const std::string& host, int port) {
    const int p = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (p < 0) throw Error("io", "cannot bind " + host + ":" + std::to_string(port));
    return p;
  }
  bool listen() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }

  std::shared_ptr<const Snapshot> snapshot(const std::string& id) {
    ProjectState s = store_.get(id);
    {
      std::lock_guard<std::mutex> lock(cache_mutex_);
      auto it = cache_.find(id);
      if (it != cache_.end() && it->second->state.revision == s.revision) return it->second;
    }
    auto snap = build_snapshot(std::move(s));
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto& slot = cache_[id];
    if (!slot || slot->state.revision < snap->state.revision) slot = snap;
    return snap;
  }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  static void respond_json(Res& res, int status, const nlohmann::json& j) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  static void respond_error(Res& res, int status, const std::string& code, const std::string& message,
                            const std::vector<Diagnostic>& diags = {}) {
    nlohmann::json d = nlohmann::json::array();
    for (const auto& x : diags)
      d.push_back({{"severity", x.is_error() ? "error" : "warning"},
                   {"code", x.code},
                   {"location", x.location},
                   {"message", x.message}});
    respond_json(res, status, {{"error", code}, {"message", message}, {"diagnostics", d}});
  }

  static int status_of(const std::string& code) {
    if (code == "not_found") return 404;
    if (code == "conflict") return 409;
    if (code == "io") return 500;
    return 422;
  }

  // Maps thrown errors onto responses.
  template <class F>
  auto guarded(F f) {
    return [f](const Req& req, Res& res) {
      try {
        f(req, res);
      } catch (const ValidationError& e) {
        respond_error(res, 422, e.code(), e.what(), e.diagnostics());
      } catch (const Error& e) {
        respond_error(res, status_of(e.code()), e.code(), e.what());
      } catch (const nlohmann::json::exception& e) {
        respond_error(res, 400, "bad_request", e.what());
      }
    };
  }

  static nlohmann::json body_json(const Req& req) {
    if (req.body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw Error("validation", "request body must be a JSON object");
    return j;
  }

  // base_revision from the body, else If-Match.
  static std::optional<std::int64_t> base_revision(const Req& req, const nlohmann::json& body) {
    if (body.contains("base_revision")) return body.at("base_revision").get<std::int64_t>();
    if (req.has_header("If-Match")) {
      auto v = req.get_header_value("If-Match");
      v.erase(std::remove(v.begin(), v.end(), '"'), v.end());
      try {
        return std::stoll(v);
      } catch (const std::exception&) {
        throw Error("validation", "If-Match must be a revision number");
      }
    }
    return std::nullopt;
  }

  std::shared_ptr<Snapshot> build_snapshot(ProjectState s) {
    auto snap = std::make_shared<Snapshot>();
    snap->config = project_config(s.doc);
    snap->diagnostics = validate_project(s.doc.project);
    snap->valid = !has_errors(snap->diagnostics);
    if (snap->valid) {
      snap->source = load_source(s.doc, snap->diagnostics);
      snap->recordings = load_recordings(s.doc, snap->source.sample_rate, snap->diagnostics);
      snap->gaps = analyze_gaps(s.doc.project, snap->config, &snap->source, snap->diagnostics);
      snap->scorer = std::make_unique<ProjectScorer>(s.doc.project, res_, s.doc.coherence_overrides);
    }
    snap->state = std::move(s);
    return snap;
  }

  static const Snapshot& require_valid(const Snapshot& s) {
    if (!s.valid) throw ValidationError(s.diagnostics);
    return s;
  }

  static const DraftDescription& description(const Snapshot& s, const std::string& did) {
    const auto* d = s.state.doc.project.find_description(did);
    if (!d) throw Error("not_found", "no description '" + did + "' in project '" + s.state.id + "'");
    return *d;
  }

  static nlohmann::json diagnostics_json(const std::vector<Diagnostic>& diags) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& d : diags) out.push_back(to_string(d));
    return out;
  }

  nlohmann::json state_json(const Snapshot& s) const {
    return {{"id", s.state.id},
            {"revision", s.state.revision},
            {"document", document_to_json(s.state.doc)},
            {"gaps", gaps_to_json(s.gaps)},
            {"plan", s.state.plan},
            {"selections", s.state.selections},
            {"diagnostics", diagnostics_json(s.diagnostics)}};
  }

  nlohmann::json candidates_json(const Snapshot& s, const DraftDescription& d) const {
    nlohmann::json out = nlohmann::json::array();
    const auto set = s.scorer->candidates(d, s.config.candidate_cap);
    auto ordered = slider_order(set.candidates);
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      auto j = candidate_json(ordered[i]);
      j["index"] = i;
      j["cost"] = cost_to_json(s.scorer->cost(ordered[i], s.config));
      out.push_back(j);
    }
    return out;
  }

  // Kept words currently chosen for `d`: the user's selection, else the
  // plan's, else every word.
  static std::vector<int> chosen(const ProjectState& st, const DraftDescription& d) {
    if (auto it = st.selections.find(d.id); it != st.selections.end()) return it->second;
    if (st.plan.is_object())
      for (const auto& p : st.plan.value("placed", nlohmann::json::array()))
        if (p.value("description_id", "") == d.id) return p.at("kept_indices").get<std::vector<int>>();
    std::vector<int> all(d.words.size());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }

  static Millis planned_start(const ProjectState& st, const DraftDescription& d) {
    if (st.plan.is_object())
      for (const auto& p : st.plan.value("placed", nlohmann::json::array()))
        if (p.value("description_id", "") == d.id) return from_seconds(p.at("start").get<double>());
    return d.anchor_time;
  }

  // The stored plan with user selections swapped in and costs rescored.
  static CompositionPlan edited_plan(const Snapshot& s) {
    if (!s.state.plan.is_object()) throw Error("validation", "project has no plan yet; render without keep_plan first");
    auto plan = plan_from_json(s.state.plan, s.state.doc.project);
    for (auto& p : plan.placed) {
      auto it = s.state.selections.find(p.description_id);
      if (it == s.state.selections.end()) continue;
      const auto* d = s.state.doc.project.find_description(p.description_id);
      const ScoredCandidate before{p.candidate, p.cost};
      p.candidate = make_candidate(*d, it->second);
      p.duration = p.candidate.duration;
      p.cost = s.scorer->cost(p.candidate, s.config);
      const ScoredCandidate after{p.candidate, p.cost};
      for (auto& e : plan.entries)
        if (e.description_id == p.description_id) e.candidate_cost = p.cost.weighted_total;
      plan.total_cost = Cost::micros(plan.total_cost.micros() - detail::candidate_cost_units(before).micros() +
                                     detail::candidate_cost_units(after).micros());
    }
    return plan;
  }

  // Renders the gap holding `start` with `d` narrated at `start`; the output
  // runs on past the gap when the narration does.
  std::string render_snippet(const Snapshot& s, const DraftDescription& d, const std::vector<int>& kept, Millis start) {
    const int rate = s.source.sample_rate, ch = s.source.channels;
    const auto n = static_cast<std::int64_t>(s.source.frames());
    auto a = static_cast<std::int64_t>(frame_of(start, rate));
    auto b = a;
    for (const auto& g : s.gaps)
      if (g.start <= start && start < g.end) {
        a = static_cast<std::int64_t>(frame_of(g.start, rate));
        b = static_cast<std::int64_t>(frame_of(g.end, rate));
      }
    a = std::min(a, n);
    b = std::min(b, n);
    const auto narrate = default_narration(s.recordings, rate, ch);
    const auto clip = narrate(d, kept);
    const auto offset = static_cast<std::int64_t>(frame_of(start, rate)) - a;
    RenderManifest m;
    m.mode = RenderMode::kInline;
    m.sample_rate = rate;
    m.channels = ch;
    m.source_frames = n;
    m.output_frames = std::max(b - a, offset + static_cast<std::int64_t>(clip.audio.frames()));
    BedDecision copy;
    copy.out_end = b - a;
    copy.src_start = a;
    copy.src_end = b;
    if (copy.length() > 0) m.bed.push_back(copy);
    if (m.output_frames > copy.out_end) {
      BedDecision pause;
      pause.kind = BedDecision::Kind::kPause;
      pause.out_start = copy.out_end;
      pause.out_end = m.output_frames;
      pause.src_start = pause.src_end = b;
      m.bed.push_back(pause);
    }
    m.narrations.push_back({d.id, kept, clip.source, offset, static_cast<std::int64_t>(clip.audio.frames()), clip.joins, 0.0});
    const auto audio = execute_manifest(m, s.source, {clip.audio});
    const auto rel = "renders/snippets/" + d.id + "-r" + std::to_string(s.state.revision) + ".wav";
    store_.put_file(s.state.id, rel, encode_wav(audio));
    return rel;
  }

  std::string audio_url(const std::string& id, const std::string& rel) const { return "/projects/" + id + "/audio/" + rel; }

  void create(const Req& req, Res& res) {
    ProjectDocument doc;
    nlohmann::json state;
    std::map<std::string, std::string> files;
    std::vector<Diagnostic> notes;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("project")) throw Error("validation", "multipart upload needs a 'project' part");
      doc = parse_document(req.get_file_value("project").content, "project");
      if (req.has_file("source")) {
        const auto bytes = req.get_file_value("source").content;
        parse_wav(bytes, "source");
        files["audio/source.wav"] = bytes;
        doc.project.source_audio = "audio/source.wav";
      }
    } else {
      const auto j = nlohmann::json::parse(req.body);
      if (j.contains("document")) {
        auto imp = import_project(j);
        doc = std::move(imp.doc);
        state = std::move(imp.state);
        files = std::move(imp.files);
      } else {
        doc = document_from_json(j);
      }
    }
    // Audio the upload did not carry cannot be resolved inside the store.
    if (!doc.project.source_audio.empty() && !files.count(doc.project.source_audio)) {
      notes.push_back({Diagnostic::Severity::kWarning, "missing_audio", "source_audio",
                       "'" + doc.project.source_audio + "' was not uploaded; dropped"});
      doc.project.source_audio.clear();
    }
    for (auto& d : doc.project.descriptions)
      if (d.recording && !d.recording->path.empty() && !files.count(d.recording->path)) {
        notes.push_back({Diagnostic::Severity::kWarning, "missing_audio", d.id + ".recording",
                         "'" + d.recording->path + "' was not uploaded; dropped"});
        d.recording->path.clear();
      }
    if (auto diags = validate_project(doc.project); has_errors(diags)) throw ValidationError(diags);
    const auto id = store_.create(std::move(doc), state, files);
    respond_json(res, 201, {{"id", id}, {"revision", 1}, {"diagnostics", diagnostics_json(notes)}});
  }

  void edit_description(const Req& req, Res& res, const std::string& id, const std::string& did) {
    const auto body = body_json(req);
    const auto s = store_.update(id, base_revision(req, body), [&](ProjectState& st) {
      auto* d = st.doc.project.find_description(did);
      if (!d) throw Error("not_found", "no description '" + did + "'");
      const std::string where = "descriptions." + did;
      if (body.contains("words")) {
        const auto& w = body.at("words");
        if (!w.is_array()) throw Error("validation", where + ".words: expected an array");
        std::vector<TimedWord> words;
        for (std::size_t i = 0; i < w.size(); ++i)
          words.push_back(detail::word_from_json(w[i], where + ".words[" + std::to_string(i) + "]", false));
        // New text invalidates the take and any word choice.
        d->words = std::move(words);
        d->recording.reset();
        st.selections.erase(did);
      }
      if (body.contains("anchor_time")) d->anchor_time = detail::time_field(body, "anchor_time", where);
      d->lock_text = detail::field_or<bool>(body, "lock_text", d->lock_text, where);
      d->lock_time = detail::field_or<bool>(body, "lock_time", d->lock_time, where);
      d->lock_presence = detail::field_or<bool>(body, "lock_presence", d->lock_presence, where);
      if (auto diags = validate_project(st.doc.project); has_errors(diags)) throw ValidationError(diags);
    });
    const auto snap = snapshot(id);
    respond_json(res, 200, {{"revision", s.revision},
                            {"description", description_to_json(description(*snap, did))},
                            {"candidates", candidates_json(require_valid(*snap), description(*snap, did))}});
  }

  void upload_recording(const Req& req, Res& res, const std::string& id, const std::string& did) {
    if (!req.has_file("audio") || !req.has_file("alignment"))
      throw Error("validation", "recording upload needs 'audio' and 'alignment' parts");
    const auto bytes = req.get_file_value("audio").content;
    const auto clip = parse_wav(bytes, "audio");
    auto align = nlohmann::json::parse(req.get_file_value("alignment").content);
    if (align.is_array()) align = {{"alignment", align}};
    std::optional<std::int64_t> base;
    if (req.has_file("base_revision")) base = std::stoll(req.get_file_value("base_revision").content);
    else base = base_revision(req, nlohmann::json::object());
    std::string rel;
    const auto s = store_.update(id, base, [&](ProjectState& st) {
      auto* d = st.doc.project.find_description(did);
      if (!d) throw Error("not_found", "no description '" + did + "'");
      rel = "audio/" + did + "-r" + std::to_string(st.revision + 1) + ".wav";
      align["path"] = rel;
      align["duration"] = clip.seconds();
      d->recording = recording_from_json(align, "alignment");
      st.selections.erase(did);
      if (auto diags = validate_project(st.doc.project); has_errors(diags)) throw ValidationError(diags);
      store_.put_file(id, rel, bytes);
    });
    respond_json(res, 200, {{"revision", s.revision}, {"recording", recording_to_json(*s.doc.project.find_description(did)->recording)}});
  }

  void render_endpoint(const Req& req, Res& res, const std::string& id) {
    const auto snap = snapshot(id);
    const auto& s = require_valid(*snap);
    PipelineOptions opt;
    opt.config = s.config;
    if (req.has_param("mode")) opt.config.mode = parse_render_mode(req.get_param_value("mode"));
    if (req.has_param("seed")) opt.seed = std::stoull(req.get_param_value("seed"));
    const bool keep = req.get_param_value("keep_plan") == "true";
    std::optional<CompositionPlan> fixed;
    if (keep) {
      fixed = edited_plan(s);
      if (fixed->mode != opt.config.mode)
        throw Error("validation", "stored plan is for " + std::string(to_string(fixed->mode)) + ", not " +
                                      std::string(to_string(opt.config.mode)));
    }
    const auto r = run_pipeline(s.state.doc, res_, opt, fixed ? &*fixed : nullptr);
    const auto rel = "renders/r" + std::to_string(s.state.revision) + "-" + std::string(to_string(opt.config.mode)) +
                     "-" + std::to_string(opt.seed) + (keep ? "-kept" : "");
    write_artifacts((std::filesystem::path(store_.dir(id)) / rel).string(), r);
    // Keep the new plan unless the project moved on meanwhile.
    std::int64_t revision = s.state.revision;
    if (!keep) {
      try {
        revision = store_.update(id, s.state.revision, [&](ProjectState& st) {
                     st.plan = plan_to_json(r.plan);
                     st.selections.clear();
                   }).revision;
      } catch (const Error& e) {
        if (e.code() != "conflict") throw;
      }
    }
    respond_json(res, 200, {{"revision", revision},
                            {"rendered_revision", s.state.revision},
                            {"plan", plan_document(r)},
                            {"manifest", manifest_to_json(r.rendered.manifest)},
                            {"audio_url", audio_url(id, rel + "/output.wav")},
                            {"report", r.report}});
  }

  void optimize_endpoint(const Req& req, Res& res, const std::string& id) {
    const auto body = body_json(req);
    const auto snap = snapshot(id);
    const auto& s = require_valid(*snap);
    auto cfg = s.config;
    if (body.contains("mode")) cfg.mode = parse_render_mode(body.at("mode").get<std::string>());
    const auto a = analyze(s.state.doc, res_, cfg, &s.source);
    const auto plan = optimize(s.state.doc.project, a.gaps, a.table, cfg);
    auto base = base_revision(req, body);
    const auto st = store_.update(id, base ? base : std::optional<std::int64_t>(s.state.revision), [&](ProjectState& x) {
      x.plan = plan_to_json(plan);
      x.selections.clear();
    });
    respond_json(res, 200, {{"revision", st.revision}, {"plan", st.plan}});
  }

  // Applies a new word choice for one description: rescoring that candidate
  // only and re-rendering only its gap.
  void choose(const Req& req, Res& res, const std::string& id, const std::string& did,
              const std::function<std::vector<int>(const Snapshot&, const DraftDescription&)>& pick) {
    const auto body = body_json(req);
    const auto snap = snapshot(id);
    const auto& s = require_valid(*snap);
    const auto& d = description(s, did);
    if (d.lock_text) throw Error("text_locked", "description '" + did + "' has locked text");
    const auto kept = pick(s, d);
    const auto c = make_candidate(d, kept);
    const auto cost = s.scorer->cost(c, s.config);
    auto base = base_revision(req, body);
    const auto st = store_.update(id, base ? base : std::optional<std::int64_t>(s.state.revision),
                                  [&](ProjectState& x) { x.selections[did] = kept; });
    const Millis start = planned_start(s.state, d);
    bool fits = false;
    for (const auto& g : s.gaps)
      if (g.start <= start && start < g.end) fits = start + c.duration <= g.end;
    const auto snippet = render_snippet(s, d, kept, start);
    respond_json(res, 200, {{"revision", st.revision},
                            {"candidate", candidate_json(c)},
                            {"cost", cost_to_json(cost)},
                            {"start", to_seconds(start)},
                            {"fits", fits},
                            {"snippet_url", audio_url(id, snippet)}});
  }

  void routes() {
    const std::string P = R"(/projects/([^/]+))";
    const std::string D = P + R"(/descriptions/([^/]+))";

    server_.Post("/projects", guarded([this](const Req& req, Res& res) { create(req, res); }));
    server_.Get("/projects", guarded([this](const Req&, Res& res) {
                  nlohmann::json out = nlohmann::json::array();
                  for (const auto& [id, rev] : store_.list()) out.push_back({{"id", id}, {"revision", rev}});
                  respond_json(res, 200, out);
                }));
    server_.Get(P, guarded([this](const Req& req, Res& res) { respond_json(res, 200, state_json(*snapshot(req.matches[1]))); }));
    server_.Get(P + "/export", guarded([this](const Req& req, Res& res) {
                  respond_json(res, 200, export_project(store_, store_.get(req.matches[1])));
                }));
    server_.Get(D + "/candidates", guarded([this](const Req& req, Res& res) {
                  const auto snap = snapshot(req.matches[1]);
                  const auto& d = description(*snap, req.matches[2]);
                  respond_json(res, 200, {{"revision", snap->state.revision}, {"candidates", candidates_json(require_valid(*snap), d)}});
                }));
    server_.Put(D, guarded([this](const Req& req, Res& res) { edit_description(req, res, req.matches[1], req.matches[2]); }));
    server_.Post(D + "/recording",
                 guarded([this](const Req& req, Res& res) { upload_recording(req, res, req.matches[1], req.matches[2]); }));
    server_.Post(P + "/render", guarded([this](const Req& req, Res& res) { render_endpoint(req, res, req.matches[1]); }));
    server_.Post(P + "/optimize", guarded([this](const Req& req, Res& res) { optimize_endpoint(req, res, req.matches[1]); }));

    server_.Post(D + "/toggle-word", guarded([this](const Req& req, Res& res) {
                   const auto body = body_json(req);
                   if (!body.contains("word_index")) throw Error("validation", "toggle-word needs 'word_index'");
                   const int w = body.at("word_index").get<int>();
                   choose(req, res, req.matches[1], req.matches[2], [&](const Snapshot& s, const DraftDescription& d) {
                     if (w < 0 || w >= static_cast<int>(d.words.size()))
                       throw Error("validation", "word_index " + std::to_string(w) + " out of range");
                     const auto ps = s.scorer->protected_phrases(d);
                     for (const auto* group : {&ps.film_phrases, &ps.video_phrases, &ps.quoted_spans, &ps.onscreen_spans})
                       for (const auto& p : *group)
                         if (p.span.contains(w))
                           throw ValidationError({{Diagnostic::Severity::kError, "protected_phrase",
                                                   d.id + ".words[" + std::to_string(w) + "]",
                                                   "'" + d.words[w].text + "' is part of the protected phrase '" +
                                                       p.phrase + "'"}},
                                                 "protected_phrase");
                     auto kept = chosen(s.state, d);
                     if (auto it = std::find(kept.begin(), kept.end(), w); it != kept.end()) kept.erase(it);
                     else kept.insert(std::upper_bound(kept.begin(), kept.end(), w), w);
                     if (kept.empty()) throw Error("validation", "cannot drop every word");
                     return kept;
                   });
                 }));
    server_.Post(D + "/select-candidate", guarded([this](const Req& req, Res& res) {
                   const auto body = body_json(req);
                   if (!body.contains("index")) throw Error("validation", "select-candidate needs 'index'");
                   const auto i = body.at("index").get<long long>();
                   choose(req, res, req.matches[1], req.matches[2], [&](const Snapshot& s, const DraftDescription& d) {
                     const auto ordered = slider_order(s.scorer->candidates(d, s.config.candidate_cap).candidates);
                     if (i < 0 || i >= static_cast<long long>(ordered.size()))
                       throw Error("validation", "candidate index " + std::to_string(i) + " out of range (0-" +
                                                     std::to_string(ordered.size() - 1) + ")");
                     return ordered[static_cast<std::size_t>(i)].kept_indices;
                   });
                 }));
    server_.Get(P + "/audio/(.+)", guarded([this](const Req& req, Res& res) {
                  const std::string rel = req.matches[2];
                  if (!rel.starts_with("audio/") && !rel.starts_with("renders/")) throw Error("not_found", "no file '" + rel + "'");
                  res.set_content(read_file(store_.file(req.matches[1], rel)), rel.ends_with(".wav") ? "audio/wav" : "application/octet-stream");
                }));
  }

  ProjectStore& store_;
  const Resources& res_;
  httplib::Server server_;
  std::mutex cache_mutex_;
  std::map<std::string, std::shared_ptr<Snapshot>> cache_;
};

}  // namespace adfit

#endif  // ADFIT_SERVICE_HPP
