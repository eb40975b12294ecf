// adfit: shorten and place audio descriptions, render the result, or serve
// projects over HTTP.
//
//   adfit render project.json --mode extended-inline --seed 7 --out-dir out
//   adfit validate project.json
//   adfit candidates project.json --id bench
//   adfit replay out/manifest.json project.json --out replay.wav
//   adfit demo demo/
//   ADFIT_STORE=/var/adfit adfit serve --port 8080
//
// Exit status: 0 ok, 1 other failure, 2 invalid input, 3 a presence-locked
// description cannot be placed.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <optional>

#include "adfit/pipeline.hpp"
#include "adfit/service.hpp"
#include "adfit/synthetic.hpp"

using namespace adfit;

namespace {

struct Overrides {
  std::string mode;
  std::optional<double> grid, window, skip_cost;
  std::string glossary, freq_table;
};

void add_config_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--mode", o.mode, "inline | extended | extended-inline")
      ->check(CLI::IsMember({"inline", "extended", "extended-inline"}));
  cmd->add_option("--grid", o.grid, "placement time grid, seconds")->check(CLI::PositiveNumber);
  cmd->add_option("--window", o.window, "placement window around each anchor, seconds")->check(CLI::PositiveNumber);
  cmd->add_option("--skip-cost", o.skip_cost, "cost of leaving a description out")->check(CLI::NonNegativeNumber);
  cmd->add_option("--glossary", o.glossary, "film-language glossary file")->check(CLI::ExistingFile);
  cmd->add_option("--freq-table", o.freq_table, "corpus frequency table (word<TAB>log p)")->check(CLI::ExistingFile);
}

OptimizerConfig config_for(const ProjectDocument& doc, const Overrides& o) {
  nlohmann::json j = nlohmann::json::object();
  if (!o.mode.empty()) j["mode"] = o.mode;
  if (o.grid) j["time_grid"] = *o.grid;
  if (o.window) j["placement_window"] = *o.window;
  if (o.skip_cost) j["skip_cost"] = *o.skip_cost;
  return apply_config(project_config(doc), j);
}

void print_diagnostics(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) std::cerr << to_string(d) << "\n";
}

int run_render(const std::string& path, const Overrides& o, std::uint64_t seed, const std::string& out_dir) {
  const auto doc = load_document(path);
  const auto res = Resources::load(o.glossary, o.freq_table);
  PipelineOptions opt;
  opt.config = config_for(doc, o);
  opt.seed = seed;
  const auto r = run_pipeline(doc, res, opt);
  const auto paths = write_artifacts(out_dir, r);
  std::cout << r.report;
  std::cout << "wrote " << paths.plan << ", " << paths.manifest << ", " << paths.audio << ", " << paths.report << "\n";
  return 0;
}

int run_validate(const std::string& path) {
  const auto doc = load_document(path);
  const auto diags = validate_project(doc.project);
  print_diagnostics(diags);
  if (has_errors(diags)) return 2;
  std::cout << path << ": ok (" << doc.project.descriptions.size() << " descriptions)\n";
  return 0;
}

int run_candidates(const std::string& path, const Overrides& o, const std::string& id) {
  const auto doc = load_document(path);
  if (auto diags = validate_project(doc.project); has_errors(diags)) throw ValidationError(diags);
  const auto res = Resources::load(o.glossary, o.freq_table);
  const auto cfg = config_for(doc, o);
  const ProjectScorer scorer(doc.project, res, doc.coherence_overrides);
  bool any = false;
  for (const auto& d : doc.project.descriptions) {
    if (!id.empty() && d.id != id) continue;
    any = true;
    const auto set = scorer.candidates(d, cfg.candidate_cap);
    std::cout << d.id << ": " << set.candidates.size() << " candidates\n";
    for (const auto& c : slider_order(set.candidates)) {
      const auto k = scorer.cost(c, cfg);
      std::cout << "  " << std::fixed << std::setprecision(2) << to_seconds(c.duration) << " s  E=" << k.weighted_total
                << " (coh " << k.coherence << ", info " << k.informativeness << ", edit " << k.edit << ")  "
                << c.text << "\n";
    }
  }
  if (!any) throw Error("validation", "no description '" + id + "'");
  return 0;
}

int run_replay(const std::string& manifest_path, const std::string& project_path, const std::string& out) {
  const auto doc = load_document(project_path);
  auto m = manifest_from_json(nlohmann::json::parse(read_file(manifest_path)));
  std::vector<Diagnostic> diags;
  auto source = load_source(doc, diags);
  const auto recordings = load_recordings(doc, source.sample_rate, diags);
  print_diagnostics(diags);
  const auto audio = replay(m, doc.project, source, default_narration(recordings, source.sample_rate, source.channels));
  write_file_atomic(out, encode_wav(audio));
  std::cout << "wrote " << out << " (" << audio.frames() << " frames)\n";
  return 0;
}

Service* g_service = nullptr;

int run_serve(const std::string& root, const std::string& host, int port) {
  if (root.empty()) throw Error("validation", "no store: set ADFIT_STORE or pass --store");
  std::filesystem::create_directories(root);
  ProjectStore store(root);
  const auto res = Resources::load();
  Service service(store, res);
  const int bound = service.bind(host, port);
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  std::cout << "serving " << root << " on http://" << host << ":" << bound << std::endl;
  service.listen();
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fit audio descriptions into a video's soundtrack"};
  app.require_subcommand(1);

  Overrides o;
  std::string project, out_dir = "out", id, manifest, out = "replay.wav", dir;
  std::uint64_t seed = 0;

  auto* render = app.add_subcommand("render", "optimize placements and render the mix");
  render->add_option("project", project, "project file")->required()->check(CLI::ExistingFile);
  add_config_flags(render, o);
  render->add_option("--seed", seed, "seed for ambience re-synthesis");
  render->add_option("--out-dir", out_dir, "artifact directory")->capture_default_str();

  auto* validate = app.add_subcommand("validate", "check a project file");
  validate->add_option("project", project, "project file")->required()->check(CLI::ExistingFile);

  auto* candidates = app.add_subcommand("candidates", "list shortened candidates with their costs");
  candidates->add_option("project", project, "project file")->required()->check(CLI::ExistingFile);
  candidates->add_option("--id", id, "only this description");
  add_config_flags(candidates, o);

  auto* rep = app.add_subcommand("replay", "re-render audio from a saved manifest");
  rep->add_option("manifest", manifest, "manifest.json")->required()->check(CLI::ExistingFile);
  rep->add_option("project", project, "project file")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", out, "output WAV")->capture_default_str();

  std::string store = ProjectStore::root_from_env(), host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  serve->add_option("--store", store, "store root (default: $ADFIT_STORE)");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "0 picks a free port")->capture_default_str();

  auto* demo = app.add_subcommand("demo", "write a synthetic one-minute project");
  demo->add_option("dir", dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*render) return run_render(project, o, seed, out_dir);
    if (*validate) return run_validate(project);
    if (*candidates) return run_candidates(project, o, id);
    if (*rep) return run_replay(manifest, project, out);
    if (*serve) return run_serve(store, host, port);
    if (*demo) {
      std::cout << write_demo_project(dir) << "\n";
      return 0;
    }
  } catch (const ValidationError& e) {
    print_diagnostics(e.diagnostics());
    std::cerr << "adfit: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "adfit: " << e.what() << "\n";
    if (e.code() == "infeasible") return 3;
    if (e.code() == "validation" || e.code() == "usage") return 2;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "adfit: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
