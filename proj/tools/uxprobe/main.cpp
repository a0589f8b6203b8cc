// uxprobe: explore a website with a vision-language model and report usability bugs.

#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"
#include "uxprobe/harness/fixtures.hpp"
#include "uxprobe/harness/pipeline.hpp"
#include "uxprobe/prompt/bug_database.hpp"

#ifndef UXPROBE_DEFAULT_FIXTURES
#define UXPROBE_DEFAULT_FIXTURES "fixtures"
#endif

namespace fs = std::filesystem;
using namespace uxprobe;
using namespace uxprobe::harness;

namespace {

struct Globals {
  std::string config_file;
  std::vector<std::string> sets;
};

Config load_config(const Globals& g, std::vector<std::string> extra) {
  ConfigInputs inputs;
  if (!g.config_file.empty()) inputs.file = g.config_file;
  inputs.overrides = g.sets;
  inputs.overrides.insert(inputs.overrides.end(), extra.begin(), extra.end());
  return resolve_config(inputs);
}

void wait_for_signal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  int sig = 0;
  sigwait(&set, &sig);
}

// Blocks the stop signals before any server thread exists so sigwait sees them.
void block_stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

int cmd_probe(const Globals& g, const std::string& url, const std::vector<std::string>& extra) {
  Config config = load_config(g, extra);
  auto provider = BrowserProvider::create(config);
  agent::TrajectoryStore store(config.get_path("paths.runs"));
  ProbeResult result = run_probe(config, url, provider->endpoint(), store, std::cerr);
  if (!result.run_dir.empty()) std::cout << result.run_dir.string() << '\n';
  if (!result.ok()) std::cerr << "uxprobe: " << result.error << '\n';
  return result.exit_code;
}

int cmd_batch(const Globals& g, const std::string& manifest_path, const std::string& corpus, bool serve,
              const std::vector<std::string>& extra) {
  Config config = load_config(g, extra);
  std::unique_ptr<FixtureServer> fixtures;
  if (serve) fixtures = FixtureServer::start(corpus);
  auto manifest = BatchManifest::load(manifest_path, fixtures ? fixtures->base_url() : "");
  auto provider = BrowserProvider::create(config);
  BatchResult result = run_batch(config, manifest, provider->endpoint(), std::cerr);
  std::cout << format_batch_summary(result);
  return result.exit_code;
}

int cmd_refine(const Globals& g, const std::string& site_class, int k) {
  Config config = load_config(g, {});
  auto refined = run_refine(config, site_class, k, std::cerr);
  std::cout << (prompts_dir(config) / site_class / ("gen" + std::to_string(refined.generation) + ".txt")).string()
            << '\n';
  return kExitOk;
}

int cmd_metrics(const std::string& runs_dir, const std::string& truth_file, bool as_json) {
  auto truth = GroundTruth::load(truth_file);
  auto runs = load_runs(runs_dir);
  Evaluation ev = evaluate(runs, truth);
  if (as_json) {
    const Metrics& m = ev.metrics;
    auto ratio = [](const std::optional<Ratio>& r) {
      return r ? nlohmann::json{{"numerator", r->numerator}, {"denominator", r->denominator},
                                {"percent", r->percent(1)}}
               : nlohmann::json(nullptr);
    };
    nlohmann::json doc = {{"reported_count", m.reported_count}, {"verified_count", m.verified_count},
                          {"detected_count", m.detected_count}, {"ground_truth_count", m.ground_truth_count},
                          {"false_positive_rate", ratio(m.false_positive_rate)}, {"coverage", ratio(m.coverage)},
                          {"unverified", ev.unverified}};
    std::cout << doc.dump(2) << '\n';
  } else {
    std::cout << "runs evaluated:      " << runs.size() << '\n' << format_metrics(ev);
  }
  return kExitOk;
}

int cmd_verify(const Globals& g, const std::string& run_id, const std::vector<std::string>& marks,
               const std::string& all) {
  Config config = load_config(g, {});
  agent::TrajectoryStore store(config.get_path("paths.runs"));
  fs::path dir = store.run_dir(run_id);
  fs::path report_file = dir / "report.v1.json";
  if (!fs::exists(report_file)) throw Error(ErrorCode::kUnknownRun, "no report for run '" + run_id + "'");
  auto report = report::parse_structured(read_text_file(report_file));
  auto verdicts = load_verdicts(dir, report.findings.size());

  auto parse_verdict = [](std::string text) -> bool {
    bool value = false;
    if (text == "real") return true;
    if (text == "fp" || text == "false-positive") return false;
    if (!parse_bool(text, value)) throw Error(ErrorCode::kConfigError, "verdict must be yes or no, got '" + text + "'");
    return value;
  };
  if (!all.empty()) {
    bool v = parse_verdict(all);
    for (auto& verdict : verdicts) verdict = v;
  }
  for (const auto& mark : marks) {
    auto eq = mark.find('=');
    std::size_t n = 0;
    try {
      n = std::stoul(mark.substr(0, eq));
    } catch (...) {
      n = 0;
    }
    if (eq == std::string::npos || n < 1 || n > verdicts.size()) {
      throw Error(ErrorCode::kConfigError, "--mark expects N=yes|no with N in 1.." + std::to_string(verdicts.size()));
    }
    verdicts[n - 1] = parse_verdict(mark.substr(eq + 1));
  }
  if (all.empty() && marks.empty()) {
    for (std::size_t i = 0; i < report.findings.size(); ++i) {
      const auto& f = report.findings[i];
      std::cout << "Finding " << i + 1 << " (step " << f.step_number << ", " << report::to_string(f.nature) << ", "
                << report::to_string(f.severity) << "): " << f.description << "\n  expected: " << f.expected_behavior
                << "\n  actual:   " << f.actual_behavior << "\nReal defect? [y/n/s=skip] " << std::flush;
      std::string answer;
      if (!std::getline(std::cin, answer)) break;
      if (answer == "y" || answer == "yes") verdicts[i] = true;
      if (answer == "n" || answer == "no") verdicts[i] = false;
    }
  }
  save_verdicts(dir, verdicts);
  std::size_t real = 0, rejected = 0, open = 0;
  for (const auto& v : verdicts) (v ? (*v ? real : rejected) : open)++;
  std::cout << run_id << ": " << real << " real, " << rejected << " false positive, " << open << " unverified\n";
  return kExitOk;
}

int cmd_serve(const std::string& corpus, int port) {
  block_stop_signals();
  auto server = FixtureServer::start(corpus, port);
  std::cout << "serving " << corpus << " at " << server->base_url() << '\n';
  for (const auto& site : server->manifest().sites) {
    std::cout << "  " << site.name << ": " << server->url(site.root) << '\n';
  }
  std::cout << std::flush;
  wait_for_signal();
  server->stop();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explores a website with a vision-language model and writes a usability bug report."};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "key = value settings file (default: $UXPROBE_CONFIG)");
  app.add_option("--set", g.sets, "override a setting, key=value (repeatable)");

  std::string url, site_class, backend, report_backend, out_dir, browser_endpoint, chrome;
  int max_steps = 0;
  bool no_annotate = false;
  auto* probe = app.add_subcommand("probe", "explore one URL and write its run directory");
  probe->add_option("url", url, "target URL")->required();
  probe->add_option("--class", site_class, "website class of the testing prompt");
  probe->add_option("--max-steps", max_steps, "step limit")->check(CLI::PositiveNumber);
  probe->add_option("--backend", backend, "exploration backend: live, live:<model> or scripted:<file>");
  probe->add_option("--report-backend", report_backend, "report backend (default: same as --backend)");
  probe->add_option("--out", out_dir, "runs directory");
  probe->add_option("--browser", browser_endpoint, "debugger endpoint, or \"sim\"");
  probe->add_option("--chrome", chrome, "launch this Chromium binary");
  probe->add_flag("--no-annotate", no_annotate, "send screenshots without index badges");

  std::string manifest_path, corpus = UXPROBE_DEFAULT_FIXTURES;
  int parallel = 0;
  bool serve_fixtures = false;
  auto* batch = app.add_subcommand("batch", "probe every target of a manifest");
  batch->add_option("manifest", manifest_path, "batch manifest (JSON)")->required()->check(CLI::ExistingFile);
  batch->add_option("--out", out_dir, "runs directory");
  batch->add_option("--parallel", parallel, "concurrent sessions")->check(CLI::PositiveNumber);
  batch->add_option("--browser", browser_endpoint, "debugger endpoint, or \"sim\"");
  batch->add_option("--chrome", chrome, "launch this Chromium binary");
  batch->add_flag("--serve-fixtures", serve_fixtures, "serve the fixture corpus and substitute ${FIXTURES}");
  batch->add_option("--corpus", corpus, "fixture corpus directory");

  int k = 10;
  auto* refine = app.add_subcommand("refine", "derive the next prompt generation from recorded bugs");
  refine->add_option("class", site_class, "website class")->required();
  refine->add_option("-k", k, "representative bugs to use")->check(CLI::PositiveNumber);

  std::string runs_dir, truth_file;
  bool as_json = false;
  auto* metrics = app.add_subcommand("metrics", "false-positive rate and coverage against seeded bugs");
  metrics->add_option("runs-dir", runs_dir, "runs directory")->required()->check(CLI::ExistingDirectory);
  metrics->add_option("--truth", truth_file, "ground truth file")->required()->check(CLI::ExistingFile);
  metrics->add_flag("--json", as_json, "machine-readable output");

  std::string run_id, all;
  std::vector<std::string> marks;
  auto* verify = app.add_subcommand("verify", "record whether each finding of a run is a real defect");
  verify->add_option("run-id", run_id, "run id")->required();
  verify->add_option("--runs-dir", runs_dir, "runs directory");
  verify->add_option("--mark", marks, "N=yes|no for finding N (repeatable)");
  verify->add_option("--all", all, "yes|no for every finding");

  int port = 8000;
  auto* serve = app.add_subcommand("serve-fixtures", "serve the seeded-bug fixture corpus");
  serve->add_option("--port", port, "port (0 picks one)")->check(CLI::Range(0, 65535));
  serve->add_option("--corpus", corpus, "fixture corpus directory");

  auto* bugs = app.add_subcommand("bugs", "manage the bug database");
  bugs->require_subcommand(1);
  std::string category, description, source_url, prompt_id, bug_id;
  bool reproducible = false, not_reproducible = false;
  auto* bugs_add = bugs->add_subcommand("add", "record a verified bug");
  bugs_add->add_option("--category", category,
                       "broken-element, interaction-failure, ui-ux-flaw, content-inconsistency or domain-specific")
      ->required();
  bugs_add->add_option("--description", description, "what goes wrong")->required();
  bugs_add->add_option("--class", site_class, "website class")->required();
  bugs_add->add_option("--url", source_url, "page where it was seen");
  bugs_add->add_option("--prompt", prompt_id, "prompt id that surfaced it");
  bugs_add->add_flag("--reproducible", reproducible, "already confirmed reproducible");
  auto* bugs_list = bugs->add_subcommand("list", "list recorded bugs");
  bugs_list->add_option("--class", site_class, "only this class");
  auto* bugs_repro = bugs->add_subcommand("set-reproducible", "mark a bug (not) reproducible");
  bugs_repro->add_option("id", bug_id, "bug id")->required();
  bugs_repro->add_flag("--no", not_reproducible, "mark as not reproducible");

  app.add_subcommand("config", "print the resolved settings and where each came from");

  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<std::string> extra;
    if (!site_class.empty() && (probe->parsed())) extra.push_back("prompt.class=" + site_class);
    if (max_steps > 0) extra.push_back("episode.max_steps=" + std::to_string(max_steps));
    if (!backend.empty()) extra.push_back("backend.explore=" + backend);
    if (!report_backend.empty()) extra.push_back("backend.report=" + report_backend);
    if (!out_dir.empty()) extra.push_back("paths.runs=" + out_dir);
    if (!browser_endpoint.empty()) extra.push_back("browser.endpoint=" + browser_endpoint);
    if (!chrome.empty()) extra.push_back("browser.executable=" + chrome);
    if (no_annotate) extra.push_back("episode.annotate=false");
    if (parallel > 0) extra.push_back("batch.parallelism=" + std::to_string(parallel));
    if (!runs_dir.empty() && verify->parsed()) extra.push_back("paths.runs=" + runs_dir);

    if (probe->parsed()) return cmd_probe(g, url, extra);
    if (batch->parsed()) return cmd_batch(g, manifest_path, corpus, serve_fixtures, extra);
    if (refine->parsed()) return cmd_refine(g, site_class, k);
    if (metrics->parsed()) return cmd_metrics(runs_dir, truth_file, as_json);
    if (verify->parsed()) {
      g.sets.insert(g.sets.end(), extra.begin(), extra.end());
      return cmd_verify(g, run_id, marks, all);
    }
    if (serve->parsed()) return cmd_serve(corpus, port);
    if (bugs->parsed()) {
      Config config = load_config(g, {});
      auto db = prompt::BugDatabase::open(config.get_path("paths.bug_db"));
      if (bugs_add->parsed()) {
        auto parsed = prompt::parse_bug_category(category);
        if (!parsed) throw Error(ErrorCode::kConfigError, "unknown category '" + category + "'");
        prompt::BugRecord record;
        record.category = *parsed;
        record.description = description;
        record.site_class = site_class;
        record.reproducible = reproducible;
        if (!source_url.empty()) record.source_url = source_url;
        if (!prompt_id.empty()) record.discovered_by_prompt = prompt_id;
        std::cout << db.record(std::move(record)) << '\n';
      } else if (bugs_list->parsed()) {
        for (const auto& r : db.records()) {
          if (!site_class.empty() && r.site_class != site_class) continue;
          std::cout << r.id << "  " << prompt::to_string(r.category) << "  " << r.site_class << "  "
                    << (r.reproducible ? "reproducible" : "unconfirmed") << "  " << r.description;
          if (r.source_url) std::cout << "  <" << *r.source_url << '>';
          std::cout << '\n';
        }
      } else if (bugs_repro->parsed()) {
        db.set_reproducible(bug_id, !not_reproducible);
      }
      return kExitOk;
    }
    std::cout << load_config(g, {}).describe();
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "uxprobe: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "uxprobe: " << e.what() << '\n';
    return kExitFatal;
  }
}
