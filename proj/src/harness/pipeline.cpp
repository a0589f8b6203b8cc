#include "uxprobe/harness/pipeline.hpp"

#include <atomic>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "uxprobe/browser/overlay.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"
#include "uxprobe/common/url.hpp"
#include "uxprobe/prompt/refine.hpp"
#include "uxprobe/prompt/testing_prompt.hpp"

namespace uxprobe::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void manifest_error(const std::string& message) {
  throw Error(ErrorCode::kManifestParseError, message);
}

vlm::CompletionParams completion_params(const Config& config) {
  vlm::CompletionParams params;
  params.temperature = config.get_number("live.temperature");
  return params;
}

std::string backend_spec(const Config& config, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    std::string spec = config.get_backend(key);
    if (!spec.empty()) return spec;
  }
  return {};
}

void log_step(std::ostream& log, const std::string& run_id, const agent::TrajectoryStep& step) {
  log << "[" << run_id << "] step " << step.step_number << ": "
      << (step.action ? vlm::describe(*step.action) : std::string("no action")) << " -> "
      << browser::to_string(step.outcome.status);
  if (!step.outcome.resulting_url.empty()) log << " " << step.outcome.resulting_url;
  log << '\n';
}

}  // namespace

int exit_code_for(const Error& error) {
  switch (error.code()) {
    case ErrorCode::kConfigError:
    case ErrorCode::kManifestParseError:
    case ErrorCode::kUnknownClass:
    case ErrorCode::kUnknownGeneration:
    case ErrorCode::kCorpusInvalid:
    case ErrorCode::kPortInUse:
      return kExitConfig;
    default: return kExitFatal;
  }
}

std::unique_ptr<BrowserProvider> BrowserProvider::create(const Config& config) {
  std::unique_ptr<BrowserProvider> provider(new BrowserProvider());
  fs::path executable = config.get_path("browser.executable");
  if (!executable.empty()) {
    provider->process_ = browser::BrowserProcess::launch(executable);
    provider->endpoint_ = provider->process_->endpoint();
  } else if (config.get("browser.endpoint") == "sim") {
    provider->sim_ = sim::SimBrowser::start();
    provider->endpoint_ = provider->sim_->endpoint();
  } else {
    provider->endpoint_ = config.get("browser.endpoint");
  }
  return provider;
}

BrowserProvider::~BrowserProvider() {
  if (sim_) sim_->stop();
  if (process_) process_->terminate();
}

std::unique_ptr<vlm::Backend> make_backend(const std::string& spec, const Config& config) {
  if (spec.empty()) {
    throw Error(ErrorCode::kConfigError, "no model backend configured (set backend.explore, e.g. --backend live)");
  }
  if (spec.starts_with("scripted:")) {
    fs::path path = spec.substr(9);
    vlm::ReplyScript script;
    try {
      script = vlm::ReplyScript::load(path);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError, "reply script " + path.string() + ": " + e.what());
    }
    return std::make_unique<vlm::ScriptedBackend>(std::move(script), "scripted:" + path.filename().string());
  }
  vlm::LiveBackendConfig live;
  live.base_url = config.get("live.base_url");
  live.model = spec.starts_with("live:") ? spec.substr(5) : config.get("live.model");
  live.id = "live:" + live.model;
  std::string key_env = config.get("live.api_key_env");
  const char* key = std::getenv(key_env.c_str());
  if (!key || !*key) {
    throw Error(ErrorCode::kConfigError, "backend unavailable: environment variable " + key_env + " is not set");
  }
  live.api_key = key;
  live.max_retries = static_cast<int>(config.get_int("live.max_retries"));
  live.requests_per_minute = static_cast<int>(config.get_int("live.requests_per_minute"));
  live.request_timeout = std::chrono::milliseconds(config.get_int("live.timeout_ms"));
  live.max_images = static_cast<int>(config.get_int("live.max_images"));
  return std::make_unique<vlm::LiveBackend>(std::move(live));
}

browser::SessionConfig session_config(const Config& config, const std::string& endpoint) {
  browser::SessionConfig s;
  s.browser_endpoint = endpoint;
  s.viewport_width = static_cast<int>(config.get_int("browser.viewport_width"));
  s.viewport_height = static_cast<int>(config.get_int("browser.viewport_height"));
  s.navigation_timeout = std::chrono::milliseconds(config.get_int("browser.navigation_timeout_ms"));
  s.action_settle_delay = std::chrono::milliseconds(config.get_int("browser.settle_ms"));
  return s;
}

agent::EpisodeConfig episode_config(const Config& config) {
  agent::EpisodeConfig e;
  e.max_steps = static_cast<int>(config.get_int("episode.max_steps"));
  e.annotate_screenshots = config.get_bool("episode.annotate");
  e.reprompt_limit_per_step = static_cast<int>(config.get_int("episode.reprompt_limit"));
  e.history_screenshots = static_cast<int>(config.get_int("episode.history_screenshots"));
  e.explore_backend = config.get_backend("backend.explore");
  e.report_backend = backend_spec(config, {"backend.report", "backend.explore"});
  return e;
}

fs::path prompts_dir(const Config& config) {
  fs::path dir = config.get_path("paths.prompts");
  return dir.empty() ? config.get_path("paths.assets") / "prompts" : dir;
}

std::string run_slug(std::string_view url) {
  auto parsed = Url::parse(url);
  std::string source = parsed ? parsed->host + "/" + parsed->path : std::string(url);
  std::string slug;
  for (char c : source) {
    bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_';
    if (keep) {
      slug += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!slug.empty() && slug.back() != '-') {
      slug += '-';
    }
  }
  while (!slug.empty() && (slug.back() == '-' || slug.back() == '.')) slug.pop_back();
  while (!slug.empty() && (slug.front() == '-' || slug.front() == '.')) slug.erase(slug.begin());
  if (slug.size() > 64) slug.resize(64);
  return slug.empty() ? "run" : slug;
}

ProbeResult run_probe(const Config& config, const std::string& url, const std::string& endpoint,
                      agent::TrajectoryStore& store, std::ostream& log) {
  ProbeResult result;
  result.url = url;
  if (!is_well_formed_http_url(url)) throw Error(ErrorCode::kConfigError, "'" + url + "' is not an http(s) URL");

  auto templates = prompt::TemplateStore::load(prompts_dir(config));
  std::string site_class = config.get("prompt.class");
  long generation = config.get_int("prompt.generation");
  const prompt::TestingPrompt& testing_prompt =
      generation < 0 ? templates.latest(site_class) : templates.get(site_class, static_cast<int>(generation));

  agent::EpisodeConfig episode = episode_config(config);
  episode.validate();
  std::unique_ptr<vlm::Backend> explore = make_backend(episode.explore_backend, config);
  std::unique_ptr<vlm::Backend> report_owned;
  vlm::Backend* report_backend = explore.get();
  if (episode.report_backend != episode.explore_backend) {
    report_owned = make_backend(episode.report_backend, config);
    report_backend = report_owned.get();
  }
  auto assets = report::ReportAssets::load(config.get_path("paths.assets") / "report");
  std::optional<browser::Overlay> overlay;
  if (episode.annotate_screenshots && !config.get_path("overlay.script").empty()) {
    overlay = browser::Overlay::load(config.get_path("overlay.script"));
  }
  browser::SessionConfig session_cfg = session_config(config, endpoint);
  session_cfg.validate();

  result.run_id = store.allocate_run_id(run_slug(url));
  result.run_dir = store.run_dir(result.run_id);
  log << "[" << result.run_id << "] probing " << url << " with " << testing_prompt.id() << '\n';

  std::optional<browser::BrowserSession> session;
  try {
    session = browser::BrowserSession::open(session_cfg);
  } catch (const Error& e) {
    result.error = "browser unavailable at " + endpoint + ": " + e.what();
    result.exit_code = kExitFatal;
    return result;
  }

  agent::EpisodeOptions options;
  options.store = &store;
  options.overlay = overlay ? &*overlay : nullptr;
  options.completion = completion_params(config);
  options.on_step = [&](const agent::TrajectoryStep& step) { log_step(log, result.run_id, step); };
  agent::EpisodeRequest request{result.run_id, url, testing_prompt.id(), prompt::render(testing_prompt, url)};

  agent::Trajectory trajectory;
  try {
    trajectory = agent::run_episode(*session, request, episode, *explore, options);
  } catch (const Error& e) {
    session->close();
    result.error = e.what();
    result.exit_code = exit_code_for(e);
    return result;
  }
  session->close();
  result.termination = trajectory.termination;
  result.termination_detail = trajectory.termination_detail;
  result.steps = trajectory.steps.size();
  log << "[" << result.run_id << "] episode ended: "
      << (trajectory.termination ? agent::to_string(*trajectory.termination) : "interrupted") << " ("
      << trajectory.termination_detail << ")\n";

  if (trajectory.steps.empty()) {
    result.error = "no steps recorded: " + trajectory.termination_detail;
    result.exit_code = kExitFatal;
    return result;
  }

  std::string raw;
  try {
    report::BugReport bug_report =
        report::generate_report(*report_backend, trajectory, assets, completion_params(config), &raw);
    write_file_atomic(result.run_dir / "report.md", report::render_markdown(bug_report));
    write_file_atomic(result.run_dir / "report.v1.json", report::render_structured(bug_report));
    log << "[" << result.run_id << "] report: " << bug_report.findings.size() << " finding(s)\n";
    result.report = std::move(bug_report);
  } catch (const Error& e) {
    if (!raw.empty()) write_file_atomic(result.run_dir / "report.raw.txt", raw);
    result.error = std::string("report failed: ") + e.what();
    result.exit_code = kExitFatal;
    return result;
  }

  if (trajectory.termination == agent::Termination::kFatalError) {
    result.error = "episode ended early: " + trajectory.termination_detail;
    result.exit_code = kExitFatal;
  }
  return result;
}

BatchManifest BatchManifest::parse(std::string_view text, const fs::path& base_dir, const std::string& fixture_base) {
  BatchManifest manifest;
  manifest.base_dir = base_dir;
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) manifest_error("manifest is not a JSON object");
  auto targets = doc.find("targets");
  if (targets == doc.end() || !targets->is_array()) manifest_error("manifest has no \"targets\" array");
  if (targets->empty()) manifest_error("manifest lists no targets");
  Config probe = Config::defaults();
  for (std::size_t i = 0; i < targets->size(); ++i) {
    const json& t = (*targets)[i];
    std::string where = "target " + std::to_string(i + 1);
    if (!t.is_object() || !t.contains("url") || !t["url"].is_string()) manifest_error(where + ": missing url");
    BatchTarget target;
    target.url = t["url"].get<std::string>();
    if (auto at = target.url.find("${FIXTURES}"); at != std::string::npos) {
      if (fixture_base.empty()) manifest_error(where + ": uses ${FIXTURES} but no fixture server is running");
      target.url.replace(at, 11, fixture_base);
    }
    if (!is_well_formed_http_url(target.url)) manifest_error(where + ": '" + target.url + "' is not an http(s) URL");
    if (t.contains("class")) {
      if (!t["class"].is_string()) manifest_error(where + ": class must be a string");
      target.site_class = t["class"].get<std::string>();
    }
    if (t.contains("overrides")) {
      if (!t["overrides"].is_object()) manifest_error(where + ": overrides must be an object");
      for (const auto& [key, value] : t["overrides"].items()) {
        std::string v = value.is_string() ? value.get<std::string>() : value.dump();
        try {
          probe.set(key, v, where, base_dir);
        } catch (const Error& e) {
          manifest_error(where + ": " + e.what());
        }
        target.overrides.emplace_back(key, v);
      }
    }
    manifest.targets.push_back(std::move(target));
  }
  return manifest;
}

BatchManifest BatchManifest::load(const fs::path& path, const std::string& fixture_base) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    manifest_error(e.what());
  }
  return parse(text, fs::absolute(path).parent_path(), fixture_base);
}

std::string format_batch_summary(const BatchResult& result) {
  std::ostringstream out;
  out << "| target | run | status | termination | steps | findings | error |\n"
      << "|---|---|---|---|---|---|---|\n";
  for (const auto& row : result.rows) {
    out << "| " << row.url << " | " << (row.run_id.empty() ? "-" : row.run_id) << " | "
        << (row.ok() ? "ok" : "failed") << " | "
        << (row.termination ? std::string(agent::to_string(*row.termination)) : std::string("-")) << " | "
        << row.steps << " | " << (row.report ? std::to_string(row.report->findings.size()) : std::string("-"))
        << " | " << (row.error.empty() ? "" : row.error) << " |\n";
  }
  return out.str();
}

BatchResult run_batch(const Config& config, const BatchManifest& manifest, const std::string& endpoint,
                      std::ostream& log) {
  BatchResult result;
  result.rows.resize(manifest.targets.size());
  agent::TrajectoryStore store(config.get_path("paths.runs"));
  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};

  // Each worker owns its own rows; the log is the only shared sink.
  auto worker = [&] {
    for (std::size_t i = next++; i < manifest.targets.size(); i = next++) {
      const BatchTarget& target = manifest.targets[i];
      std::ostringstream site_log;
      ProbeResult row;
      row.url = target.url;
      try {
        Config site = config;
        if (!target.site_class.empty()) site.set("prompt.class", target.site_class, "manifest");
        for (const auto& [key, value] : target.overrides) site.set(key, value, "manifest", manifest.base_dir);
        row = run_probe(site, target.url, endpoint, store, site_log);
      } catch (const Error& e) {
        row.error = e.what();
        row.exit_code = exit_code_for(e);
      } catch (const std::exception& e) {
        row.error = e.what();
        row.exit_code = kExitFatal;
      }
      std::lock_guard lock(log_mutex);
      log << site_log.str();
      log << "[batch] " << target.url << ": " << (row.ok() ? "ok" : "failed: " + row.error) << '\n';
      result.rows[i] = std::move(row);
    }
  };
  std::size_t parallel = std::min<std::size_t>(static_cast<std::size_t>(config.get_int("batch.parallelism")),
                                               manifest.targets.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < parallel; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  std::size_t failed = 0;
  json rows = json::array();
  for (const auto& row : result.rows) {
    if (!row.ok()) ++failed;
    rows.push_back({{"url", row.url},
                    {"run_id", row.run_id},
                    {"status", row.ok() ? "ok" : "failed"},
                    {"termination", row.termination ? json(agent::to_string(*row.termination)) : json(nullptr)},
                    {"steps", row.steps},
                    {"findings", row.report ? json(row.report->findings.size()) : json(nullptr)},
                    {"error", row.error}});
  }
  result.exit_code = failed == 0 ? kExitOk : failed == result.rows.size() ? kExitFatal : kExitPartial;
  fs::path runs = config.get_path("paths.runs");
  std::error_code ec;
  fs::create_directories(runs, ec);
  write_file_atomic(runs / "batch-summary.json",
                    json{{"schema_version", 1}, {"rows", rows}, {"failed", failed}}.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n");
  write_file_atomic(runs / "batch-summary.md", format_batch_summary(result));
  return result;
}

prompt::TestingPrompt run_refine(const Config& config, const std::string& site_class, int k, std::ostream& log) {
  auto templates = prompt::TemplateStore::load(prompts_dir(config));
  const prompt::TestingPrompt& current = templates.latest(site_class);
  auto db = prompt::BugDatabase::open(config.get_path("paths.bug_db"));
  auto bugs = prompt::select_representative(db.records(), site_class, k);
  if (bugs.empty()) {
    throw Error(ErrorCode::kEmptyDatabase,
                "no reproducible bugs recorded for class '" + site_class + "' in " + db.path().string());
  }
  std::string meta_path = (config.get_path("paths.assets") / "refine" / "meta_prompt.v1.txt").string();
  std::string meta;
  try {
    meta = read_text_file(meta_path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, std::string("refinement template: ") + e.what());
  }
  auto backend = make_backend(backend_spec(config, {"backend.refine", "backend.report", "backend.explore"}), config);
  log << "refining " << current.id() << " from " << bugs.size() << " bug(s)\n";
  prompt::TestingPrompt refined = prompt::refine_prompt(*backend, current, bugs, meta, completion_params(config));
  templates.save(refined);
  log << refined.id() << " <- " << current.id() << " (bugs:";
  for (const auto& id : refined.derived_from_bugs) log << ' ' << id;
  log << ")\n";
  return refined;
}

std::vector<std::optional<bool>> load_verdicts(const fs::path& run_dir, std::size_t finding_count) {
  std::vector<std::optional<bool>> verdicts(finding_count);
  fs::path file = run_dir / "verification.json";
  if (!fs::exists(file)) return verdicts;
  json doc = json::parse(read_text_file(file), nullptr, false);
  if (doc.is_discarded() || !doc.contains("verdicts") || !doc["verdicts"].is_array()) {
    throw Error(ErrorCode::kCorruptRecord, file.string() + " is malformed");
  }
  const json& list = doc["verdicts"];
  for (std::size_t i = 0; i < std::min(finding_count, list.size()); ++i) {
    if (list[i].is_boolean()) verdicts[i] = list[i].get<bool>();
  }
  return verdicts;
}

void save_verdicts(const fs::path& run_dir, const std::vector<std::optional<bool>>& verdicts) {
  json list = json::array();
  for (const auto& v : verdicts) list.push_back(v ? json(*v) : json(nullptr));
  write_file_atomic(run_dir / "verification.json",
                    json{{"schema_version", 1}, {"verdicts", list}, {"updated_at", iso8601_now()}}.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n");
}

std::vector<RunRecord> load_runs(const fs::path& runs_dir) {
  agent::TrajectoryStore store(runs_dir);
  std::vector<RunRecord> runs;
  for (const auto& id : store.run_ids()) {
    fs::path report_file = store.run_dir(id) / "report.v1.json";
    if (!fs::exists(report_file)) continue;
    RunRecord run;
    run.trajectory = store.load(id);
    run.report = report::parse_structured(read_text_file(report_file));
    run.verdicts = load_verdicts(store.run_dir(id), run.report.findings.size());
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace uxprobe::harness
