#include "uxprobe/agent/trajectory.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>

#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"

namespace uxprobe::agent {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string step_file_name(int step_number) {
  char name[32];
  std::snprintf(name, sizeof name, "step_%04d.json", step_number);
  return name;
}

json config_to_json(const EpisodeConfig& c) {
  return {{"max_steps", c.max_steps},
          {"annotate_screenshots", c.annotate_screenshots},
          {"reprompt_limit_per_step", c.reprompt_limit_per_step},
          {"history_screenshots", c.history_screenshots},
          {"explore_backend", c.explore_backend},
          {"report_backend", c.report_backend}};
}

EpisodeConfig config_from_json(const json& j) {
  EpisodeConfig c;
  c.max_steps = j.at("max_steps").get<int>();
  c.annotate_screenshots = j.at("annotate_screenshots").get<bool>();
  c.reprompt_limit_per_step = j.at("reprompt_limit_per_step").get<int>();
  c.history_screenshots = j.at("history_screenshots").get<int>();
  c.explore_backend = j.at("explore_backend").get<std::string>();
  c.report_backend = j.at("report_backend").get<std::string>();
  return c;
}

json step_to_json(const TrajectoryStep& s) {
  return {{"schema_version", kSchemaVersion},
          {"step_number", s.step_number},
          {"screenshot",
           {{"sha256", s.screenshot_ref},
            {"width", s.screenshot.width},
            {"height", s.screenshot.height},
            {"annotated", s.annotated}}},
          {"element_map", to_json(s.element_map)},
          {"evaluation", s.evaluation},
          {"next_goal", s.next_goal},
          {"action", s.action ? vlm::action_to_json(*s.action) : json(nullptr)},
          {"note", s.note},
          {"outcome", to_json(s.outcome)},
          {"raw_reply", s.raw_reply}};
}

}  // namespace

std::string_view to_string(Termination termination) {
  switch (termination) {
    case Termination::kDoneSignal: return "done-signal";
    case Termination::kStepLimit: return "step-limit";
    case Termination::kFatalError: return "fatal-error";
  }
  return "fatal-error";
}

std::optional<Termination> parse_termination(std::string_view text) {
  for (Termination t : {Termination::kDoneSignal, Termination::kStepLimit, Termination::kFatalError}) {
    if (text == to_string(t)) return t;
  }
  return std::nullopt;
}

void EpisodeConfig::validate() const {
  if (max_steps < 1) throw Error(ErrorCode::kConfigError, "max_steps must be at least 1");
  if (reprompt_limit_per_step < 0) throw Error(ErrorCode::kConfigError, "reprompt limit must not be negative");
  if (history_screenshots < 1) throw Error(ErrorCode::kConfigError, "history must keep at least one screenshot");
}

json to_json(const browser::ElementMap& map) {
  json entries = json::array();
  for (const auto& e : map.entries) {
    entries.push_back({{"index", e.index},
                       {"role", browser::to_string(e.role)},
                       {"label", e.label},
                       {"box", {e.bounding_box.x, e.bounding_box.y, e.bounding_box.width, e.bounding_box.height}},
                       {"target_url", e.target_url ? json(*e.target_url) : json(nullptr)},
                       {"off_screen", e.off_screen},
                       {"value", e.value},
                       {"backend_node_id", e.backend_node_id},
                       {"hit_node_ids", e.hit_node_ids}});
  }
  return {{"page_url", map.page_url}, {"captured_at", map.captured_at}, {"entries", entries}};
}

browser::ElementMap element_map_from_json(const json& j) {
  browser::ElementMap map;
  map.page_url = j.at("page_url").get<std::string>();
  map.captured_at = j.at("captured_at").get<int>();
  for (const auto& e : j.at("entries")) {
    browser::ElementEntry entry;
    entry.index = e.at("index").get<int>();
    auto role = browser::parse_element_role(e.at("role").get<std::string>());
    if (!role) throw Error(ErrorCode::kCorruptRecord, "unknown element role");
    entry.role = *role;
    entry.label = e.at("label").get<std::string>();
    const json& box = e.at("box");
    entry.bounding_box = {box.at(0).get<double>(), box.at(1).get<double>(), box.at(2).get<double>(),
                          box.at(3).get<double>()};
    if (!e.at("target_url").is_null()) entry.target_url = e.at("target_url").get<std::string>();
    entry.off_screen = e.at("off_screen").get<bool>();
    entry.value = e.at("value").get<std::string>();
    entry.backend_node_id = e.at("backend_node_id").get<int>();
    entry.hit_node_ids = e.at("hit_node_ids").get<std::vector<int>>();
    map.entries.push_back(std::move(entry));
  }
  return map;
}

json to_json(const browser::ActionOutcome& o) {
  return {{"status", browser::to_string(o.status)},
          {"resulting_url", o.resulting_url},
          {"console_errors", o.console_errors},
          {"detail", o.detail}};
}

browser::ActionOutcome outcome_from_json(const json& j) {
  browser::ActionOutcome o;
  auto status = browser::parse_outcome_status(j.at("status").get<std::string>());
  if (!status) throw Error(ErrorCode::kCorruptRecord, "unknown outcome status");
  o.status = *status;
  o.resulting_url = j.at("resulting_url").get<std::string>();
  o.console_errors = j.at("console_errors").get<std::vector<std::string>>();
  o.detail = j.at("detail").get<std::string>();
  return o;
}

TrajectoryStore::TrajectoryStore(fs::path root) : root_(std::move(root)) {}

fs::path TrajectoryStore::run_dir(std::string_view run_id) const { return root_ / std::string(run_id); }

std::string TrajectoryStore::allocate_run_id(std::string_view base) {
  std::lock_guard lock(mutex_);
  std::string candidate(base);
  for (int n = 2; fs::exists(run_dir(candidate)) || reserved_.contains(candidate); ++n) {
    candidate = std::string(base) + "-" + std::to_string(n);
  }
  reserved_.insert(candidate);
  return candidate;
}

void TrajectoryStore::write_meta(const Trajectory& t) const {
  json meta = {{"schema_version", kSchemaVersion},
               {"run_id", t.run_id},
               {"target_url", t.target_url},
               {"prompt_id", t.prompt_id},
               {"prompt_text", t.prompt_text},
               {"model_id", t.model_id},
               {"config", config_to_json(t.config)},
               {"started_at", t.started_at}};
  if (t.termination) {
    meta["termination"] = to_string(*t.termination);
    meta["termination_detail"] = t.termination_detail;
    meta["finished_at"] = t.finished_at;
    meta["step_count"] = t.steps.size();
  }
  write_file_atomic(run_dir(t.run_id) / "meta.json", meta.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n");
}

void TrajectoryStore::register_run(const Trajectory& header) {
  if (header.run_id.empty() || header.run_id.find('/') != std::string::npos || header.run_id.starts_with(".")) {
    throw Error(ErrorCode::kPrecondition, "invalid run id '" + header.run_id + "'");
  }
  fs::path dir = run_dir(header.run_id);
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (!fs::create_directory(dir, ec)) {
    if (ec) throw Error(ErrorCode::kStorageFailure, "cannot create " + dir.string() + ": " + ec.message());
    throw Error(ErrorCode::kPrecondition, "run '" + header.run_id + "' already exists");
  }
  fs::create_directories(dir / "steps", ec);
  fs::create_directories(dir / "blobs", ec);
  if (ec) throw Error(ErrorCode::kStorageFailure, "cannot create " + dir.string() + ": " + ec.message());
  Trajectory stripped = header;
  stripped.termination.reset();
  write_meta(stripped);
}

void TrajectoryStore::persist_step(std::string_view run_id, const TrajectoryStep& step) {
  fs::path dir = run_dir(run_id);
  if (run_id.empty() || !fs::exists(dir / "meta.json")) {
    throw Error(ErrorCode::kUnknownRun, "run '" + std::string(run_id) + "' is not registered");
  }
  if (step.screenshot_ref != step.screenshot.content_hash()) {
    throw Error(ErrorCode::kPrecondition, "screenshot reference does not match the image");
  }
  fs::path blob = dir / "blobs" / (step.screenshot_ref + ".png");
  // Blob first: a step record never points at a missing image.
  if (!fs::exists(blob)) write_file_atomic(blob, std::span<const std::uint8_t>(step.screenshot.png));
  write_file_atomic(dir / "steps" / step_file_name(step.step_number), step_to_json(step).dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n");
}

void TrajectoryStore::finish(const Trajectory& trajectory) {
  if (!fs::exists(run_dir(trajectory.run_id) / "meta.json")) {
    throw Error(ErrorCode::kUnknownRun, "run '" + trajectory.run_id + "' is not registered");
  }
  write_meta(trajectory);
}

Trajectory TrajectoryStore::load(std::string_view run_id) const {
  fs::path dir = run_dir(run_id);
  if (run_id.empty() || !fs::exists(dir / "meta.json")) {
    throw Error(ErrorCode::kUnknownRun, "no run '" + std::string(run_id) + "' under " + root_.string());
  }
  Trajectory t;
  try {
    json meta = json::parse(read_text_file(dir / "meta.json"));
    if (meta.at("schema_version").get<int>() != kSchemaVersion) {
      throw Error(ErrorCode::kCorruptRecord, "unsupported schema version in meta.json");
    }
    t.run_id = meta.at("run_id").get<std::string>();
    t.target_url = meta.at("target_url").get<std::string>();
    t.prompt_id = meta.at("prompt_id").get<std::string>();
    t.prompt_text = meta.at("prompt_text").get<std::string>();
    t.model_id = meta.at("model_id").get<std::string>();
    t.config = config_from_json(meta.at("config"));
    t.started_at = meta.at("started_at").get<std::string>();
    if (meta.contains("termination")) {
      t.termination = parse_termination(meta["termination"].get<std::string>());
      if (!t.termination) throw Error(ErrorCode::kCorruptRecord, "unknown termination in meta.json");
      t.termination_detail = meta.value("termination_detail", "");
      t.finished_at = meta.value("finished_at", "");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, "meta.json of run '" + std::string(run_id) + "': " + e.what());
  }

  static const std::regex kStepFile(R"(step_(\d+)\.json)");
  std::vector<int> numbers;
  std::error_code ec;
  for (const auto& file : fs::directory_iterator(dir / "steps", ec)) {
    std::smatch m;
    std::string name = file.path().filename().string();
    if (std::regex_match(name, m, kStepFile)) numbers.push_back(std::stoi(m[1].str()));
  }
  std::sort(numbers.begin(), numbers.end());
  for (std::size_t i = 0; i < numbers.size(); ++i) {
    int expected = static_cast<int>(i) + 1;
    if (numbers[i] != expected) {
      throw Error(ErrorCode::kCorruptRecord, "step " + std::to_string(expected) + " is missing");
    }
    auto corrupt = [&](const std::string& why) {
      return Error(ErrorCode::kCorruptRecord, "step " + std::to_string(expected) + ": " + why);
    };
    TrajectoryStep s;
    try {
      json j = json::parse(read_text_file(dir / "steps" / step_file_name(expected)));
      if (j.at("schema_version").get<int>() != kSchemaVersion) throw corrupt("unsupported schema version");
      s.step_number = j.at("step_number").get<int>();
      if (s.step_number != expected) throw corrupt("record claims step " + std::to_string(s.step_number));
      const json& shot = j.at("screenshot");
      s.screenshot_ref = shot.at("sha256").get<std::string>();
      s.annotated = shot.at("annotated").get<bool>();
      s.element_map = element_map_from_json(j.at("element_map"));
      s.evaluation = j.at("evaluation").get<std::string>();
      s.next_goal = j.at("next_goal").get<std::string>();
      if (!j.at("action").is_null()) s.action = vlm::action_from_json(j.at("action"));
      s.note = j.at("note").get<std::string>();
      s.outcome = outcome_from_json(j.at("outcome"));
      s.raw_reply = j.at("raw_reply").get<std::string>();
    } catch (const json::exception& e) {
      throw corrupt(e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kCorruptRecord && std::string(e.what()).find("step ") != std::string::npos) throw;
      throw corrupt(e.what());
    }
    fs::path blob = dir / "blobs" / (s.screenshot_ref + ".png");
    if (!fs::exists(blob)) throw corrupt("screenshot blob " + s.screenshot_ref + " is missing");
    auto image = ImageBlob::from_png(read_binary_file(blob));
    if (!image || image->content_hash() != s.screenshot_ref) throw corrupt("screenshot blob does not match its hash");
    s.screenshot = std::move(*image);
    t.steps.push_back(std::move(s));
  }
  return t;
}

std::vector<std::string> TrajectoryStore::run_ids() const {
  std::vector<std::string> ids;
  std::error_code ec;
  for (const auto& dir : fs::directory_iterator(root_, ec)) {
    if (dir.is_directory() && fs::exists(dir.path() / "meta.json")) ids.push_back(dir.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace uxprobe::agent
