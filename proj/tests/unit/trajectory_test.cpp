#include <gtest/gtest.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <thread>

#include "support.hpp"
#include "uxprobe/agent/trajectory.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"

namespace uxprobe::agent {
namespace {

namespace fs = std::filesystem;

Trajectory header_of(const Trajectory& t) {
  Trajectory h = t;
  h.steps.clear();
  h.termination.reset();
  h.termination_detail.clear();
  h.finished_at.clear();
  return h;
}

void persist_all(TrajectoryStore& store, const Trajectory& t) {
  store.register_run(header_of(t));
  for (const auto& s : t.steps) store.persist_step(t.run_id, s);
  store.finish(t);
}

ErrorCode load_error(const TrajectoryStore& store, std::string_view id, std::string* message = nullptr) {
  try {
    store.load(id);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "load succeeded";
  return ErrorCode::kPrecondition;
}

TEST(Termination, Names) {
  EXPECT_EQ(to_string(Termination::kDoneSignal), "done-signal");
  EXPECT_EQ(parse_termination("step-limit"), Termination::kStepLimit);
  EXPECT_FALSE(parse_termination("crashed"));
}

TEST(EpisodeConfig, Validation) {
  EpisodeConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.max_steps, 20);
  c.max_steps = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.reprompt_limit_per_step = -1;
  EXPECT_THROW(c.validate(), Error);
}

// Property: persist -> load is field-exact, screenshots included.
TEST(TrajectoryStore, RoundTripIsFieldExact) {
  test::TempDir dir;
  TrajectoryStore store(dir.path());
  test::Gen gen(1234);
  for (int i = 0; i < 60; ++i) {
    Trajectory t = gen.trajectory(12);
    t.run_id = "run" + std::to_string(i);
    t.termination = static_cast<Termination>(gen.uniform(0, 2));
    t.termination_detail = gen.text(20);
    t.finished_at = "2025-01-31T12:01:00Z";
    persist_all(store, t);
    Trajectory loaded = store.load(t.run_id);
    ASSERT_EQ(loaded, t) << t.run_id;
    for (const auto& s : loaded.steps) EXPECT_EQ(s.screenshot.content_hash(), s.screenshot_ref);
  }
  EXPECT_EQ(store.run_ids().size(), 60u);
}

TEST(TrajectoryStore, UnfinishedRunLoadsAsInterrupted) {
  test::TempDir dir;
  TrajectoryStore store(dir.path());
  test::Gen gen(1);
  Trajectory t = gen.trajectory(5);
  store.register_run(header_of(t));
  store.persist_step(t.run_id, t.steps[0]);
  auto loaded = store.load(t.run_id);
  EXPECT_TRUE(loaded.interrupted());
  EXPECT_EQ(loaded.steps.size(), 1u);
}

TEST(TrajectoryStore, UnknownRun) {
  test::TempDir dir;
  TrajectoryStore store(dir.path());
  EXPECT_EQ(load_error(store, "nope"), ErrorCode::kUnknownRun);
  test::Gen gen(2);
  try {
    store.persist_step("nope", gen.step(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownRun);
  }
}

TEST(TrajectoryStore, RegisterTwiceIsRejected) {
  test::TempDir dir;
  TrajectoryStore store(dir.path());
  Trajectory t;
  t.run_id = "r";
  store.register_run(t);
  EXPECT_THROW(store.register_run(t), Error);
  t.run_id = "../escape";
  EXPECT_THROW(store.register_run(t), Error);
  t.run_id = "";
  EXPECT_THROW(store.register_run(t), Error);
}

TEST(TrajectoryStore, AllocatesDistinctIds) {
  test::TempDir dir;
  TrajectoryStore store(dir.path());
  EXPECT_EQ(store.allocate_run_id("site"), "site");
  EXPECT_EQ(store.allocate_run_id("site"), "site-2");
  Trajectory t;
  t.run_id = "other";
  store.register_run(t);
  EXPECT_EQ(store.allocate_run_id("other"), "other-2");
}

TEST(TrajectoryStore, TruncatedFinalRecordNamesTheStep) {
  test::TempDir dir;
  TrajectoryStore store(dir.path());
  test::Gen gen(3);
  Trajectory t = gen.trajectory(1);
  t.steps.clear();
  for (int i = 1; i <= 4; ++i) t.steps.push_back(gen.step(i));
  persist_all(store, t);
  fs::path last = store.run_dir(t.run_id) / "steps" / "step_0004.json";
  std::string content = read_text_file(last);
  write_file_atomic(last, std::string_view(content).substr(0, content.size() / 2));
  std::string message;
  EXPECT_EQ(load_error(store, t.run_id, &message), ErrorCode::kCorruptRecord);
  EXPECT_NE(message.find("step 4"), std::string::npos) << message;
}

TEST(TrajectoryStore, GapInStepsIsCorrupt) {
  test::TempDir dir;
  TrajectoryStore store(dir.path());
  test::Gen gen(4);
  Trajectory t = gen.trajectory(1);
  t.steps = {gen.step(1), gen.step(2), gen.step(3)};
  persist_all(store, t);
  fs::remove(store.run_dir(t.run_id) / "steps" / "step_0002.json");
  std::string message;
  EXPECT_EQ(load_error(store, t.run_id, &message), ErrorCode::kCorruptRecord);
  EXPECT_NE(message.find("step 2"), std::string::npos) << message;
}

TEST(TrajectoryStore, TamperedScreenshotIsCorrupt) {
  test::TempDir dir;
  TrajectoryStore store(dir.path());
  test::Gen gen(5);
  Trajectory t = gen.trajectory(1);
  t.steps = {gen.step(1)};
  persist_all(store, t);
  fs::path blob = store.run_dir(t.run_id) / "blobs" / (t.steps[0].screenshot_ref + ".png");
  ASSERT_TRUE(fs::exists(blob));
  write_file_atomic(blob, std::string_view("tampered"));
  EXPECT_EQ(load_error(store, t.run_id), ErrorCode::kCorruptRecord);
  fs::remove(blob);
  EXPECT_EQ(load_error(store, t.run_id), ErrorCode::kCorruptRecord);
}

TEST(TrajectoryStore, MismatchedScreenshotRefIsRejected) {
  test::TempDir dir;
  TrajectoryStore store(dir.path());
  test::Gen gen(6);
  Trajectory t = gen.trajectory(1);
  store.register_run(header_of(t));
  auto step = gen.step(1);
  step.screenshot_ref = std::string(64, '0');
  EXPECT_THROW(store.persist_step(t.run_id, step), Error);
}

// A writer killed after its third step leaves exactly three loadable steps.
TEST(TrajectoryStore, CrashAfterThirdStepKeepsCompletedSteps) {
  test::TempDir dir;
  test::Gen gen(7);
  Trajectory t = gen.trajectory(1);
  t.run_id = "crash";
  t.steps.clear();
  for (int i = 1; i <= 5; ++i) t.steps.push_back(gen.step(i));

  pid_t child = ::fork();
  ASSERT_GE(child, 0);
  if (child == 0) {
    TrajectoryStore store(dir.path());
    store.register_run(header_of(t));
    for (int i = 0; i < 3; ++i) store.persist_step(t.run_id, t.steps[static_cast<std::size_t>(i)]);
    ::raise(SIGKILL);
    ::_exit(0);
  }
  int status = 0;
  ::waitpid(child, &status, 0);
  ASSERT_TRUE(WIFSIGNALED(status));

  TrajectoryStore store(dir.path());
  Trajectory loaded = store.load("crash");
  EXPECT_TRUE(loaded.interrupted());
  ASSERT_EQ(loaded.steps.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(loaded.steps[static_cast<std::size_t>(i)], t.steps[static_cast<std::size_t>(i)]);
}

TEST(TrajectoryStore, ConcurrentWritersOnDistinctRuns) {
  test::TempDir dir;
  TrajectoryStore store(dir.path());
  std::vector<Trajectory> runs;
  test::Gen gen(8);
  for (int i = 0; i < 4; ++i) {
    Trajectory t = gen.trajectory(8);
    t.run_id = store.allocate_run_id("same-site");
    t.termination = Termination::kStepLimit;
    runs.push_back(t);
  }
  std::vector<std::thread> threads;
  for (const auto& t : runs) threads.emplace_back([&store, &t] { persist_all(store, t); });
  for (auto& th : threads) th.join();
  for (const auto& t : runs) EXPECT_EQ(store.load(t.run_id), t);
}

TEST(ElementMapJson, RoundTrip) {
  test::Gen gen(9);
  for (int i = 0; i < 200; ++i) {
    auto map = gen.element_map(10);
    EXPECT_EQ(element_map_from_json(to_json(map)), map);
  }
}

}  // namespace
}  // namespace uxprobe::agent
