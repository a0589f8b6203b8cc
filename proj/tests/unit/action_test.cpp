#include <gtest/gtest.h>

#include "json.hpp"
#include "support.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/vlm/action.hpp"

namespace uxprobe::vlm {
namespace {

ErrorCode code_of(std::string_view text) {
  try {
    parse_action(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "parsed: " << text;
  return ErrorCode::kPrecondition;
}

TEST(ParseAction, DirectForm) {
  EXPECT_EQ(parse_action(R"({"kind":"click","element_index":3})"), AgentAction::click(3));
}

TEST(ParseAction, FencedBlockInsideProse) {
  std::string reply =
      "I have looked at every page.\n```json\n{\"kind\":\"done\",\"reason\":\"all features tested\"}\n```\nThanks.";
  EXPECT_EQ(parse_action(reply), AgentAction::done("all features tested"));
}

TEST(ParseAction, MissingIndexIsInvalidAction) {
  EXPECT_EQ(code_of(R"({"kind":"click"})"), ErrorCode::kInvalidAction);
}

TEST(ParseAction, NoObjectIsUnparseable) {
  EXPECT_EQ(code_of("I would click the second link."), ErrorCode::kUnparseable);
  EXPECT_EQ(code_of(""), ErrorCode::kUnparseable);
  EXPECT_EQ(code_of("{not json}"), ErrorCode::kUnparseable);
  EXPECT_EQ(code_of(R"({"action": "click"})"), ErrorCode::kUnparseable);
}

TEST(ParseAction, FieldRulesPerKind) {
  EXPECT_EQ(code_of(R"({"kind":"click","element_index":0})"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"({"kind":"click","element_index":-2})"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"({"kind":"click","element_index":"3"})"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"({"kind":"click","element_index":2.5})"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"({"kind":"click","element_index":99999999999})"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"({"kind":"click","element_index":1,"text":"x"})"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"({"kind":"type","element_index":1})"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"({"kind":"scroll","direction":"left"})"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"({"kind":"scroll"})"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"({"kind":"navigate","url":"/relative"})"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"j({"kind":"navigate","url":"javascript:alert(1)"})j"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"({"kind":"back","reason":"x"})"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"({"kind":"done"})"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"({"kind":"hover","element_index":1})"), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of(R"({"kind":7})"), ErrorCode::kInvalidAction);
}

TEST(ParseAction, AcceptsEveryKind) {
  EXPECT_EQ(parse_action(R"({"kind":"type","element_index":2,"text":"hello"})"), AgentAction::type(2, "hello"));
  EXPECT_EQ(parse_action(R"({"kind":"scroll","direction":"up"})"), AgentAction::scroll(ScrollDirection::kUp));
  EXPECT_EQ(parse_action(R"({"kind":"navigate","url":"http://x.org/a"})"), AgentAction::navigate("http://x.org/a"));
  EXPECT_EQ(parse_action(R"({"kind":"back"})"), AgentAction::back());
  EXPECT_EQ(parse_action(R"({"kind":"Click","element_index":1})"), AgentAction::click(1));
}

TEST(ParseAction, NullForeignFieldsAreTolerated) {
  EXPECT_EQ(parse_action(R"({"kind":"back","element_index":null,"url":null})"), AgentAction::back());
}

TEST(ParseAction, SkipsNonActionObjectsAndTakesFirstAction) {
  std::string reply = R"(State: {"page": 1}. Then {"kind":"click","element_index":4} or {"kind":"back"})";
  EXPECT_EQ(parse_action(reply), AgentAction::click(4));
}

TEST(ParseAction, BracesInsideStringsDoNotConfuseExtraction) {
  std::string reply = R"({"kind":"type","element_index":1,"text":"a } tricky { string \" here"})";
  EXPECT_EQ(parse_action(reply), AgentAction::type(1, "a } tricky { string \" here"));
}

TEST(ParseStepReply, CarriesEvaluationAndGoal) {
  auto r = parse_step_reply(
      R"({"evaluation":"page loaded","next_goal":"open contact","kind":"click","element_index":3})");
  EXPECT_EQ(r.evaluation, "page loaded");
  EXPECT_EQ(r.next_goal, "open contact");
  EXPECT_EQ(r.action, AgentAction::click(3));
}

TEST(ParseStepReply, NestedActionObject) {
  auto r = parse_step_reply(R"({"evaluation":"e","next_goal":"g","action":{"kind":"scroll","direction":"down"}})");
  EXPECT_EQ(r.evaluation, "e");
  EXPECT_EQ(r.action, AgentAction::scroll(ScrollDirection::kDown));
}

TEST(Validate, FactoriesProduceValidActions) {
  EXPECT_NO_THROW(validate(AgentAction::click(1)));
  EXPECT_NO_THROW(validate(AgentAction::navigate("https://a.b/")));
  EXPECT_THROW(validate(AgentAction::click(0)), Error);
  EXPECT_THROW(validate(AgentAction::navigate("nope")), Error);
  AgentAction bad = AgentAction::back();
  bad.text = "stray";
  EXPECT_THROW(validate(bad), Error);
}

TEST(Describe, ShortForms) {
  EXPECT_EQ(describe(AgentAction::click(3)), "click [3]");
  EXPECT_EQ(describe(AgentAction::type(2, "hello")), "type [2] \"hello\"");
  EXPECT_EQ(describe(AgentAction::scroll(ScrollDirection::kUp)), "scroll up");
  EXPECT_EQ(describe(AgentAction::back()), "back");
}

// Property: any generated valid action survives serialization, whether the
// wire form is bare, fenced, embedded in prose or wrapped in a step reply.
TEST(ActionProperty, SerializeParseRoundTrip) {
  test::Gen gen(20240611);
  for (int i = 0; i < 2000; ++i) {
    AgentAction action = gen.action();
    ASSERT_NO_THROW(validate(action));
    std::string wire = serialize_action(action);
    std::string reply;
    switch (i % 4) {
      case 0: reply = wire; break;
      case 1: reply = "Here is my choice:\n```json\n" + wire + "\n```\n"; break;
      case 2: reply = gen.text(30) + "\n" + wire + "\n" + "done."; break;
      default:
        reply = serialize_step_reply(StepReply{gen.text(20), gen.text(20), action});
        break;
    }
    AgentAction parsed;
    try {
      parsed = parse_action(reply);
    } catch (const Error& e) {
      FAIL() << e.what() << "\nreply: " << reply;
    }
    ASSERT_EQ(parsed, action) << reply;
  }
}

TEST(ActionProperty, JsonRoundTrip) {
  test::Gen gen(99);
  for (int i = 0; i < 1000; ++i) {
    AgentAction action = gen.action();
    EXPECT_EQ(action_from_json(action_to_json(action)), action);
  }
}

// Property: parsing arbitrary bytes yields a value or a defined error.
TEST(ActionProperty, ArbitraryBytesNeverEscapeAsUndefinedErrors) {
  test::Gen gen(4242);
  for (int i = 0; i < 3000; ++i) {
    std::string input = i % 2 ? gen.bytes(300) : "{\"kind\":" + gen.text(40) + gen.bytes(20);
    try {
      parse_action(input);
    } catch (const Error& e) {
      ASSERT_TRUE(e.code() == ErrorCode::kUnparseable || e.code() == ErrorCode::kInvalidAction) << e.what();
    } catch (const std::exception& e) {
      FAIL() << "undefined error: " << e.what();
    }
  }
}

TEST(ActionProperty, HugeAndDeeplyNestedInputsTerminate) {
  std::string deep(200000, '{');
  EXPECT_THROW(parse_action(deep), Error);
  std::string many;
  for (int i = 0; i < 20000; ++i) many += "{\"a\":1}";
  EXPECT_THROW(parse_action(many), Error);
  std::string nested = std::string(5000, '[') + std::string(5000, ']');
  EXPECT_THROW(parse_action("{\"kind\":" + nested + "}"), Error);
}

}  // namespace
}  // namespace uxprobe::vlm
