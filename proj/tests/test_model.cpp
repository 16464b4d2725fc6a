#include "maxent/model.hpp"

#include <gtest/gtest.h>

#include <string>

using namespace maxent;

namespace {

const char* kTiny = R"({
  "states": ["a", "b"],
  "initial": "a",
  "actions": ["go"],
  "observations": ["z"],
  "transitions": [
    {"from": "a", "action": "go", "to": {"a": "1/3", "b": "2/3"}},
    {"from": "b", "action": "go", "to": {"b": 1}}
  ],
  "rewards": [{"state": "a", "action": "go", "value": 2.5}]
})";

std::string expect_code(const std::string& text) {
  try {
    parse_model(text);
  } catch (const Error& e) {
    return e.code();
  }
  return "none";
}

}  // namespace

TEST(Model, ParsesFractionsAndDefaults) {
  const auto m = parse_model(kTiny);
  EXPECT_EQ(m.num_states(), 2);
  EXPECT_DOUBLE_EQ(m.transition[0](0, 0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.transition[0](0, 1), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.observation(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(m.reward(0, 0), 2.5);
  EXPECT_DOUBLE_EQ(m.reward(1, 0), 0.0);
}

TEST(Model, SingleAbsorbingState) {
  const auto m = parse_model(R"({"states":["s"],"initial":"s","actions":["a"],"observations":["z"],
    "transitions":[{"from":"s","action":"a","to":{"s":1}}]})");
  const auto report = validate(m);
  EXPECT_TRUE(report.ok());
  EXPECT_EQ(report.absorbing_states, std::vector<Index>{0});
  EXPECT_TRUE(report.is_dag_to_absorbing);
}

TEST(Model, RejectsBadDocuments) {
  EXPECT_EQ(expect_code("{\"states\": ["), "syntax");
  EXPECT_EQ(expect_code(R"({"states":["s"],"initial":"s","actions":["a"],"observations":["z"],
    "transitions":[{"from":"s","action":"a","to":{"s":0.9}}]})"),
            "distribution_sum");
  EXPECT_EQ(expect_code(R"({"states":["s"],"initial":"s","actions":["a"],"observations":["z"],
    "transitions":[{"from":"s","action":"a","to":{"t":1}}]})"),
            "unknown_id");
  EXPECT_EQ(expect_code(R"({"states":["s"],"initial":"s","actions":["a"],"observations":["z"],
    "transitions":[{"from":"s","action":"a","to":{"s":1}},{"from":"s","action":"a","to":{"s":1}}]})"),
            "duplicate");
  EXPECT_EQ(expect_code(R"({"states":["s"],"initial":"s","actions":["a","b"],"observations":["z"],
    "transitions":[{"from":"s","action":"a","to":{"s":1}}]})"),
            "missing_entry");
  EXPECT_EQ(expect_code(R"({"states":["s"],"initial":"s","actions":["a"],"observations":["z"],
    "transitions":[{"from":"s","action":"a","to":{"s":1}}],
    "rewards":[{"state":"s","action":"a","value":-1}]})"),
            "negative_reward");
  EXPECT_EQ(expect_code(R"({"states":["s"],"initial":"s","actions":["a"],"observations":["y","z"],
    "transitions":[{"from":"s","action":"a","to":{"s":1}}],
    "observation_fn":[{"state":"s","dist":{"y":0.5,"z":0.5}}]})"),
            "initial_observation");
}

TEST(Model, RoundTrip) {
  for (const char* name : {"ex1", "ex2"}) {
    const auto m = builtin_example(name);
    EXPECT_EQ(parse_model(serialize_model(m)), m) << name;
  }
  const auto tiny = parse_model(kTiny);
  EXPECT_EQ(parse_model(serialize_model(tiny)), tiny);
}

TEST(Model, BuiltinShapes) {
  const auto ex1 = builtin_example("ex1");
  EXPECT_EQ(ex1.num_states(), 6);
  EXPECT_EQ(ex1.num_actions(), 2);
  EXPECT_EQ(ex1.num_observations(), 1);
  const auto ex2 = builtin_example("ex2");
  EXPECT_EQ(ex2.num_states(), 15);
  EXPECT_EQ(ex2.num_actions(), 3);
  EXPECT_EQ(ex2.num_observations(), 1);
  EXPECT_THROW(builtin_example("ex3"), Error);
}

TEST(Model, Ex1Structure) {
  const auto m = builtin_example("ex1");
  const auto a1 = m.action_index("a1");
  const auto a2 = m.action_index("a2");
  EXPECT_EQ(m.transition[a1](m.state_index("sI"), m.state_index("s2")), 1.0);
  EXPECT_EQ(m.transition[a2](m.state_index("sI"), m.state_index("s3")), 1.0);
  EXPECT_EQ(m.transition[a1](m.state_index("s2"), m.state_index("s5")), 1.0);
  EXPECT_EQ(m.transition[a2](m.state_index("s2"), m.state_index("s4")), 1.0);
  EXPECT_EQ(m.transition[a1](m.state_index("s3"), m.state_index("s5")), 1.0);
  EXPECT_EQ(m.transition[a2](m.state_index("s3"), m.state_index("s6")), 1.0);
  EXPECT_EQ(m.reward.sum(), 2.0);
  EXPECT_EQ(m.reward(m.state_index("s2"), a1), 1.0);
  EXPECT_EQ(m.reward(m.state_index("s3"), a1), 1.0);
}

TEST(Model, Ex2DrawnEdges) {
  const auto m = builtin_example("ex2");
  auto edge = [&](const char* s, const char* a, const char* t) {
    return m.transition[m.action_index(a)](m.state_index(s), m.state_index(t));
  };
  EXPECT_EQ(edge("s10", "a1", "s13"), 1.0);
  EXPECT_EQ(edge("s10", "a2", "s14"), 1.0);
  EXPECT_EQ(edge("s10", "a3", "s11"), 1.0);
  EXPECT_EQ(edge("s12", "a2", "s14"), 1.0);
  EXPECT_EQ(edge("s12", "a3", "s11"), 1.0);
  EXPECT_EQ(edge("s11", "a2", "s14"), 1.0);
  EXPECT_EQ(edge("sI", "a1", "s4"), 1.0);
  EXPECT_EQ(edge("sI", "a3", "s6"), 1.0);
  for (const char* s : {"s10", "s11", "s12"}) EXPECT_EQ(m.reward(m.state_index(s), m.action_index("a2")), 1.0);
  EXPECT_EQ(m.reward.sum(), 3.0);
}

TEST(Model, ValidateExamples) {
  const auto ex1 = builtin_example("ex1");
  const auto report = validate(ex1);
  EXPECT_TRUE(report.ok());
  EXPECT_TRUE(report.is_dag_to_absorbing);
  std::vector<Index> expected{ex1.state_index("s4"), ex1.state_index("s5"), ex1.state_index("s6")};
  EXPECT_EQ(report.absorbing_states, expected);
  EXPECT_TRUE(validate(builtin_example("ex2")).is_dag_to_absorbing);
}

TEST(Model, CycleWarns) {
  const auto m = parse_model(R"({"states":["a","b"],"initial":"a","actions":["x"],"observations":["z"],
    "transitions":[{"from":"a","action":"x","to":{"b":1}},{"from":"b","action":"x","to":{"a":1}}]})");
  const auto report = validate(m);
  EXPECT_TRUE(report.ok());
  EXPECT_FALSE(report.is_dag_to_absorbing);
  EXPECT_FALSE(report.warnings.empty());
}

TEST(Model, FullyObservable) {
  const auto m = builtin_example("ex1");
  const auto fo = to_fully_observable(m);
  EXPECT_EQ(fo.observations, m.states);
  EXPECT_TRUE(fo.observation.isApprox(Eigen::MatrixXd::Identity(6, 6)));
  EXPECT_EQ(validate(fo).absorbing_states, validate(m).absorbing_states);
  EXPECT_EQ(to_fully_observable(fo), fo);

  const auto one = parse_model(R"({"states":["s"],"initial":"s","actions":["a"],"observations":["z"],
    "transitions":[{"from":"s","action":"a","to":{"s":1}}]})");
  const auto one_fo = to_fully_observable(one);
  EXPECT_EQ(one_fo.num_observations(), 1);
  EXPECT_EQ(one_fo.observation(0, 0), 1.0);
}
