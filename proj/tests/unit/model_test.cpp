#include <doctest.h>

#include "agentguard/common/clock.hpp"
#include "agentguard/common/error.hpp"
#include "agentguard/model/attribute.hpp"
#include "agentguard/model/targets.hpp"
#include "agentguard/model/types.hpp"
#include "oracles.hpp"

using namespace agentguard;
using agentguard::testing::Rng;

namespace {

ToolCallEvent event_with_args(Value args) {
  ToolCallEvent e;
  e.call_id = "c-1";
  e.session_id = "s-1";
  e.seq = 1;
  e.principal.agent_id = "agent";
  e.principal.role = "analyst";
  e.tool.name = "read_file";
  e.args = std::move(args);
  return e;
}

AttributePath args_path(std::vector<PathSegment> segs) { return {AttributeRoot::args, std::move(segs)}; }

}  // namespace

TEST_SUITE("model") {

TEST_CASE("principal.role reads the field") {
  auto e = event_with_args(Value::object());
  auto r = resolve_attribute({AttributeRoot::principal, {std::string("role")}}, EvalContext::pre(e));
  REQUIRE(r.has_value());
  CHECK(*r == "analyst");
}

TEST_CASE("missing argument is absent") {
  auto e = event_with_args(Value::object());
  CHECK_FALSE(resolve_attribute(args_path({std::string("command")}), EvalContext::pre(e)).has_value());
}

TEST_CASE("list index then key") {
  auto e = event_with_args(Value::parse(R"({"files":[{"path":"/etc/passwd"}]})"));
  auto r = resolve_attribute(args_path({std::string("files"), std::size_t{0}, std::string("path")}),
                             EvalContext::pre(e));
  REQUIRE(r.has_value());
  CHECK(*r == "/etc/passwd");
}

TEST_CASE("result root is illegal before execution") {
  auto e = event_with_args(Value::object());
  CHECK_THROWS_AS(resolve_attribute({AttributeRoot::result, {std::string("text")}}, EvalContext::pre(e)),
                  IllegalRoot);
  ToolResultEvent res{"c-1", ResultStatus::ok, Value{{"text", "hi"}}, {}};
  auto r = resolve_attribute({AttributeRoot::result, {std::string("text")}}, EvalContext::post(e, res));
  REQUIRE(r.has_value());
  CHECK(*r == "hi");
}

TEST_CASE("resolution agrees with the reference lookup on random trees") {
  Rng rng(7);
  for (int i = 0; i < 3000; ++i) {
    const Value tree = testing::random_tree(rng, 8);
    Value args = tree.is_object() ? tree : Value{{"a", tree}};
    auto segs = testing::random_segments(rng, args, 6);
    auto e = event_with_args(args);
    Resolved got;
    REQUIRE_NOTHROW(got = resolve_attribute(args_path(segs), EvalContext::pre(e)));
    const auto want = testing::reference_lookup(args, segs);
    INFO("args=" << args.dump() << " path=" << args_path(segs).to_string());
    REQUIRE(got.has_value() == want.has_value());
    if (got) CHECK(*got == *want);
  }
}

TEST_CASE("targets: single URL") {
  auto t = extract_targets(Value{{"url", "https://evil.example:8443/x"}});
  REQUIRE(t.size() == 1);
  CHECK(t[0] == NetworkTarget{"https", "evil.example", 8443, "/x"});
}

TEST_CASE("targets: none in plain text") {
  CHECK(extract_targets(Value{{"note", "no links here"}}).empty());
}

TEST_CASE("targets: depth-first order") {
  auto t = extract_targets(Value::parse(R"({"a":"http://a.example","b":{"c":"b.example:22"}})"));
  REQUIRE(t.size() == 2);
  CHECK(t[0].host == "a.example");
  CHECK(t[1] == NetworkTarget{std::nullopt, "b.example", 22, std::nullopt});
}

TEST_CASE("targets: times and ratios are not hosts") {
  CHECK(extract_targets(Value("meet at 12:30, ratio 3.5:1")).empty());
}

TEST_CASE("targets agree with the reference scanner on a generated corpus") {
  Rng rng(11);
  const std::vector<std::string> schemes = {"http", "https", "ftp", "HTTP", "s3"};
  const std::vector<std::string> hosts = {"evil.example", "Api.Example.COM", "localhost", "10.0.0.1",
                                          "a-b.c_d.org", "x.io"};
  const std::vector<std::string> noise = {"hello", "12:30", "3.5:1", "a:b", "word.", "foo:99999",
                                          "::", "http://", "x:0"};
  auto pick = [&](const std::vector<std::string>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  auto coin = [&] { return std::bernoulli_distribution(0.5)(rng); };
  for (int i = 0; i < 500; ++i) {
    Value args = Value::object();
    const int leaves = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int l = 0; l < leaves; ++l) {
      std::string text;
      const int words = std::uniform_int_distribution<int>(0, 5)(rng);
      for (int w = 0; w < words; ++w) {
        std::string token;
        switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
          case 0:
            token = pick(schemes) + "://" + (coin() ? "" : "user@") + pick(hosts);
            if (coin()) token += ":" + std::to_string(std::uniform_int_distribution<int>(1, 65535)(rng));
            if (coin()) token += "/p/" + std::to_string(w);
            if (coin()) token += "?q=1";
            break;
          case 1:
            token = pick(hosts) + ":" + std::to_string(std::uniform_int_distribution<int>(1, 70000)(rng));
            break;
          default:
            token = pick(noise);
        }
        if (coin()) token += pick({",", ".", ";", ""});
        text += (w ? " " : "") + token;
      }
      const std::string key = "k" + std::to_string(l);
      if (coin()) {
        args[key] = text;
      } else {
        args[key] = Value::array({text, Value{{"inner", text}}});
      }
    }
    INFO(args.dump());
    CHECK(extract_targets(args) == testing::reference_targets(args));
    // Re-serializing the tree does not change the answer.
    CHECK(extract_targets(Value::parse(args.dump())) == extract_targets(args));
  }
}

TEST_CASE("timestamps round trip at millisecond precision") {
  const Timestamp t{std::chrono::milliseconds{1'800'000'123'456}};
  const auto text = format_timestamp(t);
  CHECK(text == "2027-01-15T08:02:03.456Z");
  CHECK(parse_timestamp(text) == t);
  CHECK_FALSE(parse_timestamp("yesterday").has_value());
}

TEST_CASE("durations") {
  CHECK(parse_duration("300s") == Millis{300'000});
  CHECK(parse_duration("500ms") == Millis{500});
  CHECK(parse_duration("5m") == Millis{300'000});
  CHECK(parse_duration("1h") == Millis{3'600'000});
  CHECK(parse_duration("250") == Millis{250});
  CHECK_FALSE(parse_duration("soon").has_value());
  for (long ms : {1L, 999L, 1000L, 1500L, 60'000L, 7'200'000L}) {
    CHECK(parse_duration(format_duration(Millis{ms})) == Millis{ms});
  }
}

TEST_CASE("value depth") {
  CHECK(value_depth(Value(1)) == 1);
  CHECK(value_depth(Value::parse(R"({"a":[1]})")) == 3);
}

TEST_CASE("principal invariants") {
  Principal p;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.agent_id = "a";
  p.trust_level = 4;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.trust_level = 3;
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("network target invariants") {
  CHECK_THROWS_AS((NetworkTarget{std::nullopt, "", std::nullopt, std::nullopt}.validate()), ValidationError);
  CHECK_THROWS_AS((NetworkTarget{std::nullopt, "h", 70000, std::nullopt}.validate()), ValidationError);
}

TEST_CASE("decision via review needs a review id") {
  Decision d{Verdict::allow, Via::review, "ok", std::nullopt};
  CHECK_THROWS_AS(d.validate(), ValidationError);
}

TEST_CASE("events survive JSON") {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto e = testing::random_event(rng, "s-9", static_cast<std::uint64_t>(i + 1));
    CHECK(Value(e).get<ToolCallEvent>() == e);
    const auto r = testing::random_result(rng, e.call_id);
    CHECK(Value(r).get<ToolResultEvent>() == r);
  }
}

}  // TEST_SUITE
