#include <gtest/gtest.h>

#include <random>

#include "popproto/core.hpp"
#include "popproto/protocol_io.hpp"

using namespace popproto;

namespace {

Protocol halving_approximator() {
  return parse_protocol(R"(
states: x a b y q
inputs: x
output: y
quiescent: q
approx: a
transition: a x -> b y
transition: b x -> a q
)");
}

}  // namespace

TEST(Configuration, ArithmeticIsChecked) {
  Configuration c(std::vector<Count>{3, 0, 2});
  EXPECT_EQ(c.total(), 5u);
  c.add(1, 4);
  EXPECT_EQ(c[1], 4u);
  EXPECT_EQ(c.total(), 9u);
  c.remove(0, 3);
  EXPECT_EQ(c[0], 0u);
  EXPECT_THROW(c.remove(0), CountError);
  EXPECT_THROW(c.add(2, ~Count(0)), CountError);
  Configuration d(std::vector<Count>{1, 1, 1});
  EXPECT_THROW(d - Configuration(std::vector<Count>{2, 0, 0}), CountError);
  EXPECT_THROW(d + Configuration(2), CountError);
  EXPECT_TRUE(Configuration(std::vector<Count>{0, 1, 1}).leq(d));
  EXPECT_EQ(d.scaled(3), Configuration(std::vector<Count>{3, 3, 3}));
}

TEST(Configuration, SetKeepsTotal) {
  Configuration c(std::vector<Count>{1, 2});
  c.set(0, 10);
  EXPECT_EQ(c.total(), 12u);
  c.set(1, 0);
  EXPECT_EQ(c.total(), 10u);
}

TEST(Protocol, DeltaIsSymmetricAndNullByDefault) {
  Protocol p = halving_approximator();
  StateIndex a = p.index("a"), x = p.index("x"), b = p.index("b"), y = p.index("y"), q = p.index("q");
  EXPECT_EQ(p.delta(a, x), std::make_pair(b, y));
  EXPECT_EQ(p.delta(x, a), std::make_pair(y, b));
  EXPECT_EQ(p.delta(y, q), std::make_pair(y, q));
  EXPECT_EQ(p.delta(x, x), std::make_pair(x, x));
  EXPECT_EQ(p.transitions().size(), 2u);
}

TEST(Protocol, NullRulesAreDropped) {
  Protocol p({"a", "b"});
  EXPECT_FALSE(p.add_transition("a", "b", "b", "a"));
  EXPECT_TRUE(p.transitions().empty());
}

TEST(Protocol, ConflictingRuleForSamePairIsRejected) {
  EXPECT_THROW(parse_protocol("states: a x b y q\ntransition: a x -> b y\ntransition: x a -> a q\n"),
               DuplicateTransition);
  // The same rule written with inputs swapped is a repeat, not a conflict.
  EXPECT_NO_THROW(parse_protocol("states: a x b y\ntransition: a x -> b y\ntransition: x a -> y b\n"));
}

TEST(ProtocolIo, ParseErrorsCarryLineNumbers) {
  try {
    parse_protocol("states: a b\n\ntransition: a c -> b b\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 3u);
  }
  EXPECT_THROW(parse_protocol("transition: a b -> a a\n"), ParseError);
  EXPECT_THROW(parse_protocol("states: a b\ncolour: red\n"), ParseError);
  EXPECT_THROW(parse_protocol("states: a b\ntransition: a b -> a\n"), ParseError);
  EXPECT_THROW(parse_protocol("states: a a\n"), ParseError);
}

TEST(ProtocolIo, RolesAreValidated) {
  EXPECT_THROW(parse_protocol("states: x q\ninputs: x\nquiescent: x\n"), RoleError);
  EXPECT_THROW(parse_protocol("states: x a\ninputs: x\napprox: x\n"), RoleError);
  EXPECT_THROW(parse_protocol("states: x\ninputs: x x\n"), RoleError);
}

TEST(ProtocolIo, TextRoundTrip) {
  Protocol p = halving_approximator();
  EXPECT_EQ(parse_protocol(to_text(p)), p);
}

TEST(ProtocolIo, RandomProtocolsRoundTrip) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 6;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("s" + std::to_string(i));
    Protocol p(names);
    for (int k = 0; k < 10; ++k) {
      Transition t{StateIndex(rng() % n), StateIndex(rng() % n), StateIndex(rng() % n), StateIndex(rng() % n)};
      if (p.rule_for(t.r1, t.r2)) continue;
      p.add_transition(t);
    }
    Roles r;
    r.inputs.push_back(0);
    if (n > 1) r.output = 1;
    p.set_roles(r);
    Protocol back = parse_protocol(to_text(p));
    EXPECT_EQ(back, p);
    EXPECT_EQ(to_text(back), to_text(p));
  }
}

TEST(Execution, ApplyRemovesInputsAndAddsOutputs) {
  Protocol p = halving_approximator();
  Configuration c = p.configuration({{"a", 1}, {"x", 2}});
  Configuration d = apply_transition(c, p.transition(0));
  EXPECT_EQ(d, p.configuration({{"b", 1}, {"x", 1}, {"y", 1}}));
  EXPECT_THROW(apply_transition(d, p.transition(0)), NotApplicable);
  EXPECT_EQ(d.total(), c.total());
}

TEST(Execution, SameStateRuleNeedsTwoAgents) {
  Protocol p = parse_protocol("states: x y q\ntransition: x x -> y q\n");
  EXPECT_FALSE(is_applicable(p.configuration({{"x", 1}}), p.transition(0)));
  EXPECT_TRUE(is_applicable(p.configuration({{"x", 2}}), p.transition(0)));
}

TEST(Execution, PathReportsFirstInvalidStep) {
  Protocol p = halving_approximator();
  Configuration c = p.configuration({{"a", 1}, {"x", 3}});
  std::vector<std::size_t> steps{0, 1, 0, 0};
  try {
    execute_path(p, c, steps);
    FAIL();
  } catch (const InvalidAt& e) {
    EXPECT_EQ(e.index, 3u);
  }
  std::vector<std::size_t> ok{0, 1, 0};
  EXPECT_EQ(execute_path(p, c, ok), p.configuration({{"b", 1}, {"y", 2}, {"q", 1}}));
}

TEST(Execution, AgentCountIsConserved) {
  std::mt19937_64 rng(5);
  Protocol p = halving_approximator();
  for (int trial = 0; trial < 100; ++trial) {
    Configuration c = p.configuration({{"a", 1 + rng() % 5}, {"x", rng() % 40}});
    Count n = c.total();
    for (int step = 0; step < 50; ++step) {
      const Transition& t = p.transition(rng() % 2);
      if (is_applicable(c, t)) fire(c, t);
      ASSERT_EQ(c.total(), n);
    }
  }
}

TEST(Execution, FormatOmitsZeroCounts) {
  Protocol p = halving_approximator();
  EXPECT_EQ(format_configuration(p, p.configuration({{"x", 2}, {"q", 1}})), "{2*x, 1*q}");
  EXPECT_EQ(format_configuration(p, p.empty_configuration()), "{}");
}
