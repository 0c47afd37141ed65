#include <gtest/gtest.h>

#include <random>

#include "popproto/protocols.hpp"
#include "popproto/sim.hpp"

using namespace popproto;

namespace {

RunResult simulate(const ProtocolInstance& in, const InputVector& m, Count a, std::uint64_t seed) {
  Rng rng(seed);
  return run_accelerated(in.protocol, in.initial(m, a), in.stop_condition(), rng);
}

std::int64_t y_of(const ProtocolInstance& in, const RunResult& r) {
  return std::int64_t(r.final_config[*in.protocol.roles().output]);
}

}  // namespace

TEST(Builtins, AllNamesResolve) {
  for (const auto& name : builtin_names()) {
    ProtocolInstance in = builtin(name);
    EXPECT_EQ(in.id, name);
  }
  EXPECT_THROW(builtin("nope"), UnknownName);
}

TEST(Builtins, ExactFunctionsCertify) {
  EXPECT_TRUE(certify(builtin("double"), input_grid(1, 6)).all_pass());
  EXPECT_TRUE(certify(builtin("halve_slow"), input_grid(1, 8)).all_pass());
  EXPECT_TRUE(certify(builtin("subtract"), input_grid(2, 5)).all_pass());
  EXPECT_TRUE(certify(builtin("halve_fast"), input_grid(1, 8), {1, 2, 3}).all_pass());
}

TEST(Builtins, HalveFastTighterThanDeclaredRange) {
  ProtocolInstance in = builtin("halve_fast");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RunResult r = simulate(in, {101}, 7, seed);
    std::int64_t y = y_of(in, r);
    EXPECT_GE(y, 51);
    EXPECT_LE(y, 54);
    EXPECT_TRUE(in.expected({101}, 7).contains(y));
  }
}

TEST(Builtins, SubtractDomainIsEnforced) {
  ProtocolInstance in = builtin("subtract");
  EXPECT_FALSE(in.in_domain({1, 2}));
  EXPECT_THROW(in.initial({1, 2}), DomainError);
  EXPECT_THROW(in.initial({1}), DimensionMismatch);
  EXPECT_THROW(in.initial({3, 1}, 1), DomainError);
}

TEST(Builtins, ApproximatorNeedsA) {
  ProtocolInstance in = builtin("halve_fast");
  EXPECT_THROW(in.initial({10}, 0), DomainError);
  EXPECT_EQ(in.initial({10}, 2).total(), 12u);
}

TEST(NLinear, StateCountAndExactness) {
  ProtocolInstance in = compile_nlinear({4, 1, 2});
  EXPECT_EQ(in.id, "nlinear(4;1;2)");
  // x1 x2 x3 q y plus c-2 chain states for c = 4.
  EXPECT_EQ(in.protocol.num_states(), 7u);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunResult r = simulate(in, {25, 50, 12}, 0, seed);
    EXPECT_EQ(y_of(in, r), 4 * 25 + 50 + 2 * 12);
    EXPECT_EQ(r.stop_reason, StopReason::StopConditionMet);
  }
  EXPECT_THROW(compile_nlinear({1, -1}), NonNaturalCoefficient);
  EXPECT_THROW(compile_nlinear({}), DomainError);
}

TEST(NLinear, CertifiesSmallInputs) {
  for (auto c : std::vector<std::vector<std::int64_t>>{{0}, {1}, {3}, {2, 0}, {1, 3}}) {
    ProtocolInstance in = compile_nlinear(c);
    EXPECT_TRUE(certify(in, input_grid(c.size(), 6 / c.size() + 1)).all_pass()) << in.id;
  }
}

TEST(NLinear, RandomCoefficientsSimulateExactly) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t k = 1 + rng() % 3;
    std::vector<std::int64_t> c(k);
    InputVector m(k);
    std::int64_t want = 0;
    for (std::size_t i = 0; i < k; ++i) {
      c[i] = std::int64_t(rng() % 6);
      m[i] = rng() % 40;
      want += c[i] * std::int64_t(m[i]);
    }
    ProtocolInstance in = compile_nlinear(c);
    if (in.initial(m).total() < 2) continue;
    EXPECT_EQ(y_of(in, simulate(in, m, 0, rng())), want) << in.id;
  }
}

TEST(QLinear, Layout) {
  ProtocolInstance in = compile_qlinear_approx(parse_linear_spec("2/3,1/2,1"));
  EXPECT_EQ(in.id, "qlinear(2/3;1/2;1/1)");
  const Protocol& p = in.protocol;
  for (auto name : {"x1", "x2", "x3", "q", "y", "a", "y1", "y2", "y3", "a_0", "a_1", "a_00", "a_01", "a_10",
                    "a_11", "a1_1", "a1_2", "a1_3", "a2_1", "a2_2", "a3_1"})
    EXPECT_TRUE(p.find(name).has_value()) << name;
  EXPECT_EQ(p.name(*p.roles().approx), "a");
  EXPECT_THROW(compile_qlinear_approx(parse_linear_spec("1,-1/2")), NegativeCoefficient);
}

TEST(QLinear, CertifiesSmallInputs) {
  for (std::string spec : {"1/2", "2/3", "1", "3/2", "1/2,1/3"}) {
    ProtocolInstance in = compile_qlinear_approx(parse_linear_spec(spec));
    auto inputs = in.arity == 1 ? input_grid(1, 6) : input_grid(2, 3);
    EXPECT_TRUE(certify(in, inputs, {1, 2}).all_pass()) << spec;
  }
}

TEST(QLinear, SimulatedOutputsInsideErrorBand) {
  ProtocolInstance two_thirds = compile_qlinear_approx(parse_linear_spec("2/3"));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::int64_t y = y_of(two_thirds, simulate(two_thirds, {9}, 1, seed));
    EXPECT_GE(y, 6);
    EXPECT_LE(y, 7);
  }
  ProtocolInstance half = compile_qlinear_approx(parse_linear_spec("1/2"));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::int64_t y = y_of(half, simulate(half, {1000}, 50, seed));
    EXPECT_LE(std::abs(y - 500), 50);
  }
  ProtocolInstance one = compile_qlinear_approx(parse_linear_spec("1"));
  for (std::uint64_t seed = 0; seed < 5; ++seed) EXPECT_EQ(y_of(one, simulate(one, {37}, 3, seed)), 37);
}

TEST(QLinear, QuiescentSupplyIsLinear) {
  std::mt19937_64 rng(23);
  for (std::string spec : {"1/2", "5/3,1/4", "2,7/5,1/3"}) {
    ProtocolInstance in = compile_qlinear_approx(parse_linear_spec(spec));
    for (int trial = 0; trial < 50; ++trial) {
      InputVector m(in.arity);
      Count norm = 0;
      for (auto& x : m) norm += x = rng() % 1000;
      Count a = 1 + rng() % 50;
      EXPECT_LE(double(in.default_q0(m, a)), in.q0_constant * double(norm + a)) << spec;
    }
  }
}

TEST(QLinear, ErrorIsOneSidedAboveFloor) {
  ProtocolInstance in = compile_qlinear_approx(parse_linear_spec("1/3"));
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Count m = 10 + rng() % 200, a = 1 + rng() % 5;
    std::int64_t y = y_of(in, simulate(in, {m}, a, rng()));
    std::int64_t f = std::int64_t(m / 3);
    EXPECT_GE(y, f);
    EXPECT_LE(y, f + std::int64_t(a));
  }
}

TEST(Predicates, StopWhenUnanimousAndCorrect) {
  ProtocolInstance maj = builtin("majority");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunResult r = simulate(maj, {30, 20}, 0, seed);
    EXPECT_EQ(output_value(maj.convention(), r.final_config), 1);
  }
  ProtocolInstance par = builtin("parity");
  for (Count m : {5, 6, 17, 40}) {
    RunResult r = simulate(par, {m}, 0, m);
    EXPECT_EQ(output_value(par.convention(), r.final_config), std::int64_t(m % 2));
  }
}
