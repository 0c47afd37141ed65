#pragma once

// Command-line front end: simulate, verify, surgery, experiment.
//
// Exit codes: 0 pass, 1 verification failure, 2 usage or I/O error,
// 3 surgery infeasible.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "popproto/protocol_io.hpp"
#include "popproto/protocols.hpp"
#include "popproto/sim.hpp"
#include "popproto/surgery.hpp"
#include "popproto/verify.hpp"

namespace popproto::cli {

enum ExitCode { kPass = 0, kVerifyFailed = 1, kUsage = 2, kInfeasible = 3 };

inline constexpr const char* kCsvHeader =
    "protocol,n,input,a,seed,trial,interactions,parallel_time,y_count,stop_reason";

struct UsageError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Protocol sources

struct Source {
  std::string file, builtin, nlinear, qlinear;
};

/// Instance for a bare protocol file: no oracle, q0 = 0, runs stop on silence.
inline ProtocolInstance instance_from_protocol(Protocol p, std::string id) {
  ProtocolInstance in;
  in.id = std::move(id);
  in.arity = p.roles().inputs.size();
  if (p.roles().voters1)
    in.kind = InstanceKind::Predicate;
  else if (p.roles().approx)
    in.kind = InstanceKind::ApproxFunction;
  in.a0 = p.roles().approx ? 1 : 0;
  in.protocol = std::move(p);
  return in;
}

inline ProtocolInstance resolve(const Source& s) {
  int given = !s.file.empty() + !s.builtin.empty() + !s.nlinear.empty() + !s.qlinear.empty();
  if (given != 1)
    throw UsageError("give exactly one of --protocol, --builtin, --compile-nlinear, --compile-qlinear");
  if (!s.file.empty()) {
    auto slash = s.file.find_last_of('/');
    return instance_from_protocol(load_protocol(s.file), slash == std::string::npos ? s.file : s.file.substr(slash + 1));
  }
  if (!s.builtin.empty()) return builtin(s.builtin);
  if (!s.nlinear.empty()) {
    std::vector<std::int64_t> c;
    for (const auto& r : parse_linear_spec(s.nlinear).coefficients) {
      if (r.denominator() != 1)
        throw NonNaturalCoefficient("coefficient " + std::to_string(r.numerator()) + "/" +
                                    std::to_string(r.denominator()) + " is not a natural number");
      c.push_back(r.numerator());
    }
    return compile_nlinear(c);
  }
  return compile_qlinear_approx(parse_linear_spec(s.qlinear));
}

inline void add_source_options(CLI::App* cmd, Source& s) {
  cmd->add_option("--protocol", s.file, "protocol description file");
  cmd->add_option("--builtin", s.builtin, "builtin protocol name");
  cmd->add_option("--compile-nlinear", s.nlinear, "natural coefficients, e.g. 4,1,2");
  cmd->add_option("--compile-qlinear", s.qlinear, "nonnegative rational coefficients, e.g. 2/3,1/2");
}

// ---------------------------------------------------------------------------
// Input vectors

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

inline Count parse_count(const std::string& tok) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (tok.empty() || tok[0] == '-') throw std::invalid_argument(tok);
    v = std::stoull(tok, &used);
  } catch (const std::logic_error&) {
    throw UsageError("bad count '" + tok + "'");
  }
  if (used != tok.size()) throw UsageError("bad count '" + tok + "'");
  return Count(v);
}

inline std::int64_t parse_int(const std::string& tok) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(tok, &used);
  } catch (const std::logic_error&) {
    throw UsageError("bad integer '" + tok + "'");
  }
  if (used != tok.size()) throw UsageError("bad integer '" + tok + "'");
  return v;
}

/// "x=1000" or "x1=30,x2=20" by input-state name; "1000" or "30,20" positionally.
inline InputVector parse_input(const ProtocolInstance& in, const std::string& text) {
  const auto& inputs = in.protocol.roles().inputs;
  InputVector m(inputs.size(), 0);
  auto parts = split(text, ',');
  bool named = text.find('=') != std::string::npos;
  if (!named) {
    if (parts.size() != inputs.size())
      throw UsageError(in.id + " takes " + std::to_string(inputs.size()) + " inputs");
    for (std::size_t i = 0; i < parts.size(); ++i) m[i] = parse_count(parts[i]);
    return m;
  }
  std::vector<bool> seen(inputs.size(), false);
  for (const auto& part : parts) {
    auto eq = part.find('=');
    if (eq == std::string::npos) throw UsageError("expected name=count in '" + part + "'");
    std::string name = part.substr(0, eq);
    auto s = in.protocol.find(name);
    auto it = s ? std::find(inputs.begin(), inputs.end(), *s) : inputs.end();
    if (it == inputs.end()) throw UsageError("'" + name + "' is not an input state of " + in.id);
    std::size_t i = std::size_t(it - inputs.begin());
    if (seen[i]) throw UsageError("input '" + name + "' given twice");
    seen[i] = true;
    m[i] = parse_count(part.substr(eq + 1));
  }
  return m;
}

inline std::string format_input(const ProtocolInstance& in, const InputVector& m) {
  std::string s;
  const auto& inputs = in.protocol.roles().inputs;
  for (std::size_t i = 0; i < m.size(); ++i)
    s += (i ? ";" : "") + in.protocol.name(inputs[i]) + "=" + std::to_string(m[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Trials and CSV rows

struct TrialPlan {
  ProtocolInstance instance;
  InputVector m;
  Count a = 0;
  std::optional<Count> q0;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  Engine engine = Engine::Accelerated;
  std::optional<std::uint64_t> budget;
};

inline std::string fixed6(std::uint64_t interactions, Count n) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", double(interactions) / double(n));
  return buf;
}

/// One CSV row per trial, in trial order. Trial i uses derive_seed(seed, i).
inline std::string run_plan(const TrialPlan& plan, unsigned workers) {
  const ProtocolInstance& in = plan.instance;
  Configuration start = in.initial(plan.m, plan.a, plan.q0);
  StopCondition stop = in.stop_condition();
  if (plan.budget) stop = first_of(stop, StopCondition::interaction_budget(*plan.budget));
  OutputConvention conv = in.convention();
  std::vector<std::string> rows(plan.trials);
  std::string input = format_input(in, plan.m);
  parallel_for(plan.trials, workers, [&](std::size_t i) {
    std::uint64_t seed = derive_seed(plan.seed, i);
    Rng rng(seed);
    RunResult r = run(plan.engine, in.protocol, start, stop, rng);
    std::ostringstream row;
    row << in.id << ',' << r.n << ',' << input << ',' << plan.a << ',' << seed << ',' << i << ','
        << r.interactions << ',' << fixed6(r.interactions, r.n) << ',' << output_value(conv, r.final_config)
        << ',' << to_string(r.stop_reason) << '\n';
    rows[i] = row.str();
  });
  std::string out;
  for (auto& r : rows) out += r;
  return out;
}

inline Engine parse_engine(const std::string& s) {
  if (s == "accelerated") return Engine::Accelerated;
  if (s == "naive") return Engine::Naive;
  throw UsageError("engine must be 'accelerated' or 'naive'");
}

/// Opens `path` for writing, or returns the fallback stream for an empty path.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (path.empty()) return;
    file_.open(path, std::ios::out | std::ios::trunc);
    if (!file_) throw Error("cannot write '" + path + "'");
    os_ = &file_;
  }
  std::ostream& get() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

// ---------------------------------------------------------------------------
// Experiment configs
//
// {
//   "seed": 7, "trials": 20, "engine": "accelerated", "budget": 1000000,
//   "sweeps": [
//     {"builtin": "halve_fast", "n": [4096, 16384], "a_divisor": 11},
//     {"builtin": "halve_slow", "m": [1000, 10000]},
//     {"compile_nlinear": "4,1,2", "inputs": ["250,500,125"], "trials": 5},
//     {"protocol": "protocols/majority.pp", "inputs": ["x1=3,x2=2"]}
//   ]
// }
//
// "n" fixes the population of a one-input instance with q0 = 0 (m = n - a,
// a = n / a_divisor); "m" lists one-input values with a = m / a_divisor or a
// fixed "a"; "inputs" lists input strings. Per-sweep "trials", "seed",
// "engine", "budget" override the top level.

inline std::vector<TrialPlan> expand_experiment(const nlohmann::json& cfg) {
  std::vector<TrialPlan> plans;
  auto top_trials = cfg.value("trials", std::size_t(10));
  auto top_seed = cfg.value("seed", std::uint64_t(1));
  auto top_engine = cfg.value("engine", std::string("accelerated"));
  std::optional<std::uint64_t> top_budget;
  if (cfg.contains("budget")) top_budget = cfg.at("budget").get<std::uint64_t>();
  if (!cfg.contains("sweeps")) return plans;
  std::size_t point = 0;
  for (const auto& sw : cfg.at("sweeps")) {
    Source src;
    src.file = sw.value("protocol", "");
    src.builtin = sw.value("builtin", "");
    src.nlinear = sw.value("compile_nlinear", "");
    src.qlinear = sw.value("compile_qlinear", "");
    ProtocolInstance inst = resolve(src);
    TrialPlan base;
    base.instance = inst;
    base.trials = sw.value("trials", top_trials);
    base.engine = parse_engine(sw.value("engine", top_engine));
    base.budget = sw.contains("budget") ? std::optional(sw.at("budget").get<std::uint64_t>()) : top_budget;
    if (sw.contains("q0")) base.q0 = sw.at("q0").get<Count>();
    std::uint64_t sweep_seed = sw.value("seed", top_seed);
    Count divisor = sw.value("a_divisor", Count(0));
    std::optional<Count> fixed_a;
    if (sw.contains("a")) fixed_a = sw.at("a").get<Count>();
    auto add = [&](InputVector m, Count a) {
      TrialPlan p = base;
      p.m = std::move(m);
      p.a = a;
      p.seed = derive_seed(sweep_seed, point++);
      plans.push_back(std::move(p));
    };
    if (sw.contains("n")) {
      if (inst.arity != 1) throw UsageError("'n' sweeps need a one-input protocol");
      for (Count n : sw.at("n").get<std::vector<Count>>()) {
        Count a = fixed_a.value_or(divisor ? n / divisor : 0);
        if (a > n) throw UsageError("a exceeds n");
        add({n - a}, a);
      }
    }
    if (sw.contains("m")) {
      if (inst.arity != 1) throw UsageError("'m' sweeps need a one-input protocol");
      for (Count m : sw.at("m").get<std::vector<Count>>()) add({m}, fixed_a.value_or(divisor ? m / divisor : 0));
    }
    if (sw.contains("inputs"))
      for (const auto& s : sw.at("inputs").get<std::vector<std::string>>())
        add(parse_input(inst, s), fixed_a.value_or(0));
  }
  return plans;
}

// ---------------------------------------------------------------------------
// Surgery helpers

/// "5*1,2,3*4": 1-based rule numbers in declaration order, optional repeat.
inline std::vector<std::size_t> parse_steps(const Protocol& p, const std::string& text) {
  std::vector<std::size_t> steps;
  for (const auto& tok : split(text, ',')) {
    auto star = tok.find('*');
    std::int64_t rule = parse_int(star == std::string::npos ? tok : tok.substr(0, star));
    Count reps = star == std::string::npos ? 1 : parse_count(tok.substr(star + 1));
    if (rule < 1 || std::size_t(rule) > p.transitions().size())
      throw UsageError("rule number " + std::to_string(rule) + " out of range");
    steps.insert(steps.end(), reps, std::size_t(rule - 1));
  }
  return steps;
}

inline Configuration parse_configuration(const Protocol& p, const std::string& text) {
  Configuration c = p.empty_configuration();
  for (const auto& part : split(text, ',')) {
    auto eq = part.find('=');
    if (eq == std::string::npos) throw UsageError("expected state=count in '" + part + "'");
    auto s = p.find(part.substr(0, eq));
    if (!s) throw UsageError("unknown state '" + part.substr(0, eq) + "'");
    c.add(*s, parse_count(part.substr(eq + 1)));
  }
  return c;
}

inline IntVector parse_int_list(const std::string& text) {
  IntVector v;
  for (const auto& tok : split(text, ',')) v.push_back(parse_int(tok));
  return v;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"population protocol toolkit"};
  app.fallthrough();
  app.require_subcommand(1);
  unsigned workers = default_workers();
  app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run randomized trials and write CSV rows");
  Source sim_src;
  add_source_options(sim, sim_src);
  std::string sim_input, sim_m, sim_out, sim_engine = "accelerated";
  Count sim_a = 0;
  std::optional<Count> sim_q0;
  std::optional<std::uint64_t> sim_budget;
  std::size_t sim_trials = 1;
  std::uint64_t sim_seed = 1;
  bool sim_header = true;
  sim->add_option("--input", sim_input, "x=1000 or x1=30,x2=20");
  sim->add_option("--m", sim_m, "input values in input order, e.g. 1000 or 30,20");
  sim->add_option("--a", sim_a, "approximation count");
  sim->add_option("--q0", sim_q0, "quiescent count (default: the instance's q0)");
  sim->add_option("--trials", sim_trials)->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed);
  sim->add_option("--engine", sim_engine, "accelerated or naive");
  sim->add_option("--budget", sim_budget, "interaction budget per trial");
  sim->add_option("--out", sim_out, "CSV path (default stdout)");
  sim->add_flag("!--no-header", sim_header, "omit the CSV header");

  // verify
  auto* ver = app.add_subcommand("verify", "exhaustive stable-computation check over an input grid");
  Source ver_src;
  add_source_options(ver, ver_src);
  Count ver_max_total = 4, ver_a_max = 2;
  std::optional<Count> ver_max_each, ver_q0;
  std::string ver_linear, ver_predicate, ver_out;
  std::size_t ver_max_configs = 1'000'000;
  ver->add_option("--max-total", ver_max_total, "largest input total");
  ver->add_option("--max-each", ver_max_each, "largest single input");
  ver->add_option("--a-max", ver_a_max, "approximation counts a0..a-max");
  ver->add_option("--q0", ver_q0, "fixed quiescent count");
  ver->add_option("--linear", ver_linear, "oracle for protocol files: sum of floor(c_i m_i)");
  ver->add_option("--predicate", ver_predicate, "oracle for protocol files: majority, parity, equality");
  ver->add_option("--max-configs", ver_max_configs, "exploration budget per input");
  ver->add_option("--out", ver_out, "JSON report path (default stdout)");

  // surgery
  auto* sur = app.add_subcommand("surgery", "Δ-ordering, matrices, and path surgery traces");
  std::string sur_file, sur_delta, sur_elim, sur_produce, sur_push, sur_t, sur_origin, sur_steps, sur_out;
  std::int64_t sur_b1 = 0, sur_b = 0;
  std::optional<Count> sur_buffer;
  sur->add_option("--protocol", sur_file, "protocol description file")->required();
  sur->add_option("--delta", sur_delta, "comma-separated Δ states (empty or ∅ for none)")->required();
  sur->add_option("--eliminate", sur_elim, "cΔ in Δ order");
  sur->add_option("--produce", sur_produce, "eΔ in Δ order (needs --host-origin/--host-steps)");
  sur->add_option("--push", sur_push, "dΔ in Δ order (needs --t-delta and a host)");
  sur->add_option("--t-delta", sur_t, "tΔ for --push");
  sur->add_option("--host-origin", sur_origin, "host origin, e.g. d1=10,g1=10");
  sur->add_option("--host-steps", sur_steps, "host rules, 1-based, e.g. 1*7,2*16");
  sur->add_option("--b1", sur_b1, "bound on oΔ");
  sur->add_option("--b", sur_b, "bottleneck bound b for b2 diagnostics");
  sur->add_option("--buffer", sur_buffer, "uniform buffer count per state for --produce");
  sur->add_option("--out", sur_out, "JSON path (default stdout)");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a JSON sweep config and write CSV");
  std::string exp_config, exp_out;
  exp->add_option("config", exp_config, "experiment config (JSON)")->required();
  exp->add_option("--out", exp_out, "CSV path (overrides the config's \"output\")");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (*sim) {
      ProtocolInstance in = resolve(sim_src);
      if (!sim_input.empty() && !sim_m.empty()) throw UsageError("give --input or --m, not both");
      TrialPlan plan;
      plan.m = parse_input(in, sim_input.empty() ? sim_m : sim_input);
      plan.instance = std::move(in);
      plan.a = sim_a;
      plan.q0 = sim_q0;
      plan.trials = sim_trials;
      plan.seed = sim_seed;
      plan.engine = parse_engine(sim_engine);
      plan.budget = sim_budget;
      std::string rows = run_plan(plan, workers);
      Sink sink(sim_out, out);
      if (sim_header) sink.get() << kCsvHeader << '\n';
      sink.get() << rows;
      return kPass;
    }

    if (*ver) {
      ProtocolInstance in = resolve(ver_src);
      if (!ver_linear.empty()) {
        LinearSpec spec = parse_linear_spec(ver_linear);
        if (spec.coefficients.size() != in.arity) throw UsageError("--linear has the wrong number of coefficients");
        in.kind = InstanceKind::ExactFunction;
        in.expected = [spec](const InputVector& m, Count) {
          std::int64_t v = spec.evaluate(std::vector<std::int64_t>(m.begin(), m.end()));
          return Expected{v, v};
        };
      } else if (!ver_predicate.empty()) {
        ProtocolInstance ref = builtin(ver_predicate);
        if (ref.kind != InstanceKind::Predicate) throw UsageError("'" + ver_predicate + "' is not a predicate");
        if (ref.arity != in.arity) throw UsageError("predicate arity differs from the protocol's");
        in.expected = ref.expected;
        in.domain = ref.domain;
      }
      if (!in.expected) throw UsageError("protocol files need --linear or --predicate");
      ExploreLimits limits;
      limits.max_configs = ver_max_configs;
      std::vector<Count> as;
      for (Count a = std::max<Count>(in.a0, 1); a <= ver_a_max; ++a) as.push_back(a);
      auto grid = input_grid(in.arity, ver_max_total, ver_max_each);
      VerificationReport rep = certify(in, grid, as, limits, workers, ver_q0);
      nlohmann::json j = to_json(in.protocol, rep);
      j["protocol"] = in.id;
      Sink sink(ver_out, out);
      sink.get() << j.dump(2) << '\n';
      return rep.all_pass() ? kPass : kVerifyFailed;
    }

    if (*sur) {
      Protocol p = load_protocol(sur_file);
      std::vector<StateIndex> delta;
      if (sur_delta != "∅")
        for (const auto& name : split(sur_delta, ',')) {
          auto s = p.find(name);
          if (!s) throw UsageError("unknown state '" + name + "' in --delta");
          delta.push_back(*s);
        }
      nlohmann::json j;
      Sink sink(sur_out, out);
      if (delta.empty()) {
        j = {{"delta", nlohmann::json::array()}, {"rules", nlohmann::json::array()}};
        sink.get() << j.dump(2) << '\n';
        return kPass;
      }
      try {
        DeltaOrdering ord = find_delta_ordering(p, delta);
        SurgeryMatrices m = build_matrices(p, ord);
        j["ordering"] = to_json(p, ord);
        j["matrices"] = to_json(p, m);
        auto host = [&] {
          if (sur_origin.empty()) throw UsageError("host path needs --host-origin");
          return TransitionSequence{parse_configuration(p, sur_origin), parse_steps(p, sur_steps)};
        };
        if (!sur_elim.empty()) j["elimination"] = to_json(p, eliminate_delta(p, ord, m, parse_int_list(sur_elim)));
        if (!sur_produce.empty()) {
          std::optional<Configuration> buffer;
          if (sur_buffer) buffer = Configuration(std::vector<Count>(p.num_states(), *sur_buffer));
          j["production"] = to_json(p, ord, produce_e(p, ord, m, host(), parse_int_list(sur_produce), sur_b1, buffer));
        }
        if (!sur_push.empty()) {
          if (sur_t.empty()) throw UsageError("--push needs --t-delta");
          j["push"] = to_json(p, ord, push_delta(p, ord, m, host(), parse_int_list(sur_push), parse_int_list(sur_t),
                                                 sur_b1, sur_b));
        }
      } catch (const NotOrderable& e) {
        j = {{"error", "NotOrderable"}, {"detail", e.what()}, {"remaining", e.remaining}};
        sink.get() << j.dump(2) << '\n';
        err << "error: " << e.what() << '\n';
        return kInfeasible;
      } catch (const InsufficientOccurrences& e) {
        j["error"] = "InsufficientOccurrences";
        j["detail"] = e.what();
        sink.get() << j.dump(2) << '\n';
        err << "error: " << e.what() << '\n';
        return kInfeasible;
      } catch (const BufferTooSmall& e) {
        j["error"] = "BufferTooSmall";
        j["detail"] = e.what();
        sink.get() << j.dump(2) << '\n';
        err << "error: " << e.what() << '\n';
        return kInfeasible;
      } catch (const InvalidEdit& e) {
        j["error"] = "InvalidEdit";
        j["detail"] = e.what();
        sink.get() << j.dump(2) << '\n';
        err << "error: " << e.what() << '\n';
        return kInfeasible;
      }
      sink.get() << j.dump(2) << '\n';
      return kPass;
    }

    if (*exp) {
      std::ifstream f(exp_config);
      if (!f) throw Error("cannot open config '" + exp_config + "'");
      nlohmann::json cfg;
      try {
        cfg = nlohmann::json::parse(f);
      } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("bad config: ") + e.what());
      }
      std::vector<TrialPlan> plans = expand_experiment(cfg);
      std::string path = exp_out.empty() ? cfg.value("output", std::string()) : exp_out;
      Sink sink(path, out);
      sink.get() << kCsvHeader << '\n' << std::flush;
      for (const auto& plan : plans) {
        std::string rows = run_plan(plan, workers);
        sink.get() << rows << std::flush;
      }
      return kPass;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace popproto::cli
