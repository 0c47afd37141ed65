#pragma once

// Line-oriented protocol description files:
//
//   states: x a b y q
//   inputs: x
//   output: y
//   quiescent: q
//   approx: a
//   voters1: x1 q1
//   transition: a x -> b y
//
// '#' starts a comment. Role lines appear at most once; transitions one per
// line; every token must be a declared state.

#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "popproto/core.hpp"

namespace popproto {

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline bool valid_identifier(const std::string& s) {
  static const std::regex re("[A-Za-z0-9_]+");
  return std::regex_match(s, re);
}

}  // namespace detail

inline Protocol parse_protocol(std::string_view text) {
  struct Line {
    std::size_t number;
    std::string key;
    std::string value;
  };
  std::vector<Line> lines;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::string line = detail::trim(raw);
    if (line.empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string::npos) throw ParseError(number, "expected 'key: value'");
    lines.push_back({number, detail::trim(line.substr(0, colon)), detail::trim(line.substr(colon + 1))});
  }

  Protocol p;
  const Line* states_line = nullptr;
  std::map<std::string, const Line*> role_lines;
  static const std::vector<std::string> kRoleKeys = {"inputs", "output", "quiescent", "approx",
                                                     "voters1"};
  for (const Line& l : lines) {
    if (l.key == "states") {
      if (states_line) throw ParseError(l.number, "'states' declared twice");
      states_line = &l;
    } else if (l.key == "transition") {
      continue;
    } else if (std::find(kRoleKeys.begin(), kRoleKeys.end(), l.key) != kRoleKeys.end()) {
      if (role_lines.contains(l.key)) throw ParseError(l.number, "'" + l.key + "' declared twice");
      role_lines[l.key] = &l;
    } else {
      throw ParseError(l.number, "unknown key '" + l.key + "'");
    }
  }
  if (!states_line) throw ParseError(number, "missing 'states' declaration");

  for (const std::string& name : detail::split_ws(states_line->value)) {
    if (!detail::valid_identifier(name))
      throw ParseError(states_line->number, "invalid state name '" + name + "'");
    if (p.find(name)) throw ParseError(states_line->number, "duplicate state '" + name + "'");
    p.add_state(name);
  }
  if (p.num_states() == 0) throw ParseError(states_line->number, "no states declared");

  auto lookup = [&](const Line& l, const std::string& tok) {
    auto s = p.find(tok);
    if (!s) throw ParseError(l.number, "undeclared state '" + tok + "'");
    return *s;
  };

  for (const Line& l : lines) {
    if (l.key != "transition") continue;
    auto arrow = l.value.find("->");
    if (arrow == std::string::npos) throw ParseError(l.number, "transition needs '->'");
    auto lhs = detail::split_ws(l.value.substr(0, arrow));
    auto rhs = detail::split_ws(l.value.substr(arrow + 2));
    if (lhs.size() != 2 || rhs.size() != 2)
      throw ParseError(l.number, "transition must have two inputs and two outputs");
    Transition t{lookup(l, lhs[0]), lookup(l, lhs[1]), lookup(l, rhs[0]), lookup(l, rhs[1])};
    try {
      p.add_transition(t);
    } catch (const DuplicateTransition& e) {
      throw DuplicateTransition(l.number, e.what());
    }
  }

  Roles roles;
  auto single = [&](const std::string& key) -> std::optional<StateIndex> {
    auto it = role_lines.find(key);
    if (it == role_lines.end()) return std::nullopt;
    auto toks = detail::split_ws(it->second->value);
    if (toks.size() != 1) throw ParseError(it->second->number, "'" + key + "' takes one state");
    return lookup(*it->second, toks[0]);
  };
  if (auto it = role_lines.find("inputs"); it != role_lines.end())
    for (const auto& tok : detail::split_ws(it->second->value))
      roles.inputs.push_back(lookup(*it->second, tok));
  roles.output = single("output");
  roles.quiescent = single("quiescent");
  roles.approx = single("approx");
  if (auto it = role_lines.find("voters1"); it != role_lines.end()) {
    std::vector<StateIndex> v;
    for (const auto& tok : detail::split_ws(it->second->value)) v.push_back(lookup(*it->second, tok));
    roles.voters1 = std::move(v);
  }
  p.set_roles(std::move(roles));
  return p;
}

inline Protocol load_protocol(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open protocol file '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_protocol(buf.str());
}

inline std::string to_text(const Protocol& p) {
  std::ostringstream out;
  auto join = [&](const std::vector<StateIndex>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + p.name(v[i]);
    return s;
  };
  out << "states:";
  for (const auto& n : p.names()) out << ' ' << n;
  out << '\n';
  const Roles& r = p.roles();
  if (!r.inputs.empty()) out << "inputs: " << join(r.inputs) << '\n';
  if (r.output) out << "output: " << p.name(*r.output) << '\n';
  if (r.quiescent) out << "quiescent: " << p.name(*r.quiescent) << '\n';
  if (r.approx) out << "approx: " << p.name(*r.approx) << '\n';
  if (r.voters1) out << "voters1: " << join(*r.voters1) << '\n';
  for (const Transition& t : p.transitions()) out << "transition: " << p.to_string(t) << '\n';
  return out.str();
}

}  // namespace popproto
