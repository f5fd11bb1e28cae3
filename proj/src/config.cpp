#include "kbrw/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace kbrw {
namespace {

using nlohmann::json;

template <class T>
T require(const json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string(where) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string(where) + ": field '" + key + "' has the wrong type");
  }
}

StepLaw parse_step(const json& j) {
  const auto type = require<std::string>(j, "type", "step");
  if (type == "gaussian") return GaussianStep{require<double>(j, "mean", "step"), require<double>(j, "stddev", "step")};
  if (type != "discrete") throw ValidationError("step: unknown type '" + type + "'");
  DiscreteStep d;
  for (const auto& a : require<json>(j, "atoms", "step")) {
    if (!a.is_array() || a.size() != 2) throw ValidationError("step: atoms must be [value, prob] pairs");
    d.atoms.push_back({a[0].get<double>(), a[1].get<double>()});
  }
  return d;
}

}  // namespace

OffspringLaw parse_law(const json& j) {
  const auto type = require<std::string>(j, "type", "law");
  if (type == "binary_bernoulli") return BinaryBernoulli{require<double>(j, "p", "law")};
  if (type == "product") {
    ProductLaw p;
    for (const auto& c : require<json>(j, "offspring", "law")) {
      if (!c.is_array() || c.size() != 2) throw ValidationError("law: offspring entries must be [count, prob] pairs");
      p.offspring_pmf.push_back({c[0].get<int>(), c[1].get<double>()});
    }
    p.step = parse_step(require<json>(j, "step", "law"));
    return p;
  }
  if (type == "explicit") {
    ExplicitFinite e;
    for (const auto& o : require<json>(j, "outcomes", "law"))
      e.outcomes.push_back({require<std::vector<double>>(o, "displacements", "outcome"), require<double>(o, "prob", "outcome")});
    return e;
  }
  throw ValidationError("law: unknown type '" + type + "'");
}

json law_to_json(const OffspringLaw& law) {
  if (const auto* b = std::get_if<BinaryBernoulli>(&law)) return {{"type", "binary_bernoulli"}, {"p", b->p}};
  if (const auto* p = std::get_if<ProductLaw>(&law)) {
    json off = json::array();
    for (const auto& c : p->offspring_pmf) off.push_back({c.count, c.prob});
    json step;
    if (const auto* g = std::get_if<GaussianStep>(&p->step)) {
      step = {{"type", "gaussian"}, {"mean", g->mean}, {"stddev", g->stddev}};
    } else {
      json atoms = json::array();
      for (const auto& a : std::get<DiscreteStep>(p->step).atoms) atoms.push_back({a.value, a.prob});
      step = {{"type", "discrete"}, {"atoms", atoms}};
    }
    return {{"type", "product"}, {"offspring", off}, {"step", step}};
  }
  json outcomes = json::array();
  for (const auto& o : std::get<ExplicitFinite>(law).outcomes)
    outcomes.push_back({{"displacements", o.displacements}, {"prob", o.prob}});
  return {{"type", "explicit"}, {"outcomes", outcomes}};
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  ExperimentConfig c;
  c.raw = j;
  if (j.contains("law")) c.law = parse_law(j.at("law"));
  if (j.contains("seed")) {
    const auto& s = j.at("seed");
    if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0))
      throw ValidationError("seed must be a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
  if (j.contains("out")) c.out = j.at("out").get<std::string>();
  if (j.contains("escape_cap")) c.escape_cap = j.at("escape_cap").get<std::size_t>();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace kbrw
