#pragma once

// JSON model files.
//
//   {
//     "schema": "bosonic-mip/model", "version": 1,
//     "name": "knapsack", "family": "ilp",
//     "variables": [{"name": "n1", "kind": "integer"},
//                   {"name": "b1", "kind": "binary", "penalty": "mu"},
//                   {"name": "x1", "kind": "continuous", "upper": 3}],
//     "objective": {"terms": [{"coeff": -1, "vars": [{"name": "n1", "power": 1}]}]},
//     "constraints": [{"name": "cap", "terms": [...], "relation": "<=", "rhs": 11,
//                      "penalty": "lambda"}],
//     "penalties": {"lambda": 4, "mu": 6}
//   }
//
// A term with an empty "vars" list is a constant. "relation" is one of
// "<=", "==" or "vanish".

#include <string>

#include <json.hpp>

#include "bosonic_mip/error.hpp"
#include "bosonic_mip/mip.hpp"

namespace bmip {

inline constexpr const char* kModelSchema = "bosonic-mip/model";
inline constexpr int kModelSchemaVersion = 1;

namespace detail {

inline nlohmann::json poly_to_json(const Polynomial& p, const std::vector<Variable>& vars) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [mono, coeff] : p.terms()) {
    nlohmann::json vs = nlohmann::json::array();
    for (const auto& [v, power] : mono) vs.push_back({{"name", vars.at(v).name}, {"power", power}});
    terms.push_back({{"coeff", coeff}, {"vars", vs}});
  }
  return terms;
}

inline Polynomial poly_from_json(const nlohmann::json& terms, const MipModel& m, const std::string& where) {
  if (!terms.is_array()) throw InvalidArgument(where + ": 'terms' must be an array");
  Polynomial p;
  for (const auto& t : terms) {
    const double coeff = t.at("coeff").get<double>();
    if (!std::isfinite(coeff)) throw InvalidArgument(where + ": non-finite coefficient");
    Polynomial::Monomial mono;
    for (const auto& v : t.value("vars", nlohmann::json::array())) {
      const std::string name = v.at("name").get<std::string>();
      const auto idx = m.index_of(name);
      if (!idx) throw InvalidArgument(where + ": unknown variable '" + name + "'");
      const int power = v.value("power", 1);
      if (power < 1) throw InvalidArgument(where + ": powers must be >= 1");
      mono.emplace_back(*idx, power);
    }
    p.add(coeff, std::move(mono));
  }
  return p;
}

}  // namespace detail

inline nlohmann::json model_to_json(const MipModel& m) {
  nlohmann::json j;
  j["schema"] = kModelSchema;
  j["version"] = kModelSchemaVersion;
  j["name"] = m.name;
  j["family"] = m.family;
  j["variables"] = nlohmann::json::array();
  for (const Variable& v : m.variables) {
    nlohmann::json jv = {{"name", v.name}, {"kind", to_string(v.kind)}};
    if (v.kind == VarKind::Binary) jv["penalty"] = v.penalty;
    if (v.upper) jv["upper"] = *v.upper;
    j["variables"].push_back(jv);
  }
  j["objective"] = {{"terms", detail::poly_to_json(m.objective, m.variables)}};
  j["constraints"] = nlohmann::json::array();
  for (const Constraint& c : m.constraints)
    j["constraints"].push_back({{"name", c.name},
                                {"terms", detail::poly_to_json(c.lhs, m.variables)},
                                {"relation", to_string(c.relation)},
                                {"rhs", c.rhs},
                                {"penalty", c.penalty}});
  j["penalties"] = m.penalties;
  return j;
}

inline MipModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema", std::string(kModelSchema)) != kModelSchema)
      throw InvalidArgument("model: unexpected schema '" + j.at("schema").get<std::string>() + "'");
    if (j.value("version", kModelSchemaVersion) != kModelSchemaVersion)
      throw InvalidArgument("model: unsupported schema version " + std::to_string(j.at("version").get<int>()));
    MipModel m;
    m.name = j.value("name", std::string("model"));
    m.family = j.value("family", std::string());
    for (const auto& v : j.at("variables")) {
      m.add_variable(v.at("name").get<std::string>(), parse_var_kind(v.at("kind").get<std::string>()), v.value("penalty", std::string("mu")));
      if (v.contains("upper")) m.variables.back().upper = v.at("upper").get<double>();
    }
    if (j.contains("objective")) m.objective = detail::poly_from_json(j.at("objective").at("terms"), m, "objective");
    std::size_t k = 0;
    for (const auto& c : j.value("constraints", nlohmann::json::array())) {
      Constraint con;
      con.name = c.value("name", "c" + std::to_string(++k));
      con.lhs = detail::poly_from_json(c.at("terms"), m, "constraint '" + con.name + "'");
      con.relation = parse_relation(c.at("relation").get<std::string>());
      con.rhs = c.value("rhs", 0.0);
      con.penalty = c.value("penalty", std::string("lambda"));
      m.constraints.push_back(std::move(con));
    }
    const nlohmann::json penalties = j.value("penalties", nlohmann::json::object());
    for (const auto& [key, w] : penalties.items()) m.penalties[key] = w.get<double>();
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("model: malformed JSON: ") + e.what());
  }
}

}  // namespace bmip
