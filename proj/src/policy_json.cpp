// SPDX-License-Identifier: Apache-2.0
#include <set>
#include <string>

#include "lrpolicy/error.hpp"
#include "lrpolicy/json_io.hpp"

namespace lrpolicy {

using nlohmann::json;

namespace {

template <class... Ts> struct Overloaded : Ts... { using Ts::operator()...; };
template <class... Ts> Overloaded(Ts...) -> Overloaded<Ts...>;

class Reader {
public:
  Reader(const json &doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ParseError(where() + "policy must be a JSON object");
  }

  // Checks the field set up front so one error lists every missing field.
  void expect(std::set<std::string> required, std::set<std::string> optional = {}) {
    std::string missing;
    for (const auto &name : required) {
      if (!doc_.contains(name)) missing += (missing.empty() ? "" : ", ") + name;
    }
    if (!missing.empty()) {
      throw ParseError(where() + type() + " is missing field(s): " + missing);
    }
    for (const auto &[key, value] : doc_.items()) {
      if (key == "type") continue;
      if (!required.count(key) && !optional.count(key)) {
        throw ParseError(where() + "unexpected field '" + key + "' for " + type());
      }
    }
  }

  double real(const char *name) const {
    const auto &v = doc_.at(name);
    if (!v.is_number()) throw ParseError(where() + "field '" + name + "' must be a number");
    return v.get<double>();
  }

  Iter integer(const char *name) const { return as_integer(doc_.at(name), name); }

  Iter as_integer(const json &v, const std::string &name) const {
    if (!v.is_number_integer()) {
      throw ParseError(where() + "field '" + name + "' must be an integer");
    }
    return v.get<Iter>();
  }

  std::string type() const {
    const auto it = doc_.find("type");
    if (it == doc_.end() || !it->is_string()) {
      throw ParseError(where() + "policy needs a string field 'type'");
    }
    return it->get<std::string>();
  }

  const json &doc() const { return doc_; }
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }
  const std::string &path() const { return path_; }

private:
  const json &doc_;
  std::string path_;
};

BasePolicy read_base(const json &doc, const std::string &path) {
  Reader r(doc, path);
  const std::string type = r.type();
  if (type == "FIX") {
    r.expect({"k"});
    return Fix{r.real("k")};
  }
  if (type == "STEP") {
    r.expect({"k", "gamma", "l"});
    return Step{r.real("k"), r.real("gamma"), r.integer("l")};
  }
  if (type == "NSTEP") {
    r.expect({"k", "gamma", "boundaries"});
    const auto &b = doc.at("boundaries");
    if (!b.is_array()) throw ParseError(r.where() + "field 'boundaries' must be an array");
    NStep p{r.real("k"), r.real("gamma"), {}};
    for (const auto &v : b) p.boundaries.push_back(r.as_integer(v, "boundaries"));
    return p;
  }
  if (type == "EXP") {
    r.expect({"k", "gamma"});
    return Exp{r.real("k"), r.real("gamma")};
  }
  if (type == "INV") {
    r.expect({"k", "gamma", "p"});
    return Inv{r.real("k"), r.real("gamma"), r.real("p")};
  }
  if (type == "POLY") {
    r.expect({"k", "p"}, {"max_iter"});
    Poly p{r.real("k"), r.real("p"), std::nullopt};
    if (doc.contains("max_iter")) p.max_iter = r.integer("max_iter");
    return p;
  }
  if (const auto kind = cyclic_kind_from_name(type)) {
    if (is_exp_kind(*kind)) {
      r.expect({"k0", "k1", "l", "gamma"});
    } else {
      r.expect({"k0", "k1", "l"});
    }
    Cyclic c{*kind, r.real("k0"), r.real("k1"), r.integer("l"), std::nullopt};
    if (is_exp_kind(*kind)) c.gamma = r.real("gamma");
    return c;
  }
  if (type == "COMPOSITE") {
    throw ParseError(r.where() + "composite policies cannot be nested");
  }
  throw ParseError(r.where() + "unknown policy type '" + type + "'");
}

json base_to_json(const BasePolicy &policy) {
  return std::visit(Overloaded{
                        [](const Fix &p) { return json{{"type", "FIX"}, {"k", p.k}}; },
                        [](const Step &p) {
                          return json{{"type", "STEP"}, {"k", p.k}, {"gamma", p.gamma}, {"l", p.l}};
                        },
                        [](const NStep &p) {
                          return json{{"type", "NSTEP"},
                                      {"k", p.k},
                                      {"gamma", p.gamma},
                                      {"boundaries", p.boundaries}};
                        },
                        [](const Exp &p) {
                          return json{{"type", "EXP"}, {"k", p.k}, {"gamma", p.gamma}};
                        },
                        [](const Inv &p) {
                          return json{{"type", "INV"}, {"k", p.k}, {"gamma", p.gamma}, {"p", p.p}};
                        },
                        [](const Poly &p) {
                          json j{{"type", "POLY"}, {"k", p.k}, {"p", p.p}};
                          if (p.max_iter) j["max_iter"] = *p.max_iter;
                          return j;
                        },
                        [](const Cyclic &p) {
                          json j{{"type", std::string(kind_name(p.kind))},
                                 {"k0", p.k0},
                                 {"k1", p.k1},
                                 {"l", p.l}};
                          if (p.gamma) j["gamma"] = *p.gamma;
                          return j;
                        },
                    },
                    policy);
}

} // namespace

json policy_to_json(const Policy &policy) {
  if (const auto *c = std::get_if<Composite>(&policy)) {
    json segments = json::array();
    for (const auto &s : c->segments) {
      segments.push_back({{"start", s.start}, {"end", s.end}, {"policy", base_to_json(s.policy)}});
    }
    return json{{"type", "COMPOSITE"}, {"segments", std::move(segments)}};
  }
  return base_to_json(to_base(policy));
}

Policy policy_from_json(const json &doc) {
  Reader r(doc, "");
  if (r.type() != "COMPOSITE") return to_policy(read_base(doc, ""));
  r.expect({"segments"});
  const auto &segs = doc.at("segments");
  if (!segs.is_array()) throw ParseError("field 'segments' must be an array");
  Composite c;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string path = "segments[" + std::to_string(i) + "]";
    const auto &s = segs[i];
    if (!s.is_object()) throw ParseError(path + ": segment must be an object");
    for (const char *name : {"start", "end", "policy"}) {
      if (!s.contains(name)) throw ParseError(path + ": missing field '" + name + "'");
    }
    if (s.size() != 3) throw ParseError(path + ": unexpected field in segment");
    if (!s.at("start").is_number_integer() || !s.at("end").is_number_integer()) {
      throw ParseError(path + ": start/end must be integers");
    }
    c.segments.push_back({s.at("start").get<Iter>(), s.at("end").get<Iter>(),
                          read_base(s.at("policy"), path + ".policy")});
  }
  return c;
}

Policy parse_policy(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ParseError(std::string("malformed policy document: ") + e.what());
  }
  return policy_from_json(doc);
}

std::string serialize_policy(const Policy &policy) { return policy_to_json(policy).dump(); }

} // namespace lrpolicy
