#include "transversal/scene.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace tv::io {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw OpError(ErrKind::io, path + ": " + what);
}

// A json node together with the path used in error messages.
struct Node {
  const json* j;
  std::string path;

  bool is_object() const { return j->is_object(); }
  bool is_string() const { return j->is_string(); }

  Node at(const char* key) const {
    if (!j->is_object()) fail(path, "expected an object");
    auto it = j->find(key);
    if (it == j->end()) fail(path, std::string("missing field '") + key + "'");
    return {&*it, path + "." + key};
  }

  std::optional<Node> maybe(const char* key) const {
    if (!j->is_object()) fail(path, "expected an object");
    auto it = j->find(key);
    if (it == j->end()) return std::nullopt;
    return Node{&*it, path + "." + key};
  }

  std::size_t size() const {
    if (!j->is_array()) fail(path, "expected an array");
    return j->size();
  }

  Node item(std::size_t i) const {
    return {&(*j)[i], path + "[" + std::to_string(i) + "]"};
  }

  double num() const {
    if (!j->is_number()) fail(path, "expected a number");
    const double v = j->get<double>();
    if (!std::isfinite(v)) fail(path, "expected a finite number");
    return v;
  }

  std::uint64_t u64() const {
    if (!j->is_number_unsigned()) fail(path, "expected a nonnegative integer");
    return j->get<std::uint64_t>();
  }

  std::string str() const {
    if (!j->is_string()) fail(path, "expected a string");
    return j->get<std::string>();
  }

  Vec vec(std::size_t d) const {
    const std::size_t n = size();
    if (n != d)
      fail(path, "expected " + std::to_string(d) + " coordinates, got " + std::to_string(n));
    Vec v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = item(i).num();
    return v;
  }

  std::vector<Vec> vec_list(std::size_t d) const {
    const std::size_t n = size();
    std::vector<Vec> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(item(i).vec(d));
    return out;
  }

  void reject_unknown_keys(const std::vector<std::string>& allowed) const {
    for (auto it = j->begin(); it != j->end(); ++it) {
      bool known = false;
      for (const auto& k : allowed)
        if (it.key() == k) known = true;
      if (!known) fail(path + "." + it.key(), "unknown field");
    }
  }
};

NormSpec parse_norm(const Node& n) {
  if (n.is_string()) {
    const std::string s = n.str();
    if (s == "euclidean") return NormSpec::euclidean();
    if (s == "maximum") return NormSpec::maximum();
    fail(n.path, "unknown norm '" + s + "' (expected euclidean, maximum, or {\"p\": value})");
  }
  if (n.is_object()) {
    const double p = n.at("p").num();
    if (!(p >= 1.0)) fail(n.path + ".p", "expected p >= 1");
    if (p == 2.0) return NormSpec::euclidean();
    return geo::NormSpec::pnorm(p);
  }
  fail(n.path, "expected a norm name or {\"p\": value}");
}

SetPtr parse_set(const Node& n, std::size_t d, const NormSpec& scene_norm) {
  if (!n.is_object()) fail(n.path, "expected a set object");
  const std::string kind = n.at("kind").str();
  if (kind == "point") return geo::make_point(n.at("coords").vec(d));
  if (kind == "cloud") {
    auto pts = n.at("points").vec_list(d);
    if (pts.empty()) fail(n.path + ".points", "expected at least one point");
    return geo::make_cloud(std::move(pts));
  }
  if (kind == "box") {
    const Vec lo = n.at("lo").vec(d);
    const Vec hi = n.at("hi").vec(d);
    for (std::size_t k = 0; k < d; ++k)
      if (lo[k] > hi[k]) fail(n.path, "box has lo > hi in coordinate " + std::to_string(k));
    return geo::make_box(lo, hi);
  }
  if (kind == "ball") {
    Vec c = n.at("center").vec(d);
    const double r = n.at("radius").num();
    if (!(r > 0)) fail(n.path + ".radius", "expected a positive number");
    NormSpec nm = scene_norm;
    if (auto bn = n.maybe("norm")) nm = parse_norm(*bn);
    return geo::make_ball(std::move(c), r, nm);
  }
  if (kind == "poly") {
    auto rows = n.at("rows").vec_list(d);
    const Node rn = n.at("rhs");
    if (rn.size() != rows.size())
      fail(rn.path, "expected " + std::to_string(rows.size()) + " entries to match rows");
    Vec rhs(rows.size());
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = rn.item(i).num();
    if (rows.empty()) fail(n.path + ".rows", "expected at least one inequality");
    return geo::make_poly(std::move(rows), std::move(rhs));
  }
  if (kind == "affine") {
    Vec base = n.at("base").vec(d);
    auto dirs = n.at("directions").vec_list(d);
    return geo::make_affine(std::move(base), std::move(dirs));
  }
  if (kind == "shift") {
    Vec off = n.at("offset").vec(d);
    return geo::make_shift(parse_set(n.at("inner"), d, scene_norm), std::move(off));
  }
  if (kind == "union") {
    const Node pn = n.at("parts");
    const std::size_t m = pn.size();
    if (m == 0) fail(pn.path, "expected at least one part");
    std::vector<SetPtr> parts;
    parts.reserve(m);
    for (std::size_t i = 0; i < m; ++i) parts.push_back(parse_set(pn.item(i), d, scene_norm));
    return geo::make_union(std::move(parts));
  }
  fail(n.path + ".kind", "unknown set kind '" + kind + "'");
}

void parse_params(const Node& n, alg::ParamSet& out) {
  n.reject_unknown_keys(
      {"epsilon", "rho", "lambda", "alpha", "tau", "xi", "delta", "epsilon_prime"});
  const auto take = [&](const char* key, std::optional<double>& slot) {
    if (auto v = n.maybe(key)) slot = v->num();
  };
  take("epsilon", out.epsilon);
  take("rho", out.rho);
  take("lambda", out.lambda);
  take("alpha", out.alpha);
  take("tau", out.tau);
  take("xi", out.xi);
  take("delta", out.delta);
  take("epsilon_prime", out.epsilon_prime);
}

}  // namespace

Scene parse_scene(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw OpError(ErrKind::io, origin + ": malformed JSON: " + e.what());
  }
  const Node n{&root, origin};
  if (!n.is_object()) fail(origin, "expected a scene object");
  n.reject_unknown_keys({"dimension", "norm", "sets", "anchor", "parameters", "seed", "comment"});

  Scene sc;
  const double draw = n.at("dimension").num();
  if (draw < 1 || draw != std::floor(draw))
    fail(origin + ".dimension", "expected a positive integer");
  sc.dimension = static_cast<std::size_t>(draw);

  if (auto nm = n.maybe("norm")) sc.norm = parse_norm(*nm);

  const Node sets = n.at("sets");
  const std::size_t count = sets.size();
  if (count == 0) fail(sets.path, "expected at least one set");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < count; ++i) {
    const Node e = sets.item(i);
    std::string name = "set" + std::to_string(i);
    if (auto nn = e.maybe("name")) name = nn->str();
    if (!seen.insert(name).second) fail(e.path + ".name", "duplicate set name '" + name + "'");
    sc.sets.push_back({std::move(name), parse_set(e, sc.dimension, sc.norm)});
  }

  if (auto a = n.maybe("anchor")) sc.anchor = a->vec(sc.dimension);
  if (auto p = n.maybe("parameters")) parse_params(*p, sc.params);
  if (auto s = n.maybe("seed")) sc.seed = s->u64();
  sc.digest = fnv1a_hex(text);
  return sc;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw OpError(ErrKind::io, path + ": cannot open scene file");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw OpError(ErrKind::io, path + ": read error");
  return parse_scene(buf.str(), path);
}

std::vector<SetPtr> set_list(const Scene& sc) {
  std::vector<SetPtr> out;
  out.reserve(sc.sets.size());
  for (const auto& s : sc.sets) out.push_back(s.set);
  return out;
}

const NamedSet& find_set(const Scene& sc, const std::string& name) {
  for (const auto& s : sc.sets)
    if (s.name == name) return s;
  throw OpError(ErrKind::precondition, "no set named '" + name + "' in the scene");
}

const Vec& require_anchor(const Scene& sc) {
  if (!sc.anchor) throw OpError(ErrKind::precondition, "this command needs a scene anchor");
  return *sc.anchor;
}

void require_anchor_member(const Scene& sc) {
  const Vec& x = require_anchor(sc);
  for (const auto& s : sc.sets)
    if (!geo::member(x, *s.set))
      throw OpError(ErrKind::precondition, "anchor is not a member of set '" + s.name + "'");
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tv::io
