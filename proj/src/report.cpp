#include "transversal/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "transversal/multiset.hpp"
#include "transversal/oracles.hpp"
#include "transversal/stationarity.hpp"

namespace tv::io {

Jv Jv::boolean(bool v) {
  Jv j;
  j.kind = Kind::boolean;
  j.b = v;
  return j;
}

Jv Jv::integer(std::int64_t v) {
  Jv j;
  j.kind = Kind::integer;
  j.i = v;
  return j;
}

Jv Jv::number(double v) {
  Jv j;
  j.kind = Kind::number;
  j.x = v;
  return j;
}

Jv Jv::text(std::string v) {
  Jv j;
  j.kind = Kind::text;
  j.s = std::move(v);
  return j;
}

Jv Jv::array() {
  Jv j;
  j.kind = Kind::array;
  return j;
}

Jv Jv::object() {
  Jv j;
  j.kind = Kind::object;
  return j;
}

Jv& Jv::operator[](const std::string& key) {
  if (kind == Kind::null) kind = Kind::object;
  if (kind != Kind::object) throw OpError(ErrKind::precondition, "report node is not an object");
  for (auto& f : fields)
    if (f.first == key) return f.second;
  fields.emplace_back(key, Jv{});
  return fields.back().second;
}

void Jv::push(Jv v) {
  if (kind == Kind::null) kind = Kind::array;
  if (kind != Kind::array) throw OpError(ErrKind::precondition, "report node is not an array");
  items.push_back(std::move(v));
}

std::string tool_version() { return "0.1.0"; }

namespace {

using geo::NormSpec;
using geo::SetPtr;

double need(const std::optional<double>& v, const char* name) {
  if (!v)
    throw OpError(ErrKind::precondition, std::string("parameter '") + name +
                                             "' is required (set it in the scene or on the "
                                             "command line)");
  return *v;
}

alg::ParamSet merged_params(const Scene& sc, const Overrides& ov) {
  alg::ParamSet p = sc.params;
  const auto lay = [](std::optional<double>& dst, const std::optional<double>& src) {
    if (src) dst = src;
  };
  lay(p.epsilon, ov.params.epsilon);
  lay(p.rho, ov.params.rho);
  lay(p.lambda, ov.params.lambda);
  lay(p.alpha, ov.params.alpha);
  lay(p.tau, ov.params.tau);
  lay(p.xi, ov.params.xi);
  lay(p.delta, ov.params.delta);
  lay(p.epsilon_prime, ov.params.epsilon_prime);
  return p;
}

Jv vec_jv(const Vec& v) {
  Jv a = Jv::array();
  for (double c : v) a.push(Jv::number(c));
  return a;
}

Jv vec_list_jv(const std::vector<Vec>& vs) {
  Jv a = Jv::array();
  for (const auto& v : vs) a.push(vec_jv(v));
  return a;
}

Jv bracket_jv(double lo, double hi) {
  Jv j = Jv::object();
  j["hi"] = Jv::number(hi);
  j["lo"] = Jv::number(lo);
  return j;
}

Jv dist_jv(const geo::DistanceReport& r) {
  Jv j = Jv::object();
  j["bracket"] = bracket_jv(r.lo, r.hi);
  if (r.center) j["center"] = vec_jv(*r.center);
  j["method"] = Jv::text(r.method);
  j["minimizers"] = vec_list_jv(r.minimizers);
  j["value"] = Jv::number(r.value);
  return j;
}

Jv chain_jv(const std::vector<geo::ChainCheck>& cs) {
  Jv a = Jv::array();
  for (const auto& c : cs) {
    Jv l = Jv::object();
    l["holds"] = Jv::boolean(c.holds);
    l["margin"] = Jv::number(c.margin);
    l["name"] = Jv::text(c.name);
    a.push(std::move(l));
  }
  return a;
}

Jv translations_jv(const tr::TranslationSet& t) {
  Jv j = Jv::object();
  j["a"] = vec_list_jv(t.a);
  j["max_norm"] = Jv::number(t.max_norm);
  if (!t.omega.empty()) j["omega"] = vec_list_jv(t.omega);
  if (t.rho != kInf) j["rho"] = Jv::number(t.rho);
  if (t.witness) j["witness"] = vec_jv(*t.witness);
  return j;
}

Jv primal_check_jv(const tr::PrimalCheckResult& c) {
  Jv j = Jv::object();
  j["certificate"] = Jv::text(c.certificate);
  j["id"] = Jv::text(c.id);
  Jv m = Jv::object();
  m["emptiness"] = Jv::number(c.empt_margin);
  m["membership"] = Jv::number(c.member_margin);
  m["norm"] = Jv::number(c.norm_margin);
  j["margins"] = std::move(m);
  j["verdict"] = Jv::text(tr::to_string(c.verdict));
  if (c.id == "P9" || c.id == "P10") {
    j["lhs"] = bracket_jv(c.lhs_lo, c.lhs_hi);
    j["rhs"] = bracket_jv(c.rhs_lo, c.rhs_hi);
  }
  if (c.witness) j["witness"] = vec_jv(*c.witness);
  return j;
}

Jv evp_check_jv(const orc::EvpCheck& c) {
  Jv j = Jv::object();
  j["clause1"] = Jv::number(c.clause1);
  j["clause2"] = Jv::number(c.clause2);
  j["clause3"] = Jv::number(c.clause3);
  j["margins_match"] = Jv::boolean(c.margins_match);
  j["ok"] = Jv::boolean(c.ok);
  j["premise_ok"] = Jv::boolean(c.premise_ok);
  j["start_variant"] = Jv::boolean(c.start_variant);
  if (!c.why.empty()) j["why"] = Jv::text(c.why);
  return j;
}

Jv replay_jv(const orc::ReplayReport& r) {
  Jv j = Jv::object();
  j["all_hold"] = Jv::boolean(r.all_hold);
  j["id"] = Jv::text(r.id);
  Jv lines = Jv::array();
  for (const auto& l : r.lines) {
    Jv e = Jv::object();
    e["boundary"] = Jv::boolean(l.boundary);
    e["holds"] = Jv::boolean(l.holds);
    e["lhs"] = Jv::number(l.lhs);
    e["margin"] = Jv::number(l.margin);
    e["name"] = Jv::text(l.name);
    e["rhs"] = Jv::number(l.rhs);
    e["strict"] = Jv::boolean(l.strict);
    lines.push(std::move(e));
  }
  j["lines"] = std::move(lines);
  return j;
}

Jv cmd_distance(const Scene& sc, const Overrides& ov, const alg::ParamSet&, int& exit_code) {
  (void)exit_code;
  const std::string which = ov.which.value_or("chain");
  const auto sets = set_list(sc);
  Jv res = Jv::object();
  res["which"] = Jv::text(which);
  if (which == "d1")
    res["distance"] = dist_jv(geo::d1_sets(sets, sc.norm));
  else if (which == "d2")
    res["distance"] = dist_jv(geo::d2_sets(sets, sc.norm));
  else if (which == "d3")
    res["distance"] = dist_jv(geo::d3_sets(sets, sc.norm));
  else if (which == "chain") {
    res["d1"] = dist_jv(geo::d1_sets(sets, sc.norm));
    res["d2"] = dist_jv(geo::d2_sets(sets, sc.norm));
    res["d3"] = dist_jv(geo::d3_sets(sets, sc.norm));
    const auto checks = geo::check_distance_inequalities(sets, sc.norm);
    bool all = true;
    for (const auto& c : checks) all = all && c.holds;
    res["all_hold"] = Jv::boolean(all);
    res["checks"] = chain_jv(checks);
  } else {
    throw OpError(ErrKind::precondition, "distance --which must be d1, d2, d3, or chain");
  }
  return res;
}

Jv cmd_translate(const Scene& sc, const Overrides&, const alg::ParamSet& p, int& exit_code) {
  const auto sets = set_list(sc);
  const double eps = need(p.epsilon, "epsilon");
  const auto base = geo::d1_sets(sets, sc.norm);
  const auto nc = tr::translations_from_near_closest(sets, base.minimizers, eps, sc.norm);
  Jv res = Jv::object();
  res["check"] = primal_check_jv(nc.check);
  res["epsilon_prime"] = Jv::number(nc.eps_prime);
  res["gap"] = bracket_jv(base.lo, base.hi);
  res["m"] = Jv::number(nc.m);
  res["omega"] = vec_list_jv(base.minimizers);
  res["translations"] = translations_jv(nc.tr);
  if (!nc.check.ok()) exit_code = 4;
  return res;
}

Jv cmd_theta(const Scene& sc, const Overrides&, const alg::ParamSet& p, int& exit_code) {
  (void)exit_code;
  const Vec& x = require_anchor(sc);
  const double rho = need(p.rho, "rho");
  const auto th = tr::theta_rho(set_list(sc), x, rho, sc.norm);
  Jv res = Jv::object();
  res["method"] = Jv::text(th.method);
  res["rho"] = Jv::number(rho);
  res["theta"] = bracket_jv(th.lo, th.hi);
  if (th.worst_a) res["worst_a"] = vec_list_jv(*th.worst_a);
  return res;
}

Jv cmd_ekeland(const Scene& sc, const Overrides&, const alg::ParamSet& p, int& exit_code) {
  const auto sets = set_list(sc);
  if (sets.size() < 2)
    throw OpError(ErrKind::precondition, "ekeland needs at least two sets in the scene");
  const double eps = need(p.epsilon, "epsilon");
  const double lambda = need(p.lambda, "lambda");
  const double rho = p.rho.value_or(lambda);
  const auto start = geo::d1_sets(sets, sc.norm).minimizers;
  Jv res = Jv::object();
  orc::EvpCheck chk;
  if (sets.size() == 2) {
    const bool asym = p.rho.has_value() && rho != lambda;
    const auto r = asym ? evp::agevp(sets[0], sets[1], start[0], start[1], eps, lambda, rho, sc.norm)
                        : evp::gevp(sets[0], sets[1], start[0], start[1], eps, lambda, sc.norm);
    chk = orc::evp_exhaustive_check(sets[0], sets[1], start[0], start[1], r, eps, lambda, rho,
                                    sc.norm);
    res["a_hat"] = vec_jv(r.a_hat);
    res["b_hat"] = vec_jv(r.b_hat);
    res["d_hat"] = Jv::number(r.d_hat);
    res["d_start"] = Jv::number(r.d_start);
    res["engine"] = Jv::text(asym ? "agevp" : "gevp");
    Jv m = Jv::object();
    m["descent"] = Jv::number(r.clause1_margin);
    m["interval"] = Jv::number(r.clause2_margin);
    m["localization_a"] = Jv::number(r.loc_a_margin);
    m["localization_b"] = Jv::number(r.loc_b_margin);
    res["margins"] = std::move(m);
  } else {
    const auto r = evp::agevp_n(sets, start, eps, lambda, rho, sc.norm);
    chk = orc::evp_exhaustive_check(sets, start, r, eps, lambda, rho, sc.norm);
    res["d1_hat"] = Jv::number(r.d1_hat);
    res["d1_start"] = Jv::number(r.d1_start);
    res["engine"] = Jv::text("agevp_n");
    Jv m = Jv::object();
    m["descent"] = Jv::number(r.clause1_margin);
    m["interval"] = Jv::number(r.clause2_margin);
    Jv locs = Jv::array();
    for (double v : r.loc_margins) locs.push(Jv::number(v));
    m["localization"] = std::move(locs);
    res["margins"] = std::move(m);
    res["omega_hat"] = vec_list_jv(r.omega_hat);
  }
  res["oracle"] = evp_check_jv(chk);
  res["start"] = vec_list_jv(start);
  if (!chk.ok) exit_code = 4;
  return res;
}

Jv cmd_stationarity(const Scene& sc, const Overrides& ov, const alg::ParamSet& p,
                    int& exit_code) {
  require_anchor_member(sc);
  const Vec& x = *sc.anchor;
  const double alpha = need(p.alpha, "alpha");
  const double eps = need(p.epsilon, "epsilon");
  const std::size_t budget = ov.samples.value_or(2000);
  const auto st = lab::alpha_stationarity_test(set_list(sc), x, alpha, eps, budget, sc.norm);
  Jv res = Jv::object();
  res["alpha"] = Jv::number(alpha);
  res["evaluated"] = Jv::integer(static_cast<std::int64_t>(st.evaluated));
  res["found"] = Jv::boolean(st.found);
  if (st.found) {
    res["check"] = primal_check_jv(st.check);
    res["witness"] = translations_jv(st.witness);
    if (!st.check.ok()) exit_code = 4;
  } else {
    exit_code = 3;
  }
  return res;
}

Jv cmd_modulus(const Scene& sc, const Overrides& ov, const alg::ParamSet& p, int& exit_code,
               std::uint64_t seed) {
  (void)exit_code;
  require_anchor_member(sc);
  const Vec& x = *sc.anchor;
  const double eps = need(p.epsilon, "epsilon");
  const std::size_t samples = ov.samples.value_or(10000);
  const auto mr = lab::transversality_modulus(set_list(sc), x, eps, samples, seed, sc.norm);
  Jv res = Jv::object();
  res["lower_certified"] = Jv::boolean(mr.lower_certified);
  res["modulus"] = bracket_jv(mr.lower, mr.upper);
  res["samples"] = Jv::integer(static_cast<std::int64_t>(mr.samples));
  res["skipped"] = Jv::integer(static_cast<std::int64_t>(mr.skipped));
  if (mr.worst) res["worst"] = translations_jv(*mr.worst);
  if (mr.worst_x) res["worst_x"] = vec_jv(*mr.worst_x);
  return res;
}

Jv cmd_certify(const Scene& sc, const Overrides& ov, const alg::ParamSet& p, int& exit_code) {
  require_anchor_member(sc);
  const Vec& x = *sc.anchor;
  if (!ov.form)
    throw OpError(ErrKind::precondition, "certify needs --form (D1..D6)");
  const lab::DualForm form = lab::dual_form_from(*ov.form);
  const double eps = need(p.epsilon, "epsilon");
  const bool alpha_form = form == lab::DualForm::d3 || form == lab::DualForm::d4 ||
                          form == lab::DualForm::d5 || form == lab::DualForm::d6;
  const double alpha = alpha_form ? need(p.alpha, "alpha") : 0.0;
  const auto sets = set_list(sc);
  const auto cs =
      lab::dual_certificate_search(sets, x, eps, alpha, form, geo::ConeKind::frechet, sc.norm);
  Jv res = Jv::object();
  res["best"] = Jv::number(cs.best);
  res["form"] = Jv::text(lab::to_string(form));
  res["note"] = Jv::text(cs.note);
  res["threshold"] = Jv::number(cs.threshold);
  res["tuples"] = Jv::integer(static_cast<std::int64_t>(cs.tuples));
  if (cs.bundle) {
    const auto& b = *cs.bundle;
    Jv bj = Jv::object();
    bj["cone_residual"] = Jv::number(b.cone_residual);
    bj["normalization"] = Jv::text(b.normalization);
    bj["omega"] = vec_list_jv(b.omega);
    if (b.pairing != 0) bj["pairing"] = Jv::number(b.pairing);
    bj["sum_residual"] = Jv::number(b.sum_residual);
    bj["xstar"] = vec_list_jv(b.xstar);
    res["bundle"] = std::move(bj);
    const auto rc = lab::reverify(b, sets, sc.norm);
    Jv rj = Jv::object();
    rj["cone_gap"] = Jv::number(rc.cone_gap);
    rj["normalization_gap"] = Jv::number(rc.normalization_gap);
    rj["ok"] = Jv::boolean(rc.ok);
    rj["sum_gap"] = Jv::number(rc.sum_gap);
    if (!rc.why.empty()) rj["why"] = Jv::text(rc.why);
    res["reverify"] = std::move(rj);
    if (!rc.ok) exit_code = 4;
  } else {
    exit_code = 3;
  }
  return res;
}

Jv cmd_oracle(const Scene& sc, const Overrides& ov, const alg::ParamSet& p, int& exit_code) {
  (void)exit_code;
  const std::string which = ov.which.value_or("distance");
  const double spacing = ov.spacing.value_or(0.0);
  Jv res = Jv::object();
  res["which"] = Jv::text(which);
  if (which == "distance") {
    const Vec& x = require_anchor(sc);
    Jv per = Jv::array();
    for (const auto& s : sc.sets) {
      const auto g = orc::grid_distance_oracle(x, s.set, sc.norm, spacing);
      Jv e = Jv::object();
      e["band_points"] = Jv::integer(static_cast<std::int64_t>(g.band_points));
      e["bracket"] = bracket_jv(g.lo, g.hi);
      e["grid_points"] = Jv::integer(static_cast<std::int64_t>(g.grid_points));
      e["nearest"] = vec_jv(g.nearest);
      e["set"] = Jv::text(s.name);
      e["spacing"] = Jv::number(g.spacing);
      per.push(std::move(e));
    }
    res["distances"] = std::move(per);
    return res;
  }
  if (which == "emptiness") {
    geo::IntersectionQuery q;
    q.ambient = sc.norm;
    for (const auto& s : sc.sets) q.factors.push_back({s.set, zeros(sc.dimension), {}, false});
    std::optional<geo::BallRep> region;
    if (sc.anchor && p.rho) region = geo::BallRep{*sc.anchor, *p.rho, sc.norm};
    const auto c = orc::emptiness_oracle(q, region, spacing);
    res["empty"] = Jv::boolean(c.empty);
    res["margin"] = Jv::number(c.margin);
    res["method"] = Jv::text(c.method);
    res["spacing"] = Jv::number(c.spacing);
    if (c.witness) res["witness"] = vec_jv(*c.witness);
    return res;
  }
  if (which == "chain") {
    orc::ReplayInstance inst;
    inst.sets = set_list(sc);
    inst.norm = sc.norm;
    res["replay"] = replay_jv(orc::inequality_replay("chain", inst));
    return res;
  }
  throw OpError(ErrKind::precondition, "oracle --which must be distance, emptiness, or chain");
}

}  // namespace

RunReport run(const std::string& command, const Scene& scene, const Overrides& ov) {
  const std::uint64_t lp0 = geo::lp_solve_count();
  const std::uint64_t grid0 = geo::grid_points_count();
  RunReport rep;
  rep.command = command;
  rep.scene_digest = scene.digest;
  rep.version = tool_version();
  rep.seed = ov.seed.value_or(scene.seed);
  const alg::ParamSet p = merged_params(scene, ov);
  if (command == "distance")
    rep.results = cmd_distance(scene, ov, p, rep.exit_code);
  else if (command == "translate")
    rep.results = cmd_translate(scene, ov, p, rep.exit_code);
  else if (command == "theta")
    rep.results = cmd_theta(scene, ov, p, rep.exit_code);
  else if (command == "ekeland")
    rep.results = cmd_ekeland(scene, ov, p, rep.exit_code);
  else if (command == "stationarity")
    rep.results = cmd_stationarity(scene, ov, p, rep.exit_code);
  else if (command == "modulus")
    rep.results = cmd_modulus(scene, ov, p, rep.exit_code, rep.seed);
  else if (command == "certify")
    rep.results = cmd_certify(scene, ov, p, rep.exit_code);
  else if (command == "oracle")
    rep.results = cmd_oracle(scene, ov, p, rep.exit_code);
  else
    throw OpError(ErrKind::precondition, "unknown command '" + command + "'");
  rep.counters.emplace_back("grid_points", geo::grid_points_count() - grid0);
  rep.counters.emplace_back("lp_solves", geo::lp_solve_count() - lp0);
  return rep;
}

namespace {

void escape_into(const std::string& s, std::string& out) {
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
}

std::string number_token(double x) {
  if (std::isnan(x)) return "\"nan\"";
  if (std::isinf(x)) return x > 0 ? "\"inf\"" : "\"-inf\"";
  return fmt_g12(x);
}

std::vector<const std::pair<std::string, Jv>*> sorted_fields(const Jv& v) {
  std::vector<const std::pair<std::string, Jv>*> out;
  out.reserve(v.fields.size());
  for (const auto& f : v.fields) out.push_back(&f);
  std::sort(out.begin(), out.end(),
            [](const auto* a, const auto* b) { return a->first < b->first; });
  return out;
}

bool scalar_only(const Jv& v) {
  for (const auto& e : v.items)
    if (e.kind == Jv::Kind::array || e.kind == Jv::Kind::object) return false;
  return true;
}

void emit_value(const Jv& v, int depth, std::string& out) {
  const auto indent = [&](int n) { out.append(static_cast<std::size_t>(2 * n), ' '); };
  switch (v.kind) {
    case Jv::Kind::null: out += "null"; return;
    case Jv::Kind::boolean: out += v.b ? "true" : "false"; return;
    case Jv::Kind::integer: out += std::to_string(v.i); return;
    case Jv::Kind::number: out += number_token(v.x); return;
    case Jv::Kind::text:
      out += '"';
      escape_into(v.s, out);
      out += '"';
      return;
    case Jv::Kind::array: {
      if (v.items.empty()) {
        out += "[]";
        return;
      }
      if (scalar_only(v)) {
        out += '[';
        for (std::size_t i = 0; i < v.items.size(); ++i) {
          if (i) out += ", ";
          emit_value(v.items[i], depth, out);
        }
        out += ']';
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.items.size(); ++i) {
        indent(depth + 1);
        emit_value(v.items[i], depth + 1, out);
        if (i + 1 < v.items.size()) out += ',';
        out += '\n';
      }
      indent(depth);
      out += ']';
      return;
    }
    case Jv::Kind::object: {
      if (v.fields.empty()) {
        out += "{}";
        return;
      }
      const auto fs = sorted_fields(v);
      out += "{\n";
      for (std::size_t i = 0; i < fs.size(); ++i) {
        indent(depth + 1);
        out += '"';
        escape_into(fs[i]->first, out);
        out += "\": ";
        emit_value(fs[i]->second, depth + 1, out);
        if (i + 1 < fs.size()) out += ',';
        out += '\n';
      }
      indent(depth);
      out += '}';
      return;
    }
  }
}

Jv top_tree(const RunReport& r) {
  Jv top = Jv::object();
  top["command"] = Jv::text(r.command);
  top["results"] = r.results;
  top["scene"] = Jv::text(r.scene_digest);
  top["seed"] = Jv::integer(static_cast<std::int64_t>(r.seed));
  Jv t = Jv::object();
  for (const auto& c : r.counters) t[c.first] = Jv::integer(static_cast<std::int64_t>(c.second));
  top["timings"] = std::move(t);
  top["version"] = Jv::text(r.version);
  return top;
}

void flatten(const Jv& v, const std::string& path,
             std::vector<std::pair<std::string, const Jv*>>& out) {
  switch (v.kind) {
    case Jv::Kind::object:
      for (const auto* f : sorted_fields(v))
        flatten(f->second, path.empty() ? f->first : path + "." + f->first, out);
      return;
    case Jv::Kind::array:
      for (std::size_t i = 0; i < v.items.size(); ++i)
        flatten(v.items[i], path + "[" + std::to_string(i) + "]", out);
      return;
    default: out.emplace_back(path, &v); return;
  }
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string leaf_text(const Jv& v) {
  switch (v.kind) {
    case Jv::Kind::boolean: return v.b ? "true" : "false";
    case Jv::Kind::integer: return std::to_string(v.i);
    case Jv::Kind::number:
      if (std::isnan(v.x)) return "nan";
      if (std::isinf(v.x)) return v.x > 0 ? "inf" : "-inf";
      return fmt_g12(v.x);
    case Jv::Kind::text: return v.s;
    default: return "null";
  }
}

}  // namespace

std::string emit_json(const RunReport& r) {
  std::string out;
  emit_value(top_tree(r), 0, out);
  out += '\n';
  return out;
}

std::string emit_csv(const RunReport& r) {
  std::vector<std::pair<std::string, const Jv*>> leaves;
  const Jv top = top_tree(r);
  flatten(top, "", leaves);
  std::string out = "key,value\n";
  for (const auto& [path, v] : leaves) {
    out += csv_cell(path);
    out += ',';
    out += csv_cell(leaf_text(*v));
    out += '\n';
  }
  return out;
}

std::string emit_plot(const RunReport& r) {
  std::vector<std::pair<std::string, const Jv*>> leaves;
  const Jv top = top_tree(r);
  flatten(top, "", leaves);
  std::string out = "# transversal " + r.command + " scene=" + r.scene_digest + " seed=" +
                    std::to_string(r.seed) + " version=" + r.version + "\n# key value\n";
  for (const auto& [path, v] : leaves) {
    std::string val;
    if (v->kind == Jv::Kind::number) {
      if (!std::isfinite(v->x)) continue;
      val = fmt_g12(v->x);
    } else if (v->kind == Jv::Kind::integer) {
      val = std::to_string(v->i);
    } else if (v->kind == Jv::Kind::boolean) {
      val = v->b ? "1" : "0";
    } else {
      continue;
    }
    std::string key = path;
    for (char& c : key)
      if (c == ' ' || c == ',') c = '_';
    out += key;
    out += ' ';
    out += val;
    out += '\n';
  }
  return out;
}

std::string emit(const RunReport& r, const std::string& format) {
  if (format == "json") return emit_json(r);
  if (format == "csv" || format == "csv-summary") return emit_csv(r);
  if (format == "plot" || format == "gnu-plot-data") return emit_plot(r);
  throw OpError(ErrKind::precondition, "unknown report format '" + format + "'");
}

}  // namespace tv::io
