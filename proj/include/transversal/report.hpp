#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "transversal/scene.hpp"

namespace tv::io {

// Report value tree. Object keys are emitted sorted and numbers print
// through fmt_g12, so equal trees serialize to byte-identical text.
struct Jv {
  enum class Kind { null, boolean, integer, number, text, array, object };
  Kind kind = Kind::null;
  bool b = false;
  std::int64_t i = 0;
  double x = 0;
  std::string s;
  std::vector<Jv> items;
  std::vector<std::pair<std::string, Jv>> fields;

  Jv() = default;
  static Jv boolean(bool v);
  static Jv integer(std::int64_t v);
  static Jv number(double v);
  static Jv text(std::string v);
  static Jv array();
  static Jv object();

  Jv& operator[](const std::string& key);  // object field, created on first use
  void push(Jv v);                         // array append
};

// Deterministic run record. counters hold work counts (LP solves, grid
// nodes) instead of wall-clock times so equal runs emit equal reports.
struct RunReport {
  std::string command;
  std::string scene_digest;
  std::string version;
  std::uint64_t seed = 0;
  int exit_code = 0;  // 0 done, 3 when a search came back empty-handed
  Jv results;
  std::vector<std::pair<std::string, std::uint64_t>> counters;
};

std::string tool_version();

// Command options layered over the scene defaults.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> which;    // distance / oracle selector
  std::optional<std::string> form;     // certify: D1..D6
  std::optional<std::size_t> samples;  // sample / candidate budget
  std::optional<double> spacing;       // oracle grid override
  alg::ParamSet params;
};

// Runs one command against the scene. Throws OpError for bad input or
// numerical failure; searches that end empty-handed return exit_code 3.
RunReport run(const std::string& command, const Scene& scene, const Overrides& ov = {});

std::string emit_json(const RunReport& r);
std::string emit_csv(const RunReport& r);
std::string emit_plot(const RunReport& r);
// format: json | csv | csv-summary | plot | gnu-plot-data
std::string emit(const RunReport& r, const std::string& format);

}  // namespace tv::io
