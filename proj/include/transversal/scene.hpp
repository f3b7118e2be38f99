#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "transversal/rescale.hpp"
#include "transversal/sets.hpp"

namespace tv::io {

using geo::NormSpec;
using geo::SetPtr;

struct NamedSet {
  std::string name;
  SetPtr set;
};

// One problem instance: named sets in a common ambient space, an optional
// anchor point, default parameters, and the seed randomized commands start
// from. digest is FNV-1a over the source text, so equal files hash equal.
struct Scene {
  std::size_t dimension = 0;
  NormSpec norm = NormSpec::euclidean();
  std::vector<NamedSet> sets;
  std::optional<Vec> anchor;
  alg::ParamSet params;
  std::uint64_t seed = 0;
  std::string digest;
};

// Parses scene JSON. Schema errors carry the path of the offending field
// ("scene.sets[2].radius: expected a number"); `origin` is the path prefix
// used in those messages. Malformed JSON and unreadable files throw io
// errors as well.
Scene parse_scene(const std::string& text, const std::string& origin);
Scene load_scene(const std::string& path);

std::vector<SetPtr> set_list(const Scene& sc);
const NamedSet& find_set(const Scene& sc, const std::string& name);

// Commands that anchor their search call these before running.
const Vec& require_anchor(const Scene& sc);
void require_anchor_member(const Scene& sc);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace tv::io
