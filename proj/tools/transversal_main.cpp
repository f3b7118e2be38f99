#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "transversal/report.hpp"

namespace {

std::string format_extension(const std::string& f) {
  if (f == "json") return "json";
  if (f == "csv" || f == "csv-summary") return "csv";
  return "dat";
}

void write_file(const std::string& dir, const std::string& name, const std::string& text) {
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/" + name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw tv::OpError(tv::ErrKind::io, path + ": cannot open for writing");
  out << text;
  if (!out) throw tv::OpError(tv::ErrKind::io, path + ": write error");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grid-certified transversality toolkit"};
  app.require_subcommand(1);

  std::string scene_path;
  std::string out_dir;
  std::string format = "json";
  app.add_option("--scene", scene_path, "scene JSON file")->required();
  app.add_option("--out", out_dir, "directory the report file is written into");
  app.add_option("--format", format, "report format")
      ->check(CLI::IsMember({"json", "csv", "csv-summary", "plot", "gnu-plot-data"}));

  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "seed override for randomized commands");
  std::size_t samples = 0;
  auto* samples_opt = app.add_option("--samples", samples, "sample / candidate budget");

  double epsilon = 0, rho = 0, lambda = 0, alpha = 0, tau = 0;
  auto* eps_opt = app.add_option("--epsilon", epsilon, "epsilon override");
  auto* rho_opt = app.add_option("--rho", rho, "rho override");
  auto* lambda_opt = app.add_option("--lambda", lambda, "lambda override");
  auto* alpha_opt = app.add_option("--alpha", alpha, "alpha override");
  auto* tau_opt = app.add_option("--tau", tau, "tau override");

  std::string which, form;
  auto* dist_sub = app.add_subcommand("distance", "multiset distances and the chain checks");
  auto* dist_which = dist_sub->add_option("--which", which, "d1 | d2 | d3 | chain");
  app.add_subcommand("translate", "near-closest translations emptying the intersection");
  app.add_subcommand("theta", "translation radius that keeps the intersection nonempty");
  auto* ek_sub = app.add_subcommand("ekeland", "variational descent on cloud scenes");
  app.add_subcommand("stationarity", "search for a stationarity witness at the anchor");
  app.add_subcommand("modulus", "transversality modulus bracket at the anchor");
  auto* cert_sub = app.add_subcommand("certify", "dual certificate search at the anchor");
  auto* cert_form = cert_sub->add_option("--form", form, "certificate form D1..D6");
  auto* oracle_sub = app.add_subcommand("oracle", "independent grid checks");
  auto* oracle_which = oracle_sub->add_option("--which", which, "distance | emptiness | chain");
  double spacing = 0;
  auto* spacing_opt = oracle_sub->add_option("--spacing", spacing, "grid spacing override");
  (void)ek_sub;
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  tv::io::Overrides ov;
  if (*seed_opt) ov.seed = seed;
  if (*samples_opt) ov.samples = samples;
  if (*dist_which || *oracle_which) ov.which = which;
  if (*cert_form) ov.form = form;
  if (*spacing_opt) ov.spacing = spacing;
  if (*eps_opt) ov.params.epsilon = epsilon;
  if (*rho_opt) ov.params.rho = rho;
  if (*lambda_opt) ov.params.lambda = lambda;
  if (*alpha_opt) ov.params.alpha = alpha;
  if (*tau_opt) ov.params.tau = tau;

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    const tv::io::Scene sc = tv::io::load_scene(scene_path);
    const tv::io::RunReport rep = tv::io::run(cmd, sc, ov);
    const std::string text = tv::io::emit(rep, format);
    std::fwrite(text.data(), 1, text.size(), stdout);
    if (!out_dir.empty()) write_file(out_dir, cmd + "_report." + format_extension(format), text);
    return rep.exit_code;
  } catch (const tv::OpError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.kind) {
      case tv::ErrKind::budget: return 3;
      case tv::ErrKind::numeric: return 4;
      default: return 2;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
