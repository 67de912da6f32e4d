// Command-line driver for the hypersurface toolkit: expression parsing,
// manifest round-trips, classification, minimality, normalization, map
// verification, reflection identities, chain systems, tangent-field flows,
// and the convergence-criterion witness.
//
// Exit status: 0 for a definite verdict (positive or negative), 2 for a
// verdict that is inconclusive at the requested order or bound, 1 for
// errors.  Machine output is line-oriented key=value; text output carries
// the same records with a short header.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <crformal/classify.hpp>
#include <crformal/flows.hpp>
#include <crformal/mapping.hpp>

namespace {

using namespace crformal;

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kInconclusive = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool starts_with_token(const std::string& text, const std::string& token) {
  std::istringstream is(text);
  std::string first;
  is >> first;
  return first == token;
}

/// Accepts either a saved manifest or a defining expression.
Hypersurface load_surface(const std::string& path, int order,
                          int graph_index) {
  const std::string text = read_file(path);
  if (starts_with_token(text, "hypersurface")) {
    std::istringstream is(text);
    return Hypersurface::load(is);
  }
  return Hypersurface::from_expression(text, order, graph_index);
}

FormalMap load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return FormalMap::load(in);
}

std::vector<PowerSeries> load_series_tuple(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<PowerSeries> out;
  while (true) {
    int c = in.peek();
    while (c == ' ' || c == '\n' || c == '\r' || c == '\t') {
      in.get();
      c = in.peek();
    }
    if (c == std::char_traits<char>::eof()) break;
    out.push_back(read_series_record(in).series);
  }
  if (out.empty()) throw std::runtime_error("no series records in " + path);
  return out;
}

void write_text_or_file(const std::string& payload, const std::string& output,
                        const std::string& summary) {
  if (output.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream out(output);
  if (!out) throw std::runtime_error("cannot write " + output);
  out << payload;
  std::cout << summary << "\n";
}

struct CommonFlags {
  int order = 10;
  int graph_index = 0;
  std::string format = "text";

  bool text() const { return format == "text"; }

  void attach(CLI::App* cmd, bool with_graph = true) {
    cmd->add_option("--order", order, "working truncation order")
        ->capture_default_str();
    cmd->add_option("--format", format, "report format")
        ->check(CLI::IsMember({"text", "machine"}))
        ->capture_default_str();
    if (with_graph)
      cmd->add_option("--graph-var", graph_index,
                      "1-based index of the coordinate solved for "
                      "(0 = highest)")
          ->capture_default_str();
  }
};

int run_parse(const CommonFlags& common, const std::string& input,
              const std::string& expr, const std::string& output) {
  Hypersurface h =
      expr.empty()
          ? load_surface(input, common.order, common.graph_index)
          : Hypersurface::from_expression(expr, common.order,
                                          common.graph_index);
  std::ostringstream manifest;
  h.save(manifest);
  std::ostringstream summary;
  summary << "parsed n=" << h.n() << " normal="
          << (h.is_normal() ? "true" : "false") << " order="
          << (h.thetabar().is_exact() ? std::string("exact")
                                      : std::to_string(h.thetabar().known_order()))
          << " terms=" << h.thetabar().terms().size();
  write_text_or_file(manifest.str(), output, summary.str());
  return kOk;
}

int run_classify(const CommonFlags& common, const std::string& input,
                 int k_max, int beta_bound, unsigned long long seed) {
  Hypersurface h = load_surface(input, common.order, common.graph_index);
  ClassificationReport rep =
      classify(h, common.order, k_max, beta_bound, seed);
  if (common.text())
    std::cout << "classification of " << input << " at order " << rep.order
              << "\n";
  for (const std::string& line : rep.machine_lines())
    std::cout << line << "\n";
  return kOk;
}

int run_minimal(const CommonFlags& common, const std::string& input,
                unsigned long long seed) {
  Hypersurface h = load_surface(input, common.order, common.graph_index);
  MinimalityReport rep = is_minimal(h, seed, common.order);
  std::cout << rep.to_record() << "\n";
  return rep.minimal ? kOk : kInconclusive;
}

int run_normalize(const CommonFlags& common, const std::string& input,
                  const std::string& output) {
  Hypersurface h = load_surface(input, common.order, common.graph_index);
  TransformedHypersurface t = normalize(h, common.order);
  std::ostringstream payload;
  t.surface.save(payload);
  t.change.save(payload);
  std::ostringstream summary;
  summary << "normalized normal=" << (t.surface.is_normal() ? "true" : "false")
          << " order=" << common.order;
  if (common.text() && output.empty()) std::cout << summary.str() << "\n";
  write_text_or_file(payload.str(), output, summary.str());
  return kOk;
}

int run_verify_map(const CommonFlags& common, const std::string& source,
                   const std::string& target, const std::string& map_path) {
  Hypersurface m = load_surface(source, common.order, common.graph_index);
  Hypersurface mp = load_surface(target, common.order, common.graph_index);
  FormalMap map = load_map(map_path);
  PowerSeries residual = tangency_check(map, m, mp, common.order);
  InvertibilityReport inv = check_invertible(map);
  std::cout << "tangency status=" << (residual.is_zero() ? "ok" : "fail");
  if (!residual.is_zero())
    std::cout << " vanishing_order=" << residual.vanishing_order();
  std::cout << " order=" << common.order << "\n";
  std::cout << "invertible=" << (inv.invertible() ? "true" : "false")
            << " jacobian=" << to_string(inv.jacobian_determinant)
            << " wblock=" << to_string(inv.w_block_determinant) << "\n";
  return kOk;
}

int run_reflect(const CommonFlags& common, const std::string& target,
                const std::string& map_path, int beta_bound) {
  Hypersurface mp = load_surface(target, common.order, common.graph_index);
  FormalMap map = load_map(map_path);
  ReflectionFunction rf =
      reflection_function(map, mp, common.order, beta_bound);
  if (common.text())
    std::cout << "reflection function, coefficient slices through bound "
              << beta_bound << "\n";
  write_series_record(std::cout, rf.series(), "reflection");
  return kOk;
}

int run_identities(const CommonFlags& common, const std::string& source,
                   const std::string& target, const std::string& map_path,
                   int beta_bound) {
  Hypersurface m = load_surface(source, common.order, common.graph_index);
  Hypersurface mp = load_surface(target, common.order, common.graph_index);
  FormalMap map = load_map(map_path);
  const int n = m.n();
  for (const Multiindex& beta : multiindices_in_range(n - 1, 0, beta_bound)) {
    IdentityReport rep =
        reflection_identity(map, m, mp, beta, common.order);
    std::cout << rep.record() << "\n";
    PowerSeries res =
        conjugate_reflection_identity(map, m, mp, beta, common.order);
    std::cout << "identity=5.9 beta=" << detail::format_multiindex(beta)
              << " known="
              << (res.is_exact() ? std::string("exact")
                                 : std::to_string(res.known_order()))
              << " status=" << (res.is_zero() ? "zero" : "nonzero") << "\n";
  }
  return kOk;
}

int run_chains(const CommonFlags& common, const std::string& source,
               const std::string& target, const std::string& map_path,
               int beta_bound) {
  Hypersurface m = load_surface(source, common.order, common.graph_index);
  Hypersurface mp = load_surface(target, common.order, common.graph_index);
  FormalMap map = load_map(map_path);
  std::optional<MultiindexWitness> wit =
      second_chain_witness(map, m, mp, beta_bound, common.order);
  if (!wit) {
    std::cout << "chains witness=none beta_bound=" << beta_bound
              << " order=" << common.order << "\n";
    return kInconclusive;
  }
  const int kappa0 = kappa_order(wit->minor_det);
  SecondChainReport rep =
      second_chain_system(map, m, mp, kappa0, common.order);
  for (const std::string& line : rep.machine_lines())
    std::cout << line << "\n";
  return rep.witness ? kOk : kInconclusive;
}

int run_flows(const CommonFlags& common, const std::string& input,
              int degree_bound) {
  Hypersurface h = load_surface(input, common.order, common.graph_index);
  std::optional<TangentField> field =
      find_tangent_field(h, degree_bound, common.order);
  if (!field) {
    std::cout << "field=none degree_bound=" << degree_bound
              << " order=" << common.order << "\n";
    return kInconclusive;
  }
  if (common.text()) std::cout << "tangent field found\n";
  field->save(std::cout);
  SelfMapReport rep = nonconvergent_selfmap(h, *field, common.order);
  std::cout << rep.record() << "\n";
  rep.map.save(std::cout);
  if (common.text())
    std::cout << "tangency ok to order " << rep.order << "\n";
  return kOk;
}

int run_artin(const CommonFlags& common, const std::string& system_path,
              const std::string& solution_path) {
  std::vector<PowerSeries> system = load_series_tuple(system_path);
  std::vector<PowerSeries> solution = load_series_tuple(solution_path);
  ArtinReport rep = artin_witness(system, solution, common.order);
  std::cout << "artin status="
            << (rep.satisfied ? "satisfied" : "inconclusive")
            << " order=" << rep.order << " rows=[";
  for (std::size_t i = 0; i < rep.rows.size(); ++i)
    std::cout << (i ? "," : "") << rep.rows[i];
  std::cout << "]\n";
  if (common.text()) {
    std::cout << rep.verdict() << "\n";
    if (rep.satisfied) write_series_record(std::cout, rep.minor, "minor");
  }
  return rep.satisfied ? kOk : kInconclusive;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Exact formal power series toolkit for real-analytic hypersurfaces"};
  app.require_subcommand(1);

  CommonFlags common;
  std::string input, source, target, map_path, expr, output, solution_path;
  int k_max = 6;
  int beta_bound = 4;
  int identities_bound = 3;
  int degree_bound = 3;
  unsigned long long seed = 1;

  CLI::App* parse_cmd =
      app.add_subcommand("parse", "expand a defining expression or manifest");
  parse_cmd->add_option("input", input, "expression file or manifest");
  parse_cmd->add_option("--expr", expr, "inline defining expression");
  parse_cmd->add_option("--output", output, "write the manifest here");
  common.attach(parse_cmd);

  CLI::App* classify_cmd =
      app.add_subcommand("classify", "nondegeneracy conditions I through V");
  classify_cmd->add_option("input", input)->required();
  classify_cmd->add_option("--kmax", k_max, "largest jet order tested")
      ->capture_default_str();
  classify_cmd->add_option("--beta-bound", beta_bound,
                           "multiindex bound for witness selection")
      ->capture_default_str();
  classify_cmd->add_option("--seed", seed, "randomized rank probe seed")
      ->capture_default_str();
  common.attach(classify_cmd);

  CLI::App* minimal_cmd = app.add_subcommand("minimal", "minimality test");
  minimal_cmd->add_option("input", input)->required();
  minimal_cmd->add_option("--seed", seed)->capture_default_str();
  common.attach(minimal_cmd);

  CLI::App* normalize_cmd =
      app.add_subcommand("normalize", "pass to normal coordinates");
  normalize_cmd->add_option("input", input)->required();
  normalize_cmd->add_option("--output", output,
                            "write surface and change-of-coordinates here");
  common.attach(normalize_cmd);

  CLI::App* verify_cmd = app.add_subcommand(
      "verify-map", "tangency and invertibility of a formal map");
  verify_cmd->add_option("source", source)->required();
  verify_cmd->add_option("target", target)->required();
  verify_cmd->add_option("map", map_path)->required();
  common.attach(verify_cmd);

  CLI::App* reflect_cmd =
      app.add_subcommand("reflect", "reflection function of a map");
  reflect_cmd->add_option("target", target)->required();
  reflect_cmd->add_option("map", map_path)->required();
  reflect_cmd->add_option("--beta-bound", identities_bound,
                          "coefficient slice bound")
      ->capture_default_str();
  common.attach(reflect_cmd);

  CLI::App* identities_cmd = app.add_subcommand(
      "identities", "reflection identities along a tangent map");
  identities_cmd->add_option("source", source)->required();
  identities_cmd->add_option("target", target)->required();
  identities_cmd->add_option("map", map_path)->required();
  identities_cmd
      ->add_option("--beta-bound", identities_bound, "multiindex sweep bound")
      ->capture_default_str();
  common.attach(identities_cmd);

  CLI::App* chains_cmd = app.add_subcommand(
      "chains", "second-chain determinant system along a map");
  chains_cmd->add_option("source", source)->required();
  chains_cmd->add_option("target", target)->required();
  chains_cmd->add_option("map", map_path)->required();
  chains_cmd->add_option("--beta-bound", beta_bound,
                         "multiindex bound for witness selection")
      ->capture_default_str();
  common.attach(chains_cmd);

  CLI::App* flows_cmd = app.add_subcommand(
      "flows", "tangent holomorphic fields and their induced self-maps");
  flows_cmd->add_option("input", input)->required();
  flows_cmd->add_option("--degree-bound", degree_bound,
                        "polynomial coefficient degree bound")
      ->capture_default_str();
  common.attach(flows_cmd);

  CLI::App* artin_cmd = app.add_subcommand(
      "artin", "convergence-criterion witness for a formal solution");
  artin_cmd->add_option("system", input)->required();
  artin_cmd->add_option("solution", solution_path)->required();
  common.attach(artin_cmd, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (parse_cmd->parsed()) {
      if (input.empty() && expr.empty())
        throw std::runtime_error("parse needs an input file or --expr");
      return run_parse(common, input, expr, output);
    }
    if (classify_cmd->parsed())
      return run_classify(common, input, k_max, beta_bound, seed);
    if (minimal_cmd->parsed()) return run_minimal(common, input, seed);
    if (normalize_cmd->parsed()) return run_normalize(common, input, output);
    if (verify_cmd->parsed())
      return run_verify_map(common, source, target, map_path);
    if (reflect_cmd->parsed())
      return run_reflect(common, target, map_path, identities_bound);
    if (identities_cmd->parsed())
      return run_identities(common, source, target, map_path,
                            identities_bound);
    if (chains_cmd->parsed())
      return run_chains(common, source, target, map_path, beta_bound);
    if (flows_cmd->parsed()) return run_flows(common, input, degree_bound);
    if (artin_cmd->parsed()) return run_artin(common, input, solution_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
