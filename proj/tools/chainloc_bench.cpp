// chainloc_bench: instance generation, solving, and experiment grids for the
// multipurpose-trip chain location model.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "chainloc/chainloc.hpp"

namespace {

using namespace chainloc;
using nlohmann::json;

struct Options {
  // Instance
  std::size_t n = 100;
  std::string instance_path;
  std::int64_t demand_seed = 97'531;
  std::int64_t competitor_seed = 314'159;
  std::int64_t cluster_seed = 271'828;
  std::int64_t power_seed = 123'457;
  std::int64_t competitor_attr_seed = 654'323;
  std::int64_t cluster_attr_seed = 777'773;
  std::int64_t multiplier = LcgState::kDefaultMultiplier;
  std::size_t competitors = 10;
  std::size_t clusters = 10;

  // Problem
  std::size_t p = 1;
  double pi = 0.0;
  std::string decay = "power";
  double lambda = 0.0;  // 0: 2 for power, 1 for exp

  // Optimizer
  std::size_t starts = 20;
  std::int64_t seed = 424'243;
  unsigned threads = 1;

  // Output
  std::string out;
  std::string format = "csv";

  // Subcommand-specific
  std::size_t resolution = 201;
  std::size_t trials = 1000;
  double tolerance = 1e-3;
  std::vector<std::size_t> ns;
  std::vector<std::size_t> ps;
  std::vector<double> pis;
  std::string grid_decay = "both";
  std::string instance_dir;
  std::string tables;
  bool full = false;
  unsigned parallel_cells = 1;
  bool quiet = false;
};

GeneratorSeeds seeds_from(const Options& o) {
  GeneratorSeeds s;
  s.demand = LcgState(o.demand_seed, o.multiplier);
  s.competitors = LcgState(o.competitor_seed, o.multiplier);
  s.clusters = LcgState(o.cluster_seed, o.multiplier);
  s.buying_power = LcgState(o.power_seed, o.multiplier);
  s.competitor_attractiveness = LcgState(o.competitor_attr_seed, o.multiplier);
  s.cluster_attractiveness = LcgState(o.cluster_attr_seed, o.multiplier);
  return s;
}

GeneratorConfig generator_from(const Options& o) {
  GeneratorConfig c;
  c.competitors = o.competitors;
  c.clusters = o.clusters;
  return c;
}

Instance load_instance(const Options& o) {
  if (!o.instance_path.empty()) return read_instance(std::filesystem::path(o.instance_path));
  return generate_instance(o.n, seeds_from(o), generator_from(o));
}

double lambda_for(const Options& o, DecayKind kind) {
  if (o.lambda > 0.0) return o.lambda;
  return kind == DecayKind::Power ? 2.0 : 1.0;
}

OptimizerConfig optimizer_from(const Options& o) {
  OptimizerConfig c;
  c.starts = o.starts;
  c.seed = LcgState(o.seed, o.multiplier);
  c.threads = o.threads;
  return c;
}

// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw Error("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

json layout_json(std::span<const Point> layout) {
  json arr = json::array();
  for (const Point& p : layout) arr.push_back({{"x", p.x}, {"y", p.y}});
  return arr;
}

json record_json(const ResultRecord& r) {
  json j = {{"n", r.n},           {"p", r.p},
            {"pi", r.pi},         {"decay", std::string(to_string(r.decay))},
            {"lambda", r.lambda}, {"starts", r.starts},
            {"minutes", r.minutes}, {"failed", r.failed}};
  if (r.failed) {
    j["error"] = r.error;
  } else {
    j["proportion"] = r.proportion;
    j["total_share"] = r.total_share;
    j["layout"] = layout_json(r.layout);
  }
  return j;
}

void check_format(const Options& o) {
  if (o.format != "csv" && o.format != "json") {
    throw InvalidArgument("--format must be csv or json");
  }
}

int cmd_generate(const Options& o) {
  const Instance instance = generate_instance(o.n, seeds_from(o), generator_from(o));
  Output out(o.out);
  write_instance(instance, out.stream());
  return 0;
}

ResultRecord solve_record(const Options& o, const Instance& instance) {
  const DecayKind kind = parse_decay_kind(o.decay);
  const GridCell cell{instance.demand.size(), o.p, o.pi, kind, lambda_for(o, kind)};
  return run_cell(cell, instance, optimizer_from(o));
}

int cmd_solve(const Options& o) {
  check_format(o);
  const Instance instance = load_instance(o);
  const ResultRecord rec = solve_record(o, instance);
  Output out(o.out);
  if (o.format == "json") {
    out.stream() << record_json(rec).dump(2) << '\n';
  } else {
    write_results_csv(std::span<const ResultRecord>(&rec, 1), out.stream());
  }
  if (rec.failed) {
    std::cerr << "solve failed: " << rec.error << '\n';
    return 1;
  }
  return 0;
}

int cmd_locations(const Options& o) {
  const Instance instance = load_instance(o);
  const ResultRecord rec = solve_record(o, instance);
  if (rec.failed) {
    std::cerr << "solve failed: " << rec.error << '\n';
    return 1;
  }
  Output out(o.out);
  emit_locations(rec, instance, out.stream());
  std::cerr << "new facilities within " << o.tolerance
            << " of a cluster: " << count_cluster_coincident(rec.layout, instance, o.tolerance)
            << " of " << rec.layout.size() << '\n';
  return 0;
}

int cmd_oracle(const Options& o) {
  check_format(o);
  const Instance instance = load_instance(o);
  const DecayKind kind = parse_decay_kind(o.decay);
  const DecayModel decay = DecayModel::make(kind, instance, lambda_for(o, kind));
  const OracleResult r = grid_oracle_p1(instance, decay, TripMix(o.pi), o.resolution);
  const double proportion = r.value / instance.total_buying_power();
  Output out(o.out);
  if (o.format == "json") {
    out.stream() << json{{"x", r.point.x},
                         {"y", r.point.y},
                         {"total_share", r.value},
                         {"proportion", proportion}}
                        .dump(2)
                 << '\n';
  } else {
    out.stream() << "x,y,total_share,proportion\n"
                 << detail::format_double(r.point.x) << ',' << detail::format_double(r.point.y)
                 << ',' << detail::format_double(r.value) << ','
                 << detail::format_double(proportion) << '\n';
  }
  return 0;
}

int cmd_baseline(const Options& o) {
  check_format(o);
  const Instance instance = load_instance(o);
  const DecayKind kind = parse_decay_kind(o.decay);
  const DecayModel decay = DecayModel::make(kind, instance, lambda_for(o, kind));
  const double mean = random_baseline(instance, o.p, decay, TripMix(o.pi), o.trials,
                                      LcgState(o.seed, o.multiplier));
  const double expected = static_cast<double>(o.p) /
                          static_cast<double>(instance.competitors.size() + o.p);
  Output out(o.out);
  if (o.format == "json") {
    out.stream() << json{{"p", o.p},
                         {"trials", o.trials},
                         {"mean_proportion", mean},
                         {"equal_split", expected}}
                        .dump(2)
                 << '\n';
  } else {
    out.stream() << "p,trials,mean_proportion,equal_split\n"
                 << o.p << ',' << o.trials << ',' << detail::format_double(mean) << ','
                 << detail::format_double(expected) << '\n';
  }
  return 0;
}

int cmd_grid(const Options& o) {
  check_format(o);
  ExperimentGrid grid = o.full ? ExperimentGrid::full() : ExperimentGrid{};
  if (!o.ns.empty()) grid.ns = o.ns;
  if (!o.ps.empty()) grid.ps = o.ps;
  if (!o.pis.empty()) grid.pis = o.pis;
  if (o.grid_decay == "power") {
    grid.decays = {DecayKind::Power};
  } else if (o.grid_decay == "exp") {
    grid.decays = {DecayKind::Exponential};
  } else if (o.grid_decay != "both") {
    throw InvalidArgument("--decay must be power, exp or both for the grid");
  }
  if (o.lambda > 0.0) {
    grid.power_lambda = o.lambda;
    grid.exp_lambda = o.lambda;
  }
  grid.optimizer = optimizer_from(o);
  if (o.full && o.starts == 20) grid.optimizer.starts = 100;
  grid.parallel_cells = o.parallel_cells;
  if (!o.instance_dir.empty()) {
    grid.source.kind = InstanceSource::Kind::Directory;
    grid.source.directory = o.instance_dir;
  } else {
    grid.source.seeds = seeds_from(o);
    grid.source.config = generator_from(o);
  }

  ProgressCallback progress;
  if (!o.quiet) {
    progress = [](const ResultRecord& r, std::size_t done, std::size_t total) {
      std::fprintf(stderr, "[%zu/%zu] n=%zu p=%zu pi=%g %s: %s (%.2f min)\n", done, total, r.n,
                   r.p, r.pi, std::string(to_string(r.decay)).c_str(),
                   r.failed ? "FAILED" : std::to_string(r.proportion).c_str(), r.minutes);
    };
  }
  const GridRun run = run_grid(grid, progress);

  Output out(o.out);
  if (o.format == "json") {
    json arr = json::array();
    for (const auto& r : run.records) arr.push_back(record_json(r));
    out.stream() << arr.dump(2) << '\n';
  } else {
    write_results_csv(run.records, out.stream());
  }
  const std::string tables = format_tables(run.records);
  if (!o.tables.empty()) {
    std::ofstream t(o.tables);
    if (!t) throw Error("cannot open '" + o.tables + "' for writing");
    t << tables;
  } else if (!o.out.empty()) {
    std::cout << tables;
  }
  std::cerr << failure_summary(run.records);
  return run.failed == 0 ? 0 : 2;
}

void add_instance_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--n", o.n, "Number of demand points for generated instances");
  cmd->add_option("--instance", o.instance_path, "Read the instance from this file instead");
  cmd->add_option("--demand-seed", o.demand_seed, "LCG seed for demand coordinates");
  cmd->add_option("--competitor-seed", o.competitor_seed, "LCG seed for competitor coordinates");
  cmd->add_option("--cluster-seed", o.cluster_seed, "LCG seed for cluster coordinates");
  cmd->add_option("--power-seed", o.power_seed, "LCG seed for buying power");
  cmd->add_option("--competitor-attr-seed", o.competitor_attr_seed,
                  "LCG seed for competitor attractiveness");
  cmd->add_option("--cluster-attr-seed", o.cluster_attr_seed, "LCG seed for cluster attractiveness");
  cmd->add_option("--multiplier", o.multiplier, "LCG multiplier theta");
  cmd->add_option("--competitors", o.competitors, "Competitors in generated instances");
  cmd->add_option("--clusters", o.clusters, "Clusters in generated instances");
}

void add_problem_flags(CLI::App* cmd, Options& o, bool with_p = true) {
  if (with_p) cmd->add_option("--p", o.p, "Number of new chain facilities");
  cmd->add_option("--pi", o.pi, "Proportion of multipurpose trips in [0,1]");
  cmd->add_option("--decay", o.decay, "Distance decay: power or exp");
  cmd->add_option("--lambda", o.lambda, "Decay parameter (default 2 for power, 1 for exp)");
}

void add_optimizer_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--starts", o.starts, "Random starts per cell");
  cmd->add_option("--seed", o.seed, "LCG seed for start layouts");
  cmd->add_option("--threads", o.threads, "Worker threads across starts");
}

void add_output_flags(CLI::App* cmd, Options& o, bool with_format = true) {
  cmd->add_option("--out", o.out, "Output path (default: stdout)");
  if (with_format) cmd->add_option("--format", o.format, "Output format: csv or json");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chain facility location with multipurpose shopping trips"};
  app.require_subcommand(1);
  Options o;

  auto* generate = app.add_subcommand("generate", "Write a generated instance file");
  add_instance_flags(generate, o);
  add_output_flags(generate, o, false);

  auto* solve = app.add_subcommand("solve", "Multi-start optimization of one cell");
  add_instance_flags(solve, o);
  add_problem_flags(solve, o);
  add_optimizer_flags(solve, o);
  add_output_flags(solve, o);

  auto* grid = app.add_subcommand("grid", "Run an experiment grid and emit tables and CSV");
  add_instance_flags(grid, o);
  grid->add_option("--ns", o.ns, "Instance sizes")->delimiter(',');
  grid->add_option("--ps", o.ps, "Numbers of new facilities")->delimiter(',');
  grid->add_option("--pis", o.pis, "Multipurpose proportions")->delimiter(',');
  grid->add_option("--decay", o.grid_decay, "power, exp or both");
  grid->add_option("--lambda", o.lambda, "Decay parameter override for every decay kind");
  grid->add_option("--instance-dir", o.instance_dir, "Directory of n<N>.csv instance files");
  grid->add_option("--tables", o.tables, "Write the text tables to this path");
  grid->add_option("--parallel-cells", o.parallel_cells, "Cells solved concurrently");
  grid->add_flag("--full", o.full, "Full reference grid (n up to 20000, 100 starts)");
  grid->add_flag("--quiet", o.quiet, "No per-cell progress on stderr");
  add_optimizer_flags(grid, o);
  add_output_flags(grid, o);

  auto* oracle = app.add_subcommand("oracle", "Grid-search optimum for a single new facility");
  add_instance_flags(oracle, o);
  add_problem_flags(oracle, o, false);
  oracle->add_option("--resolution", o.resolution, "Coarse grid nodes per axis (>= 101)");
  add_output_flags(oracle, o);

  auto* baseline = app.add_subcommand("baseline", "Mean share of randomly placed facilities");
  add_instance_flags(baseline, o);
  add_problem_flags(baseline, o);
  baseline->add_option("--trials", o.trials, "Random layouts averaged");
  baseline->add_option("--seed", o.seed, "LCG seed for random layouts");
  add_output_flags(baseline, o);

  auto* locations = app.add_subcommand("locations", "Solve and dump all locations for plotting");
  add_instance_flags(locations, o);
  add_problem_flags(locations, o);
  add_optimizer_flags(locations, o);
  locations->add_option("--tolerance", o.tolerance, "Distance counted as coincident with a cluster");
  add_output_flags(locations, o, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return cmd_generate(o);
    if (*solve) return cmd_solve(o);
    if (*grid) return cmd_grid(o);
    if (*oracle) return cmd_oracle(o);
    if (*baseline) return cmd_baseline(o);
    if (*locations) return cmd_locations(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
