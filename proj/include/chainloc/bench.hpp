#pragma once

// Experiment-grid runner: builds or loads instances, solves every
// (n, p, pi, decay) cell with the multi-start optimizer, and renders the
// results as text tables, a results CSV, and location dumps for plotting.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "chainloc/errors.hpp"
#include "chainloc/instance.hpp"
#include "chainloc/market_model.hpp"
#include "chainloc/optimizer.hpp"

namespace chainloc {

// Where the instance for a given n comes from.
struct InstanceSource {
  enum class Kind { Generated, Directory };

  Kind kind = Kind::Generated;
  GeneratorSeeds seeds;
  GeneratorConfig config;
  // Directory sources hold one file per size, named n<N>.csv.
  std::filesystem::path directory;

  static std::filesystem::path file_name(std::size_t n) { return "n" + std::to_string(n) + ".csv"; }

  Instance load(std::size_t n) const {
    if (kind == Kind::Generated) return generate_instance(n, seeds, config);
    return read_instance(directory / file_name(n));
  }
};

struct ExperimentGrid {
  std::vector<std::size_t> ns{100, 200, 500, 1000, 2000};
  std::vector<std::size_t> ps{1, 2, 3, 4, 5, 10, 15, 20};
  std::vector<double> pis{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<DecayKind> decays{DecayKind::Power, DecayKind::Exponential};
  double power_lambda = 2.0;
  double exp_lambda = 1.0;
  OptimizerConfig optimizer = desk_optimizer();
  InstanceSource source;
  unsigned parallel_cells = 1;

  static OptimizerConfig desk_optimizer() {
    OptimizerConfig c;
    c.starts = 20;
    return c;
  }

  // The full reference grid: nine sizes up to 20000 and 100 starts per cell.
  static ExperimentGrid full() {
    ExperimentGrid g;
    g.ns = {100, 200, 500, 1000, 2000, 5000, 10000, 15000, 20000};
    g.optimizer.starts = 100;
    return g;
  }

  double lambda_for(DecayKind kind) const {
    return kind == DecayKind::Power ? power_lambda : exp_lambda;
  }

  void validate() const {
    if (ns.empty() || ps.empty() || pis.empty() || decays.empty()) {
      throw InvalidArgument("experiment grid has an empty axis");
    }
    for (double pi : pis) (void)TripMix(pi);
    for (std::size_t p : ps) {
      if (p < 1) throw InvalidArgument("experiment grid: p must be at least 1");
    }
    for (std::size_t n : ns) {
      if (n < 1) throw InvalidArgument("experiment grid: n must be at least 1");
    }
    check_config(optimizer);
  }
};

struct GridCell {
  std::size_t n = 0;
  std::size_t p = 0;
  double pi = 0.0;
  DecayKind decay = DecayKind::Power;
  double lambda = 2.0;
};

struct ResultRecord {
  std::size_t n = 0;
  std::size_t p = 0;
  double pi = 0.0;
  DecayKind decay = DecayKind::Power;
  double lambda = 0.0;
  double proportion = std::nan("");
  double total_share = std::nan("");
  std::size_t starts = 0;
  double minutes = 0.0;  // wall clock for all starts
  std::vector<Point> layout;
  bool failed = false;
  std::string error;
};

inline std::vector<GridCell> expand(const ExperimentGrid& grid) {
  std::vector<GridCell> cells;
  for (std::size_t n : grid.ns) {
    for (DecayKind kind : grid.decays) {
      for (std::size_t p : grid.ps) {
        for (double pi : grid.pis) cells.push_back({n, p, pi, kind, grid.lambda_for(kind)});
      }
    }
  }
  return cells;
}

// Solves one cell on an already loaded instance.
inline ResultRecord run_cell(const GridCell& cell, const Instance& instance,
                             const OptimizerConfig& config) {
  ResultRecord rec;
  rec.n = cell.n;
  rec.p = cell.p;
  rec.pi = cell.pi;
  rec.decay = cell.decay;
  rec.lambda = cell.lambda;
  rec.starts = config.starts;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const DecayModel decay = DecayModel::make(cell.decay, instance, cell.lambda);
    const Solution sol = multistart_optimize(instance, cell.p, decay, TripMix(cell.pi), config);
    rec.total_share = sol.value;
    rec.proportion = sol.value / instance.total_buying_power();
    for (const Site& s : sol.layout.variable) rec.layout.push_back(s.location);
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  rec.minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  return rec;
}

// Loads the instance, then solves. A load failure marks the cell failed.
inline ResultRecord run_cell(const GridCell& cell, const InstanceSource& source,
                             const OptimizerConfig& config) {
  Instance instance;
  try {
    instance = source.load(cell.n);
  } catch (const std::exception& e) {
    ResultRecord rec;
    rec.n = cell.n;
    rec.p = cell.p;
    rec.pi = cell.pi;
    rec.decay = cell.decay;
    rec.lambda = cell.lambda;
    rec.starts = config.starts;
    rec.failed = true;
    rec.error = std::string("instance load failed: ") + e.what();
    return rec;
  }
  return run_cell(cell, instance, config);
}

struct GridRun {
  std::vector<ResultRecord> records;  // in expand() order
  std::size_t failed = 0;
};

using ProgressCallback = std::function<void(const ResultRecord&, std::size_t done, std::size_t total)>;

inline GridRun run_grid(const ExperimentGrid& grid, const ProgressCallback& progress = {}) {
  grid.validate();
  const auto cells = expand(grid);

  // One load per n; failures are kept and reported per cell.
  std::map<std::size_t, Instance> instances;
  std::map<std::size_t, std::string> load_errors;
  for (std::size_t n : grid.ns) {
    if (instances.count(n) || load_errors.count(n)) continue;
    try {
      instances.emplace(n, grid.source.load(n));
    } catch (const std::exception& e) {
      load_errors.emplace(n, std::string("instance load failed: ") + e.what());
    }
  }

  GridRun run;
  run.records.resize(cells.size());
  std::mutex progress_mutex;
  std::size_t done = 0;
  auto solve = [&](std::size_t k) {
    const GridCell& cell = cells[k];
    ResultRecord rec;
    if (auto it = load_errors.find(cell.n); it != load_errors.end()) {
      rec.n = cell.n;
      rec.p = cell.p;
      rec.pi = cell.pi;
      rec.decay = cell.decay;
      rec.lambda = cell.lambda;
      rec.starts = grid.optimizer.starts;
      rec.failed = true;
      rec.error = it->second;
    } else {
      rec = run_cell(cell, instances.at(cell.n), grid.optimizer);
    }
    run.records[k] = std::move(rec);
    if (progress) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      progress(run.records[k], ++done, cells.size());
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(grid.parallel_cells,
                                                           static_cast<unsigned>(cells.size())));
  if (workers == 1) {
    for (std::size_t k = 0; k < cells.size(); ++k) solve(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t k = next.fetch_add(1); k < cells.size(); k = next.fetch_add(1)) solve(k);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  for (const auto& r : run.records) run.failed += r.failed ? 1 : 0;
  return run;
}

// ---------------------------------------------------------------------------
// Output

inline constexpr const char* kResultsHeader = "n,p,pi,decay,lambda,proportion,total_share,starts,minutes";
inline constexpr const char* kLocationsHeader = "class,x,y,weight";

inline void write_results_csv(std::span<const ResultRecord> records, std::ostream& out,
                              bool include_minutes = true) {
  using detail::format_double;
  out << kResultsHeader << '\n';
  for (const auto& r : records) {
    out << r.n << ',' << r.p << ',' << format_double(r.pi) << ',' << to_string(r.decay) << ','
        << format_double(r.lambda) << ',' << format_double(r.proportion) << ','
        << format_double(r.total_share) << ',' << r.starts << ','
        << (include_minutes ? format_double(r.minutes) : std::string()) << '\n';
  }
}

inline std::vector<ResultRecord> read_results_csv(std::istream& in,
                                                  const std::string& source = "<results>") {
  std::vector<ResultRecord> records;
  std::string raw;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kResultsHeader) throw ParseError(source, line_no, "header", "unexpected header");
      header_seen = true;
      continue;
    }
    const auto f = detail::split_csv(line);
    if (f.size() != 9) {
      throw ParseError(source, line_no, "record", "expected 9 fields, got " + std::to_string(f.size()));
    }
    auto count = [&](std::string_view text, const char* field) {
      std::size_t v = 0;
      text = detail::trim(text);
      const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
      if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw ParseError(source, line_no, field, "not an unsigned integer");
      }
      return v;
    };
    ResultRecord r;
    r.n = count(f[0], "n");
    r.p = count(f[1], "p");
    r.pi = detail::parse_double(f[2], source, line_no, "pi");
    try {
      r.decay = parse_decay_kind(detail::trim(f[3]));
    } catch (const InvalidArgument& e) {
      throw ParseError(source, line_no, "decay", e.what());
    }
    r.lambda = detail::parse_double(f[4], source, line_no, "lambda");
    r.proportion = detail::parse_double(f[5], source, line_no, "proportion");
    r.total_share = detail::parse_double(f[6], source, line_no, "total_share");
    r.starts = count(f[7], "starts");
    r.minutes = detail::trim(f[8]).empty() ? 0.0 : detail::parse_double(f[8], source, line_no, "minutes");
    r.failed = std::isnan(r.proportion);
    records.push_back(std::move(r));
  }
  if (!header_seen) throw ParseError(source, line_no, "header", "missing header");
  return records;
}

// One table per (n, decay, lambda): rows p, columns pi, proportions to five
// decimals, followed by run times in minutes. Failed cells print as "-".
inline std::string format_tables(std::span<const ResultRecord> records) {
  using Key = std::tuple<std::size_t, int, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<const ResultRecord*>> groups;
  for (const auto& r : records) {
    const Key key{r.n, static_cast<int>(r.decay), r.lambda};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }

  std::ostringstream out;
  char buf[64];
  for (const Key& key : order) {
    const auto& group = groups[key];
    std::set<std::size_t> ps;
    std::set<double> pis;
    std::map<std::pair<std::size_t, double>, const ResultRecord*> cell;
    for (const auto* r : group) {
      ps.insert(r->p);
      pis.insert(r->pi);
      cell[{r->p, r->pi}] = r;
    }
    const auto& first = *group.front();
    const std::string decay_name = first.decay == DecayKind::Power ? "Power" : "Exponential";
    std::snprintf(buf, sizeof buf, "%g", first.lambda);
    out << "Results for n=" << first.n << ", " << decay_name << " decay (lambda=" << buf << ")\n";

    auto header = [&] {
      out << "   p";
      for (double pi : pis) {
        if (std::abs(pi * 10.0 - std::round(pi * 10.0)) < 1e-9) {
          std::snprintf(buf, sizeof buf, "  pi=%.1f", pi);
        } else {
          std::snprintf(buf, sizeof buf, " pi=%-4g", pi);
        }
        out << buf;
      }
      out << '\n';
    };
    auto body = [&](bool proportions) {
      for (std::size_t p : ps) {
        std::snprintf(buf, sizeof buf, "%4zu", p);
        out << buf;
        for (double pi : pis) {
          const auto it = cell.find({p, pi});
          if (it == cell.end() || std::isnan(it->second->proportion)) {
            out << "        -";
          } else if (proportions) {
            std::snprintf(buf, sizeof buf, "  %7.5f", it->second->proportion);
            out << buf;
          } else {
            std::snprintf(buf, sizeof buf, "  %7.2f", it->second->minutes);
            out << buf;
          }
        }
        out << '\n';
      }
    };
    out << "Proportion of market share captured\n";
    header();
    body(true);
    out << "Run time in minutes for all " << first.starts << " starts\n";
    header();
    body(false);
    out << '\n';
  }
  return out.str();
}

inline std::string failure_summary(std::span<const ResultRecord> records) {
  std::ostringstream out;
  std::size_t failed = 0;
  for (const auto& r : records) {
    if (!r.failed) continue;
    ++failed;
    out << "  n=" << r.n << " p=" << r.p << " pi=" << detail::format_double(r.pi)
        << " decay=" << to_string(r.decay) << ": " << r.error << '\n';
  }
  if (failed == 0) return "All " + std::to_string(records.size()) + " cells succeeded.\n";
  return std::to_string(failed) + " of " + std::to_string(records.size()) + " cells failed:\n" +
         out.str();
}

// Location dump for external plotting: class,x,y,weight.
inline void emit_locations(const ResultRecord& record, const Instance& instance, std::ostream& out,
                           double facility_attractiveness = 1.0) {
  using detail::format_double;
  out << kLocationsHeader << '\n';
  for (const auto& d : instance.demand) {
    out << "demand," << format_double(d.location.x) << ',' << format_double(d.location.y) << ','
        << format_double(d.buying_power) << '\n';
  }
  auto sites = [&](const char* cls, const std::vector<Site>& list) {
    for (const auto& s : list) {
      out << cls << ',' << format_double(s.location.x) << ',' << format_double(s.location.y) << ','
          << format_double(s.attractiveness) << '\n';
    }
  };
  sites("competitor", instance.competitors);
  sites("cluster", instance.clusters);
  sites("fixed_chain", instance.fixed_chain);
  for (const Point& p : record.layout) {
    out << "new_facility," << format_double(p.x) << ',' << format_double(p.y) << ','
        << format_double(facility_attractiveness) << '\n';
  }
}

// New facilities lying within `tolerance` of some cluster.
inline std::size_t count_cluster_coincident(std::span<const Point> layout, const Instance& instance,
                                            double tolerance = 1e-3) {
  std::size_t count = 0;
  for (const Point& p : layout) {
    for (const auto& c : instance.clusters) {
      if (distance(p, c.location) < tolerance) {
        ++count;
        break;
      }
    }
  }
  return count;
}

}  // namespace chainloc
