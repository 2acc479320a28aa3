#pragma once

// Problem instances: demand points, competing facilities, clusters selling a
// different product, and optional pre-existing facilities of the chain.
// Includes the reproducible generator and the sectioned CSV file format.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "chainloc/errors.hpp"
#include "chainloc/geometry.hpp"
#include "chainloc/lcg.hpp"

namespace chainloc {

struct DemandPoint {
  Point location;
  double buying_power = 0.0;

  friend bool operator==(const DemandPoint&, const DemandPoint&) = default;
};

// A facility with a location and a gravity-model attractiveness.
struct Site {
  Point location;
  double attractiveness = 1.0;

  friend bool operator==(const Site&, const Site&) = default;
};

using CompetitorFacility = Site;
using ClusterFacility = Site;

struct Instance {
  std::vector<DemandPoint> demand;
  std::vector<CompetitorFacility> competitors;
  std::vector<ClusterFacility> clusters;
  // Existing facilities of the same chain. They join the chain and are never
  // moved by the optimizer.
  std::vector<Site> fixed_chain;

  double total_buying_power() const {
    double total = 0.0;
    for (const auto& d : demand) total += d.buying_power;
    return total;
  }

  friend bool operator==(const Instance&, const Instance&) = default;
};

namespace detail {

inline bool finite_point(const Point& p) { return std::isfinite(p.x) && std::isfinite(p.y); }

inline void validate_sites(const std::vector<Site>& sites, const char* what) {
  for (std::size_t k = 0; k < sites.size(); ++k) {
    const Site& s = sites[k];
    if (!finite_point(s.location)) {
      throw ValidationError(std::string(what) + " " + std::to_string(k) + ": non-finite coordinate");
    }
    if (!(s.attractiveness > 0.0) || !std::isfinite(s.attractiveness)) {
      throw ValidationError(std::string(what) + " " + std::to_string(k) +
                            ": attractiveness must be positive and finite");
    }
  }
}

}  // namespace detail

// Throws ValidationError when an instance invariant is violated.
inline void validate_instance(const Instance& instance) {
  if (instance.demand.empty()) throw ValidationError("instance has no demand points");
  for (std::size_t i = 0; i < instance.demand.size(); ++i) {
    const DemandPoint& d = instance.demand[i];
    if (!detail::finite_point(d.location)) {
      throw ValidationError("demand point " + std::to_string(i) + ": non-finite coordinate");
    }
    if (!(d.buying_power > 0.0) || !std::isfinite(d.buying_power)) {
      throw ValidationError("demand point " + std::to_string(i) +
                            ": buying power must be positive and finite");
    }
  }
  detail::validate_sites(instance.competitors, "competitor");
  detail::validate_sites(instance.clusters, "cluster");
  detail::validate_sites(instance.fixed_chain, "fixed chain facility");
  if (instance.competitors.empty() && instance.fixed_chain.empty()) {
    throw ValidationError("instance needs at least one competitor or fixed chain facility");
  }
  if (!(instance.total_buying_power() > 0.0)) {
    throw ValidationError("total buying power must be positive");
  }
}

// FNV-1a over the bit patterns of every number in the instance. Used to tie
// precomputed constants to the instance they were built from.
inline std::uint64_t fingerprint(const Instance& instance) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  auto mix_count = [&mix](std::size_t n) { mix(static_cast<double>(n)); };
  mix_count(instance.demand.size());
  for (const auto& d : instance.demand) {
    mix(d.location.x);
    mix(d.location.y);
    mix(d.buying_power);
  }
  for (const auto* group : {&instance.competitors, &instance.clusters, &instance.fixed_chain}) {
    mix_count(group->size());
    for (const auto& s : *group) {
      mix(s.location.x);
      mix(s.location.y);
      mix(s.attractiveness);
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Generation

struct Range {
  double lo;
  double hi;
};

// One stream per entity class for coordinates, plus dedicated streams for the
// weights.
struct GeneratorSeeds {
  LcgState demand{97'531};
  LcgState competitors{314'159};
  LcgState clusters{271'828};
  LcgState buying_power{123'457};
  LcgState competitor_attractiveness{654'323};
  LcgState cluster_attractiveness{777'773};
};

struct GeneratorConfig {
  std::size_t competitors = 10;
  std::size_t clusters = 10;
  Range coordinates{0.0, 10.0};
  Range buying_power{0.0, 2.0};
  Range competitor_attractiveness{0.5, 2.0};
  Range cluster_attractiveness{0.5, 2.0};
};

namespace detail {

inline std::vector<Point> draw_points(LcgState seed, std::size_t count, Range range) {
  LcgStream stream(seed);
  std::vector<Point> points;
  points.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double x = stream.uniform(range.lo, range.hi);
    const double y = stream.uniform(range.lo, range.hi);
    points.push_back({x, y});
  }
  return points;
}

inline std::vector<double> draw_values(LcgState seed, std::size_t count, Range range) {
  LcgStream stream(seed);
  std::vector<double> values(count);
  for (auto& v : values) v = stream.uniform(range.lo, range.hi);
  return values;
}

inline std::vector<Site> draw_sites(LcgState coord_seed, LcgState weight_seed, std::size_t count,
                                    Range coords, Range weights) {
  const auto points = draw_points(coord_seed, count, coords);
  const auto weights_drawn = draw_values(weight_seed, count, weights);
  std::vector<Site> sites(count);
  for (std::size_t k = 0; k < count; ++k) sites[k] = {points[k], weights_drawn[k]};
  return sites;
}

}  // namespace detail

// Deterministic instance with n demand points; fixed_chain is left empty.
inline Instance generate_instance(std::size_t n, const GeneratorSeeds& seeds = {},
                                  const GeneratorConfig& config = {}) {
  if (n == 0) throw InvalidArgument("generate_instance: n must be at least 1");
  if (config.competitors == 0) throw InvalidArgument("generate_instance: need at least one competitor");
  for (const Range& r : {config.coordinates, config.buying_power, config.competitor_attractiveness,
                         config.cluster_attractiveness}) {
    if (!(r.lo < r.hi)) throw InvalidArgument("generate_instance: empty range");
  }
  if (config.buying_power.lo < 0.0 || config.competitor_attractiveness.lo < 0.0 ||
      config.cluster_attractiveness.lo < 0.0) {
    throw InvalidArgument("generate_instance: weight ranges must be non-negative");
  }

  Instance instance;
  const auto points = detail::draw_points(seeds.demand, n, config.coordinates);
  const auto power = detail::draw_values(seeds.buying_power, n, config.buying_power);
  instance.demand.resize(n);
  for (std::size_t i = 0; i < n; ++i) instance.demand[i] = {points[i], power[i]};
  instance.competitors =
      detail::draw_sites(seeds.competitors, seeds.competitor_attractiveness, config.competitors,
                         config.coordinates, config.competitor_attractiveness);
  instance.clusters = detail::draw_sites(seeds.clusters, seeds.cluster_attractiveness,
                                         config.clusters, config.coordinates,
                                         config.cluster_attractiveness);
  return instance;
}

// ---------------------------------------------------------------------------
// File format
//
//   # comment
//   DEMAND
//   x,y,b
//   <x>,<y>,<b>
//   COMPETITORS
//   x,y,attractiveness
//   ...
//   CLUSTERS
//   ...
//   FIXED_CHAIN
//   ...
//
// Numbers are written in shortest round-trip form, so read(write(I)) == I.

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, result.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view text, const std::string& source, std::size_t line,
                           const std::string& field) {
  text = trim(text);
  if (text.empty()) throw ParseError(source, line, field, "empty value");
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw ParseError(source, line, field, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline void write_sites(std::ostream& out, const char* section, const std::vector<Site>& sites) {
  out << section << "\nx,y,attractiveness\n";
  for (const auto& s : sites) {
    out << format_double(s.location.x) << ',' << format_double(s.location.y) << ','
        << format_double(s.attractiveness) << '\n';
  }
}

}  // namespace detail

inline void write_instance(const Instance& instance, std::ostream& out) {
  out << "# chainloc instance\n";
  out << "DEMAND\nx,y,b\n";
  for (const auto& d : instance.demand) {
    out << detail::format_double(d.location.x) << ',' << detail::format_double(d.location.y) << ','
        << detail::format_double(d.buying_power) << '\n';
  }
  detail::write_sites(out, "COMPETITORS", instance.competitors);
  detail::write_sites(out, "CLUSTERS", instance.clusters);
  detail::write_sites(out, "FIXED_CHAIN", instance.fixed_chain);
}

inline void write_instance(const Instance& instance, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_instance(instance, out);
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

// Parses and validates. ParseError names the line and field; invariant
// violations raise ValidationError.
inline Instance read_instance(std::istream& in, const std::string& source = "<stream>") {
  enum class Section { None, Demand, Competitors, Clusters, FixedChain };
  Instance instance;
  Section section = Section::None;
  bool seen[5] = {};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;

    Section next = Section::None;
    if (line == "DEMAND") next = Section::Demand;
    else if (line == "COMPETITORS") next = Section::Competitors;
    else if (line == "CLUSTERS") next = Section::Clusters;
    else if (line == "FIXED_CHAIN") next = Section::FixedChain;
    if (next != Section::None) {
      if (seen[static_cast<int>(next)]) {
        throw ParseError(source, line_no, "section", "duplicate section '" + std::string(line) + "'");
      }
      seen[static_cast<int>(next)] = true;
      section = next;
      continue;
    }
    if (section == Section::None) {
      throw ParseError(source, line_no, "section", "record before any section header");
    }
    if (line.front() == 'x') continue;  // column header

    const auto fields = detail::split_csv(line);
    const bool is_demand = section == Section::Demand;
    const char* weight_name = is_demand ? "b" : "attractiveness";
    if (fields.size() != 3) {
      throw ParseError(source, line_no, "record",
                       "expected 3 fields, got " + std::to_string(fields.size()));
    }
    const double x = detail::parse_double(fields[0], source, line_no, "x");
    const double y = detail::parse_double(fields[1], source, line_no, "y");
    const double w = detail::parse_double(fields[2], source, line_no, weight_name);
    switch (section) {
      case Section::Demand: instance.demand.push_back({{x, y}, w}); break;
      case Section::Competitors: instance.competitors.push_back({{x, y}, w}); break;
      case Section::Clusters: instance.clusters.push_back({{x, y}, w}); break;
      case Section::FixedChain: instance.fixed_chain.push_back({{x, y}, w}); break;
      case Section::None: break;
    }
  }
  if (in.bad()) throw Error(source + ": read failure");
  validate_instance(instance);
  return instance;
}

inline Instance read_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_instance(in, path.string());
}

}  // namespace chainloc
