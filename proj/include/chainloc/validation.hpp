#pragma once

// Independent checks on the model and the optimizer: a two-level grid search
// for single-facility problems, a conservation audit of capture fractions,
// and the expected share of randomly placed facilities.

#include <cmath>
#include <optional>
#include <vector>

#include "chainloc/errors.hpp"
#include "chainloc/geometry.hpp"
#include "chainloc/instance.hpp"
#include "chainloc/lcg.hpp"
#include "chainloc/market_model.hpp"
#include "chainloc/optimizer.hpp"

namespace chainloc {

struct OracleResult {
  Point point;
  double value = 0.0;  // M at `point`, buying-power units
};

namespace detail {

// Incumbent update: a strictly larger value wins; an equal value wins only
// from a lexicographically smaller point.
inline void consider(const OracleResult& candidate, OracleResult& best, bool& have_best) {
  const bool better =
      !have_best || candidate.value > best.value ||
      (candidate.value == best.value &&
       (candidate.point.x < best.point.x ||
        (candidate.point.x == best.point.x && candidate.point.y < best.point.y)));
  if (better) {
    best = candidate;
    have_best = true;
  }
}

// resolution x resolution nodes over [x0,x1] x [y0,y1].
inline void scan_grid(IncrementalEvaluator& eval, double attractiveness, double x0, double x1,
                      double y0, double y1, std::size_t resolution, OracleResult& best,
                      bool& have_best) {
  const double hx = (x1 - x0) / static_cast<double>(resolution - 1);
  const double hy = (y1 - y0) / static_cast<double>(resolution - 1);
  for (std::size_t a = 0; a < resolution; ++a) {
    const double x = a + 1 == resolution ? x1 : x0 + static_cast<double>(a) * hx;
    for (std::size_t b = 0; b < resolution; ++b) {
      const double y = b + 1 == resolution ? y1 : y0 + static_cast<double>(b) * hy;
      consider({{x, y}, eval.total_with_site(0, {{x, y}, attractiveness})}, best, have_best);
    }
  }
}

}  // namespace detail

// Best single new facility found by
//   1. a resolution^2 grid over the box,
//   2. a 10x finer grid spanning one coarse cell around the coarse winner,
//   3. every demand point and cluster inside the box (the objective has
//      cusps there, which a grid only approaches at its mesh width).
// Fixed chain facilities of the instance are included.
inline OracleResult grid_oracle_p1(const Instance& instance, const DecayModel& decay, TripMix mix,
                                   std::size_t resolution = 201,
                                   std::optional<Box> box = std::nullopt,
                                   double attractiveness = 1.0) {
  if (resolution < 101) throw InvalidArgument("grid_oracle_p1: resolution must be at least 101");
  const Box area = box ? *box : demand_box(instance);
  if (!area.valid()) throw InvalidArgument("grid_oracle_p1: degenerate box");

  const CompetitorConstants constants = competitor_constants(instance, decay);
  const MarketModel model(instance, decay, constants);
  IncrementalEvaluator eval(model, mix);
  const Point origin{area.x_min, area.y_min};
  eval.reset(make_layout(instance, std::span<const Point>(&origin, 1), attractiveness));

  OracleResult best;
  bool have_best = false;
  detail::scan_grid(eval, attractiveness, area.x_min, area.x_max, area.y_min, area.y_max,
                    resolution, best, have_best);

  const double hx = (area.x_max - area.x_min) / static_cast<double>(resolution - 1);
  const double hy = (area.y_max - area.y_min) / static_cast<double>(resolution - 1);
  const double fx0 = std::max(area.x_min, best.point.x - hx);
  const double fx1 = std::min(area.x_max, best.point.x + hx);
  const double fy0 = std::max(area.y_min, best.point.y - hy);
  const double fy1 = std::min(area.y_max, best.point.y + hy);
  // Fine step is a tenth of the coarse step; near an edge the window is one
  // cell wide on that side and the larger node count is used on both axes.
  const auto nodes = [](double lo, double hi, double coarse) {
    return static_cast<std::size_t>(std::lround((hi - lo) / coarse * 10.0)) + 1;
  };
  const std::size_t fine = std::max({nodes(fx0, fx1, hx), nodes(fy0, fy1, hy), std::size_t{2}});
  detail::scan_grid(eval, attractiveness, fx0, fx1, fy0, fy1, fine, best, have_best);

  auto probe = [&](const Point& p) {
    if (area.contains(p)) {
      detail::consider({p, eval.total_with_site(0, {p, attractiveness})}, best, have_best);
    }
  };
  for (const auto& d : instance.demand) probe(d.location);
  for (const auto& c : instance.clusters) probe(c.location);
  return best;
}

// Max over demand points and evaluated trip types of
// |chain fraction + competitor fraction - 1|, where the competitor fraction
// uses competitor masses recomputed facility by facility while the chain
// fraction uses `constants`. Faulty constants therefore show up as a residual.
inline double conservation_audit(const Instance& instance, const ChainLayout& layout,
                                 const DecayModel& decay, TripMix mix,
                                 const CompetitorConstants& constants) {
  const MarketModel model(instance, decay, constants);
  model.check_mix(mix);
  MarketModel::check_layout(layout);
  const std::size_t n = instance.demand.size();
  const bool multi = mix.pi() > 0.0;

  auto summed = [&](const std::vector<Site>& sites, std::vector<double>& w1,
                    std::vector<double>& w2) {
    w1.assign(n, 0.0);
    w2.assign(multi ? n : 0, 0.0);
    std::vector<double> s1(n), s2(multi ? n : 0);
    for (const Site& s : sites) {
      model.site_weights(s, s1, s2);
      for (std::size_t i = 0; i < n; ++i) w1[i] += s1[i];
      for (std::size_t i = 0; i < s2.size(); ++i) w2[i] += s2[i];
    }
  };

  std::vector<Site> chain = layout.variable;
  chain.insert(chain.end(), layout.fixed.begin(), layout.fixed.end());
  std::vector<double> chain1, chain2, comp1, comp2;
  summed(chain, chain1, chain2);
  summed(instance.competitors, comp1, comp2);

  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double denom1 = chain1[i] + constants.c1[i];
    worst = std::max(worst, std::abs(chain1[i] / denom1 + comp1[i] / denom1 - 1.0));
    if (multi) {
      const double denom2 = chain2[i] + constants.c2[i];
      worst = std::max(worst, std::abs(chain2[i] / denom2 + comp2[i] / denom2 - 1.0));
    }
  }
  return worst;
}

inline double conservation_audit(const Instance& instance, const ChainLayout& layout,
                                 const DecayModel& decay, TripMix mix) {
  return conservation_audit(instance, layout, decay, mix, competitor_constants(instance, decay));
}

// Mean share proportion of `trials` layouts of p facilities placed uniformly
// in the box (draw order as for optimizer starts).
inline double random_baseline(const Instance& instance, std::size_t p, const DecayModel& decay,
                              TripMix mix, std::size_t trials, LcgState seed,
                              std::optional<Box> box = std::nullopt,
                              double attractiveness = 1.0) {
  if (trials < 1) throw InvalidArgument("random_baseline: trials must be at least 1");
  if (p < 1) throw InvalidArgument("random_baseline: p must be at least 1");
  const Box area = box ? *box : demand_box(instance);
  const CompetitorConstants constants = competitor_constants(instance, decay);
  const MarketModel model(instance, decay, constants);
  const auto layouts = generate_starts(area, p, trials, seed);
  detail::CompensatedSum sum;
  for (const auto& points : layouts) {
    sum.add(model.evaluate(make_layout(instance, points, attractiveness), mix).proportion);
  }
  return sum.value() / static_cast<double>(trials);
}

}  // namespace chainloc
