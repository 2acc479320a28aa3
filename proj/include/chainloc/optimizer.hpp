#pragma once

// Multi-start local maximization of the chain's captured market share over the
// 2p coordinates of the movable facilities.
//
// Each start runs a projected quasi-Newton ascent (BFGS inverse-Hessian
// update, backtracking line search, projection onto the search box) driven by
// a central finite-difference gradient. The best start wins; exact ties go to
// the smallest start index, so the result does not depend on thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "chainloc/errors.hpp"
#include "chainloc/geometry.hpp"
#include "chainloc/instance.hpp"
#include "chainloc/lcg.hpp"
#include "chainloc/market_model.hpp"

namespace chainloc {

struct OptimizerConfig {
  std::size_t starts = 100;
  // Unset: the demand bounding box grown by 5% of its extent on every side.
  std::optional<Box> box;
  // Finite-difference step as a fraction of the box diagonal.
  double gradient_step = 1e-6;
  double tol_grad = 1e-6;
  double tol_obj = 1e-9;
  int max_iters = 2000;
  LcgState seed{424'243};
  double facility_attractiveness = 1.0;
  unsigned threads = 1;
  bool record_history = false;
};

struct Solution {
  ChainLayout layout;
  double value = 0.0;
  std::size_t start_index = 0;
  int iterations = 0;
  bool converged = false;
  // Objective after each accepted step, starting with the start value.
  // Filled only when OptimizerConfig::record_history is set.
  std::vector<double> history;
};

inline Box demand_box(const Instance& instance, double margin = 0.05) {
  if (instance.demand.empty()) throw InvalidArgument("demand_box: no demand points");
  Box box{instance.demand.front().location.x, instance.demand.front().location.x,
          instance.demand.front().location.y, instance.demand.front().location.y};
  for (const auto& d : instance.demand) {
    box.x_min = std::min(box.x_min, d.location.x);
    box.x_max = std::max(box.x_max, d.location.x);
    box.y_min = std::min(box.y_min, d.location.y);
    box.y_max = std::max(box.y_max, d.location.y);
  }
  const double wx = box.x_max - box.x_min;
  const double wy = box.y_max - box.y_min;
  const double px = margin * (wx > 0.0 ? wx : 1.0);
  const double py = margin * (wy > 0.0 ? wy : 1.0);
  return {box.x_min - px, box.x_max + px, box.y_min - py, box.y_max + py};
}

inline Box resolve_box(const Instance& instance, const OptimizerConfig& config) {
  const Box box = config.box ? *config.box : demand_box(instance);
  if (!box.valid()) throw InvalidArgument("search box is degenerate");
  return box;
}

inline void check_config(const OptimizerConfig& config) {
  if (config.starts < 1) throw InvalidArgument("optimizer needs at least one start");
  if (!(config.gradient_step > 0.0) || !(config.tol_grad > 0.0) || !(config.tol_obj > 0.0)) {
    throw InvalidArgument("optimizer tolerances must be positive");
  }
  if (config.max_iters < 0) throw InvalidArgument("max_iters must be non-negative");
  if (!(config.facility_attractiveness > 0.0)) {
    throw InvalidArgument("new facility attractiveness must be positive");
  }
  if (config.box && !config.box->valid()) throw InvalidArgument("search box is degenerate");
}

// Captured market share M(X) in buying-power units.
inline double objective(const Instance& instance, const ChainLayout& layout,
                        const DecayModel& decay, TripMix mix,
                        const CompetitorConstants& constants) {
  return captured_market_share(instance, layout, decay, mix, constants).total;
}

struct GradientResult {
  // d M / d(x_1, y_1, ..., x_p, y_p)
  std::vector<double> values;
  // Set when some coordinate sat within one step of the box edge and a
  // one-sided difference was used.
  bool one_sided = false;
};

namespace detail {

inline std::vector<double> flatten(const ChainLayout& layout) {
  std::vector<double> v;
  v.reserve(2 * layout.variable.size());
  for (const Site& s : layout.variable) {
    v.push_back(s.location.x);
    v.push_back(s.location.y);
  }
  return v;
}

inline void unflatten(std::span<const double> coords, ChainLayout& layout) {
  for (std::size_t j = 0; j < layout.variable.size(); ++j) {
    layout.variable[j].location = {coords[2 * j], coords[2 * j + 1]};
  }
}

// Expects `eval` to be reset to `layout`.
inline GradientResult fd_gradient(IncrementalEvaluator& eval, const ChainLayout& layout,
                                  double step, const Box* box) {
  GradientResult out;
  out.values.assign(2 * layout.variable.size(), 0.0);
  const double f0 = eval.total();
  for (std::size_t j = 0; j < layout.variable.size(); ++j) {
    for (int axis = 0; axis < 2; ++axis) {
      Site moved = layout.variable[j];
      double& coord = axis == 0 ? moved.location.x : moved.location.y;
      const double c = coord;
      const double lo = box ? (axis == 0 ? box->x_min : box->y_min) : -HUGE_VAL;
      const double hi = box ? (axis == 0 ? box->x_max : box->y_max) : HUGE_VAL;
      double g = 0.0;
      if (c - step < lo) {
        coord = c + step;
        g = (eval.total_with_site(j, moved) - f0) / step;
        out.one_sided = true;
      } else if (c + step > hi) {
        coord = c - step;
        g = (f0 - eval.total_with_site(j, moved)) / step;
        out.one_sided = true;
      } else {
        coord = c + step;
        const double fp = eval.total_with_site(j, moved);
        coord = c - step;
        const double fm = eval.total_with_site(j, moved);
        g = (fp - fm) / (2.0 * step);
      }
      out.values[2 * j + axis] = g;
    }
  }
  return out;
}

inline double clamp_axis(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

inline void project(std::vector<double>& x, const Box& box) {
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] = (k % 2 == 0) ? clamp_axis(x[k], box.x_min, box.x_max)
                        : clamp_axis(x[k], box.y_min, box.y_max);
  }
}

// Coordinate k is blocked when it sits on a bound and the gradient pushes outward.
inline bool blocked(std::size_t k, double x, double g, const Box& box) {
  const double lo = (k % 2 == 0) ? box.x_min : box.y_min;
  const double hi = (k % 2 == 0) ? box.x_max : box.y_max;
  return (x <= lo && g < 0.0) || (x >= hi && g > 0.0);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline Solution local_optimize_bound(const MarketModel& model, TripMix mix,
                                     const ChainLayout& start, const OptimizerConfig& config,
                                     const Box& box) {
  IncrementalEvaluator eval(model, mix);
  ChainLayout layout = start;
  std::vector<double> x = flatten(layout);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double lo = (k % 2 == 0) ? box.x_min : box.y_min;
    const double hi = (k % 2 == 0) ? box.x_max : box.y_max;
    if (x[k] < lo || x[k] > hi) throw InvalidArgument("start layout lies outside the search box");
  }
  eval.reset(layout);
  double f = eval.total();
  if (!std::isfinite(f)) throw Error("objective is not finite at the start layout");

  const std::size_t dim = x.size();
  const double step = config.gradient_step * box.diagonal();
  const double max_move = 0.25 * box.diagonal();

  Solution sol;
  if (config.record_history) sol.history.push_back(f);

  std::vector<double> g = fd_gradient(eval, layout, step, &box).values;
  std::vector<double> H(dim * dim, 0.0);
  auto reset_h = [&] {
    std::fill(H.begin(), H.end(), 0.0);
    for (std::size_t k = 0; k < dim; ++k) H[k * dim + k] = 1.0;
  };
  reset_h();
  bool h_identity = true;
  bool first_update = true;

  std::vector<double> d(dim), x_trial(dim), s(dim), y(dim), hy(dim);
  std::vector<char> free_var(dim);
  int iter = 0;
  bool converged = false;
  for (; iter < config.max_iters; ++iter) {
    double pg_norm2 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      free_var[k] = !blocked(k, x[k], g[k], box);
      if (free_var[k]) pg_norm2 += g[k] * g[k];
    }
    if (std::sqrt(pg_norm2) < config.tol_grad) {
      converged = true;
      break;
    }

    bool accepted = false;
    double f_trial = f;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      for (std::size_t r = 0; r < dim; ++r) {
        double v = 0.0;
        if (free_var[r]) {
          for (std::size_t c = 0; c < dim; ++c) {
            if (free_var[c]) v += H[r * dim + c] * g[c];
          }
        }
        d[r] = v;
      }
      if (dot(d, g) <= 0.0) {
        reset_h();
        h_identity = true;
        for (std::size_t k = 0; k < dim; ++k) d[k] = free_var[k] ? g[k] : 0.0;
      }
      double d_inf = 0.0;
      for (double v : d) d_inf = std::max(d_inf, std::abs(v));
      double t = d_inf > max_move ? max_move / d_inf : 1.0;
      for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
        for (std::size_t k = 0; k < dim; ++k) x_trial[k] = x[k] + t * d[k];
        project(x_trial, box);
        double gain = 0.0;
        for (std::size_t k = 0; k < dim; ++k) gain += g[k] * (x_trial[k] - x[k]);
        if (gain <= 0.0) continue;
        unflatten(x_trial, layout);
        eval.reset(layout);
        f_trial = eval.total();
        if (f_trial > f && f_trial >= f + 1e-4 * gain) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        if (h_identity) break;
        reset_h();
        h_identity = true;
        first_update = true;
      }
    }
    if (!accepted) {
      // No representable ascent along the (projected) gradient: stationary to
      // working precision.
      unflatten(x, layout);
      eval.reset(layout);
      converged = true;
      break;
    }

    const std::vector<double> g_new = fd_gradient(eval, layout, step, &box).values;
    for (std::size_t k = 0; k < dim; ++k) {
      s[k] = x_trial[k] - x[k];
      y[k] = g[k] - g_new[k];  // gradient change of -M
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
      if (first_update) {
        const double scale = sy / dot(y, y);
        for (double& h : H) h *= scale;
        first_update = false;
      }
      for (std::size_t r = 0; r < dim; ++r) {
        double v = 0.0;
        for (std::size_t c = 0; c < dim; ++c) v += H[r * dim + c] * y[c];
        hy[r] = v;
      }
      const double yhy = dot(y, hy);
      const double rho = 1.0 / sy;
      for (std::size_t r = 0; r < dim; ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
          H[r * dim + c] += -rho * (hy[r] * s[c] + s[r] * hy[c]) + (rho * rho * yhy + rho) * s[r] * s[c];
        }
      }
      h_identity = false;
    }

    const double improvement = (f_trial - f) / std::max(std::abs(f), 1e-300);
    x = x_trial;
    f = f_trial;
    g = g_new;
    if (config.record_history) sol.history.push_back(f);
    if (improvement < config.tol_obj) {
      ++iter;
      converged = true;
      break;
    }
  }

  unflatten(x, layout);
  sol.layout = std::move(layout);
  sol.value = model.evaluate(sol.layout, mix).total;
  if (std::abs(sol.value - f) > 1e-9 * std::max(std::abs(f), 1e-300)) {
    throw Error("internal: tracked objective disagrees with re-evaluation");
  }
  sol.iterations = iter;
  sol.converged = converged;
  return sol;
}

}  // namespace detail

// Central differences, one-sided within one step of the box edge (flagged).
inline GradientResult gradient_fd(const Instance& instance, const ChainLayout& layout,
                                  const DecayModel& decay, TripMix mix,
                                  const CompetitorConstants& constants, double step,
                                  const std::optional<Box>& box = std::nullopt) {
  if (!(step > 0.0)) throw InvalidArgument("gradient_fd: step must be positive");
  const MarketModel model(instance, decay, constants);
  IncrementalEvaluator eval(model, mix);
  eval.reset(layout);
  return detail::fd_gradient(eval, layout, step, box ? &*box : nullptr);
}

inline Solution local_optimize(const Instance& instance, const ChainLayout& start,
                               const DecayModel& decay, TripMix mix,
                               const CompetitorConstants& constants,
                               const OptimizerConfig& config = {}) {
  check_config(config);
  const MarketModel model(instance, decay, constants);
  model.check_mix(mix);
  return detail::local_optimize_bound(model, mix, start, config, resolve_box(instance, config));
}

// Start layouts drawn from one LCG stream: 2p draws per start, ordered
// x_1, y_1, ..., x_p, y_p, uniform in the box.
inline std::vector<std::vector<Point>> generate_starts(const Box& box, std::size_t p,
                                                       std::size_t count, LcgState seed) {
  LcgStream stream(seed);
  std::vector<std::vector<Point>> starts(count, std::vector<Point>(p));
  for (auto& start : starts) {
    for (auto& pt : start) {
      pt.x = stream.uniform(box.x_min, box.x_max);
      pt.y = stream.uniform(box.y_min, box.y_max);
    }
  }
  return starts;
}

struct MultistartResult {
  Solution best;
  std::vector<double> start_values;    // objective at each start layout
  std::vector<double> final_values;    // NaN for failed starts
  std::size_t failed = 0;
};

inline MultistartResult multistart_run(const Instance& instance, std::size_t p,
                                       const DecayModel& decay, TripMix mix,
                                       const OptimizerConfig& config = {}) {
  if (p < 1) throw InvalidArgument("multistart_optimize: p must be at least 1");
  check_config(config);
  const CompetitorConstants constants = competitor_constants(instance, decay);
  const Box box = resolve_box(instance, config);
  const auto starts = generate_starts(box, p, config.starts, config.seed);

  std::vector<std::optional<Solution>> results(starts.size());
  std::vector<double> start_values(starts.size(), std::numeric_limits<double>::quiet_NaN());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    // Each worker owns its model (the model keeps per-call scratch).
    const MarketModel model(instance, decay, constants);
    model.check_mix(mix);
    for (std::size_t k = next.fetch_add(1); k < starts.size(); k = next.fetch_add(1)) {
      const ChainLayout layout = make_layout(instance, starts[k], config.facility_attractiveness);
      try {
        start_values[k] = model.evaluate(layout, mix).total;
        Solution sol = detail::local_optimize_bound(model, mix, layout, config, box);
        sol.start_index = k;
        results[k] = std::move(sol);
      } catch (const InvalidArgument&) {
        throw;
      } catch (const Error&) {
        // recorded as a failed start
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(starts.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          worker();
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

  MultistartResult out;
  out.start_values = std::move(start_values);
  out.final_values.assign(results.size(), std::numeric_limits<double>::quiet_NaN());
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < results.size(); ++k) {
    if (!results[k]) {
      ++out.failed;
      continue;
    }
    out.final_values[k] = results[k]->value;
    if (!best || results[k]->value > results[*best]->value) best = k;
  }
  if (!best) throw Error("multistart_optimize: every start failed");
  out.best = std::move(*results[*best]);
  return out;
}

inline Solution multistart_optimize(const Instance& instance, std::size_t p,
                                    const DecayModel& decay, TripMix mix,
                                    const OptimizerConfig& config = {}) {
  return multistart_run(instance, p, decay, mix, config).best;
}

}  // namespace chainloc
