#pragma once

// Gravity-model market share of a chain when a proportion pi of shopping
// trips also visit a cluster selling a different product.
//
// For demand point i with buying power b_i, a chain (or competitor) facility
// X with attractiveness A receives
//
//   single-purpose weight   power:  A / (alpha*b_i + d_i(X)^2)^(lambda/2)
//                           exp:    A * exp(-2*lambda*d_i(X))
//   multipurpose weight     power:  A * sum_m A'_m / (d(X,Y_m) + L_i(X) + L_i(Y_m))^lambda,
//                                   L_i(Z) = sqrt(alpha*b_i + d_i(Z)^2)
//                           exp:    A * sum_m A'_m * exp(-lambda*(d_i(X) + d(X,Y_m) + d_i(Y_m)))
//
// The chain captures b_i * W/(W + C) of each trip type, where W is the summed
// chain weight and C the competitor mass (CompetitorConstants). With lambda=2
// the power form is exactly the squared-distance model with the alpha*b_i
// correction, alpha = 24 / sum(b_i).

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chainloc/errors.hpp"
#include "chainloc/geometry.hpp"
#include "chainloc/instance.hpp"

namespace chainloc {

enum class DecayKind { Power, Exponential };

inline std::string_view to_string(DecayKind kind) {
  return kind == DecayKind::Power ? "power" : "exp";
}

inline DecayKind parse_decay_kind(std::string_view text) {
  if (text == "power") return DecayKind::Power;
  if (text == "exp" || text == "exponential") return DecayKind::Exponential;
  throw InvalidArgument("unknown decay kind '" + std::string(text) + "' (expected power or exp)");
}

struct DecayModel {
  static constexpr double kAlphaNumerator = 24.0;

  DecayKind kind = DecayKind::Exponential;
  double lambda = 1.0;
  double alpha = 0.0;  // power only

  // Binds alpha = 24 / total buying power of `instance`.
  static DecayModel power(const Instance& instance, double lambda = 2.0) {
    const double total = instance.total_buying_power();
    if (!(total > 0.0)) throw InvalidArgument("power decay needs positive total buying power");
    if (!(lambda > 0.0)) throw InvalidArgument("decay lambda must be positive");
    return {DecayKind::Power, lambda, kAlphaNumerator / total};
  }

  static DecayModel exponential(double lambda = 1.0) {
    if (!(lambda > 0.0)) throw InvalidArgument("decay lambda must be positive");
    return {DecayKind::Exponential, lambda, 0.0};
  }

  static DecayModel make(DecayKind kind, const Instance& instance, double lambda) {
    return kind == DecayKind::Power ? power(instance, lambda) : exponential(lambda);
  }

  friend bool operator==(const DecayModel&, const DecayModel&) = default;
};

// Throws unless `decay` is well formed and, for power decay, its alpha was
// derived from this instance.
inline void check_decay(const DecayModel& decay, const Instance& instance) {
  if (!(decay.lambda > 0.0) || !std::isfinite(decay.lambda)) {
    throw InvalidArgument("decay lambda must be positive");
  }
  if (decay.kind == DecayKind::Power) {
    const double total = instance.total_buying_power();
    if (!(total > 0.0)) throw InvalidArgument("power decay needs positive total buying power");
    const double expected = DecayModel::kAlphaNumerator / total;
    if (!(decay.alpha > 0.0) || std::abs(decay.alpha - expected) > 1e-12 * expected) {
      throw InvalidArgument("power decay alpha is not bound to this instance");
    }
  }
}

// Proportion pi of multipurpose trips.
class TripMix {
 public:
  explicit TripMix(double pi = 0.0) : pi_(pi) {
    if (!(pi >= 0.0 && pi <= 1.0)) {
      throw InvalidArgument("multipurpose proportion " + std::to_string(pi) + " outside [0, 1]");
    }
  }
  double pi() const noexcept { return pi_; }

 private:
  double pi_;
};

// The chain: p movable facilities plus the instance's fixed chain facilities.
struct ChainLayout {
  std::vector<Site> variable;
  std::vector<Site> fixed;

  std::size_t size() const noexcept { return variable.size() + fixed.size(); }

  friend bool operator==(const ChainLayout&, const ChainLayout&) = default;
};

inline ChainLayout make_layout(const Instance& instance, std::span<const Point> points,
                               double attractiveness = 1.0) {
  ChainLayout layout;
  layout.variable.reserve(points.size());
  for (const Point& p : points) layout.variable.push_back({p, attractiveness});
  layout.fixed = instance.fixed_chain;
  return layout;
}

struct CompetitorConstants {
  std::vector<double> c1;  // single-purpose competitor mass per demand point
  std::vector<double> c2;  // multipurpose mass; empty when the instance has no clusters
  DecayModel decay;
  std::uint64_t instance_fingerprint = 0;
};

struct DemandCapture {
  double single_fraction = 0.0;
  double multi_fraction = 0.0;
};

struct ShareReport {
  double total = 0.0;           // M(X), in buying-power units
  double proportion = 0.0;      // M(X) / sum(b_i)
  double total_buying_power = 0.0;
  double single_purpose = 0.0;  // M(X) at pi = 0
  double multipurpose = 0.0;    // M(X) at pi = 1 (0 when not evaluated)
  std::vector<DemandCapture> per_demand;
};

inline double share_proportion(const ShareReport& report) {
  return report.total / report.total_buying_power;
}

namespace detail {

// base^(lambda/2) for the squared-distance form.
inline double pow_half(double squared, double lambda) {
  return lambda == 2.0 ? squared : std::pow(squared, 0.5 * lambda);
}

inline double pow_lambda(double base, double lambda) {
  return lambda == 2.0 ? base * base : std::pow(base, lambda);
}

// Neumaier-compensated running sum. Order of add() calls fixes the result.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      carry_ += (sum_ - t) + v;
    } else {
      carry_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace detail

// Competitor masses straight from their defining double sums.
inline CompetitorConstants competitor_constants(const Instance& instance, const DecayModel& decay) {
  validate_instance(instance);
  check_decay(decay, instance);

  const std::size_t n = instance.demand.size();
  CompetitorConstants out;
  out.decay = decay;
  out.instance_fingerprint = fingerprint(instance);
  out.c1.assign(n, 0.0);
  if (!instance.clusters.empty()) out.c2.assign(n, 0.0);

  const double lambda = decay.lambda;
  for (std::size_t i = 0; i < n; ++i) {
    const DemandPoint& dp = instance.demand[i];
    const double ab = decay.alpha * dp.buying_power;
    double c1 = 0.0;
    double c2 = 0.0;
    for (const Site& k : instance.competitors) {
      const double dik = distance(dp.location, k.location);
      if (decay.kind == DecayKind::Power) {
        c1 += k.attractiveness / detail::pow_half(dik * dik + ab, lambda);
        for (const Site& m : instance.clusters) {
          const double dim = distance(dp.location, m.location);
          const double tour = std::sqrt(dik * dik + ab) + distance(k.location, m.location) +
                              std::sqrt(ab + dim * dim);
          c2 += k.attractiveness * m.attractiveness / detail::pow_lambda(tour, lambda);
        }
      } else {
        c1 += k.attractiveness * std::exp(-2.0 * lambda * dik);
        for (const Site& m : instance.clusters) {
          const double dim = distance(dp.location, m.location);
          c2 += k.attractiveness * m.attractiveness *
                std::exp(-lambda * (dik + distance(k.location, m.location) + dim));
        }
      }
    }
    out.c1[i] = c1;
    if (!out.c2.empty()) out.c2[i] = c2;
  }
  return out;
}

// Evaluation context bound to one (instance, decay, constants) triple.
// Holds references: the three arguments must outlive the model.
class MarketModel {
 public:
  MarketModel(const Instance& instance, const DecayModel& decay,
              const CompetitorConstants& constants)
      : instance_(instance), decay_(decay), constants_(constants) {
    check_decay(decay, instance);
    const std::size_t n = instance.demand.size();
    if (constants.decay != decay) {
      throw InvalidArgument("competitor constants were computed for a different decay model");
    }
    if (constants.c1.size() != n || constants.instance_fingerprint != fingerprint(instance)) {
      throw InvalidArgument("competitor constants were computed for a different instance");
    }
    if (!instance.clusters.empty() && constants.c2.size() != n) {
      throw InvalidArgument("competitor constants lack multipurpose masses");
    }

    const std::size_t clusters = instance.clusters.size();
    alpha_b_.resize(n);
    cluster_leg_.resize(n * clusters);
    cluster_attractiveness_.resize(clusters);
    for (std::size_t m = 0; m < clusters; ++m) {
      cluster_attractiveness_[m] = instance.clusters[m].attractiveness;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const DemandPoint& dp = instance.demand[i];
      alpha_b_[i] = decay.alpha * dp.buying_power;
      for (std::size_t m = 0; m < clusters; ++m) {
        const double d2 = squared_distance(dp.location, instance.clusters[m].location);
        cluster_leg_[i * clusters + m] = decay.kind == DecayKind::Power
                                             ? std::sqrt(alpha_b_[i] + d2)
                                             : std::exp(-decay.lambda * std::sqrt(d2));
      }
    }
  }

  const Instance& instance() const noexcept { return instance_; }
  const DecayModel& decay() const noexcept { return decay_; }
  const CompetitorConstants& constants() const noexcept { return constants_; }
  std::size_t demand_count() const noexcept { return instance_.demand.size(); }

  void check_mix(TripMix mix) const {
    if (mix.pi() > 0.0 && instance_.clusters.empty()) {
      throw InvalidArgument("multipurpose trips (pi > 0) need at least one cluster");
    }
  }

  // Writes the site's per-demand weights. `multi` may be empty to skip the
  // multipurpose term.
  void site_weights(const Site& site, std::span<double> single, std::span<double> multi) const {
    const std::size_t n = demand_count();
    const std::size_t clusters = instance_.clusters.size();
    const bool want_multi = !multi.empty();
    const double lambda = decay_.lambda;
    const double a = site.attractiveness;

    // Site-to-cluster legs depend only on the site.
    cluster_scratch_.resize(clusters);
    if (want_multi) {
      for (std::size_t m = 0; m < clusters; ++m) {
        const Site& c = instance_.clusters[m];
        const double d = distance(site.location, c.location);
        cluster_scratch_[m] = decay_.kind == DecayKind::Power
                                  ? d
                                  : c.attractiveness * std::exp(-lambda * d);
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      const double d2 = squared_distance(instance_.demand[i].location, site.location);
      const double* legs = cluster_leg_.data() + i * clusters;
      if (decay_.kind == DecayKind::Power) {
        const double ab = alpha_b_[i];
        single[i] = a / detail::pow_half(ab + d2, lambda);
        if (want_multi) {
          const double leg = std::sqrt(ab + d2);
          double sum = 0.0;
          for (std::size_t m = 0; m < clusters; ++m) {
            const double tour = cluster_scratch_[m] + leg + legs[m];
            sum += cluster_attractiveness_[m] / detail::pow_lambda(tour, lambda);
          }
          multi[i] = a * sum;
        }
      } else {
        const double e = std::exp(-lambda * std::sqrt(d2));
        single[i] = a * e * e;
        if (want_multi) {
          double sum = 0.0;
          for (std::size_t m = 0; m < clusters; ++m) sum += cluster_scratch_[m] * legs[m];
          multi[i] = a * e * sum;
        }
      }
    }
  }

  struct Totals {
    double single = 0.0;
    double multi = 0.0;
    double total = 0.0;
  };

  // Reduces summed chain weights to captured buying power. Per-demand terms
  // are added in index order with compensated summation.
  Totals reduce(std::span<const double> w_single, std::span<const double> w_multi,
                TripMix mix) const {
    const std::size_t n = demand_count();
    const double pi = mix.pi();
    detail::CompensatedSum s1;
    detail::CompensatedSum s2;
    const bool want_single = pi < 1.0;
    const bool want_multi = pi > 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double b = instance_.demand[i].buying_power;
      if (want_single) s1.add(b * (w_single[i] / (w_single[i] + constants_.c1[i])));
      if (want_multi) s2.add(b * (w_multi[i] / (w_multi[i] + constants_.c2[i])));
    }
    Totals t;
    t.single = s1.value();
    t.multi = s2.value();
    t.total = combine(t.single, t.multi, mix);
    return t;
  }

  static double combine(double single, double multi, TripMix mix) {
    const double pi = mix.pi();
    if (pi == 0.0) return single;
    if (pi == 1.0) return multi;
    return (1.0 - pi) * single + pi * multi;
  }

  ShareReport evaluate(const ChainLayout& layout, TripMix mix, bool per_demand = false) const {
    check_mix(mix);
    check_layout(layout);
    const std::size_t n = demand_count();
    const bool want_multi = mix.pi() > 0.0 || (per_demand && !instance_.clusters.empty());

    std::vector<double> w1(n, 0.0);
    std::vector<double> w2(want_multi ? n : 0, 0.0);
    std::vector<double> s1(n);
    std::vector<double> s2(want_multi ? n : 0);
    auto accumulate = [&](const Site& site) {
      site_weights(site, s1, s2);
      for (std::size_t i = 0; i < n; ++i) w1[i] += s1[i];
      for (std::size_t i = 0; i < s2.size(); ++i) w2[i] += s2[i];
    };
    for (const Site& s : layout.variable) accumulate(s);
    for (const Site& s : layout.fixed) accumulate(s);

    ShareReport report;
    const Totals t = reduce(w1, w2, mix);
    report.total = t.total;
    report.single_purpose = t.single;
    report.multipurpose = t.multi;
    report.total_buying_power = instance_.total_buying_power();
    report.proportion = report.total / report.total_buying_power;
    if (per_demand) {
      report.per_demand.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        report.per_demand[i].single_fraction = w1[i] / (w1[i] + constants_.c1[i]);
        if (!w2.empty()) report.per_demand[i].multi_fraction = w2[i] / (w2[i] + constants_.c2[i]);
      }
    }
    return report;
  }

  static void check_layout(const ChainLayout& layout) {
    if (layout.size() == 0) throw InvalidArgument("chain layout is empty");
    for (const auto* group : {&layout.variable, &layout.fixed}) {
      for (const Site& s : *group) {
        if (!std::isfinite(s.location.x) || !std::isfinite(s.location.y)) {
          throw InvalidArgument("chain facility has a non-finite coordinate");
        }
        if (!(s.attractiveness > 0.0) || !std::isfinite(s.attractiveness)) {
          throw InvalidArgument("chain facility attractiveness must be positive");
        }
      }
    }
  }

 private:
  const Instance& instance_;
  DecayModel decay_;
  const CompetitorConstants& constants_;
  std::vector<double> alpha_b_;
  // n x clusters, row-major. Power: sqrt(alpha*b_i + d_i(Y_m)^2). Exp: exp(-lambda*d_i(Y_m)).
  std::vector<double> cluster_leg_;
  std::vector<double> cluster_attractiveness_;
  // Per-call scratch; a MarketModel is used by one thread at a time.
  mutable std::vector<double> cluster_scratch_;
};

inline ShareReport captured_market_share(const Instance& instance, const ChainLayout& layout,
                                         const DecayModel& decay, TripMix mix,
                                         const CompetitorConstants& constants,
                                         bool per_demand = false) {
  const MarketModel model(instance, decay, constants);
  return model.evaluate(layout, mix, per_demand);
}

// Keeps per-facility weights of a layout so that the share after moving a
// single facility costs O(n * clusters) instead of a full re-evaluation.
class IncrementalEvaluator {
 public:
  IncrementalEvaluator(const MarketModel& model, TripMix mix)
      : model_(model),
        mix_(mix),
        n_(model.demand_count()),
        want_multi_(mix.pi() > 0.0) {
    model.check_mix(mix);
  }

  void reset(const ChainLayout& layout) {
    MarketModel::check_layout(layout);
    const std::size_t p = layout.variable.size();
    sites_ = layout.variable;
    site_single_.assign(p * n_, 0.0);
    site_multi_.assign(want_multi_ ? p * n_ : 0, 0.0);
    w_single_.assign(n_, 0.0);
    w_multi_.assign(want_multi_ ? n_ : 0, 0.0);
    scratch_single_.resize(n_);
    scratch_multi_.resize(want_multi_ ? n_ : 0);
    for (std::size_t j = 0; j < p; ++j) {
      std::span<double> s1(site_single_.data() + j * n_, n_);
      std::span<double> s2 = want_multi_ ? std::span<double>(site_multi_.data() + j * n_, n_)
                                         : std::span<double>();
      model_.site_weights(layout.variable[j], s1, s2);
      for (std::size_t i = 0; i < n_; ++i) w_single_[i] += s1[i];
      for (std::size_t i = 0; i < s2.size(); ++i) w_multi_[i] += s2[i];
    }
    for (const Site& f : layout.fixed) {
      model_.site_weights(f, scratch_single_, scratch_multi_);
      for (std::size_t i = 0; i < n_; ++i) w_single_[i] += scratch_single_[i];
      for (std::size_t i = 0; i < scratch_multi_.size(); ++i) w_multi_[i] += scratch_multi_[i];
    }
    current_ = model_.reduce(w_single_, w_multi_, mix_).total;
  }

  double total() const noexcept { return current_; }
  std::size_t variable_count() const noexcept { return sites_.size(); }

  // Share with variable facility j replaced by `site`; the stored layout is unchanged.
  double total_with_site(std::size_t j, const Site& site) {
    model_.site_weights(site, scratch_single_, scratch_multi_);
    trial_single_.resize(n_);
    trial_multi_.resize(want_multi_ ? n_ : 0);
    const double* old1 = site_single_.data() + j * n_;
    for (std::size_t i = 0; i < n_; ++i) {
      trial_single_[i] = (w_single_[i] - old1[i]) + scratch_single_[i];
    }
    if (want_multi_) {
      const double* old2 = site_multi_.data() + j * n_;
      for (std::size_t i = 0; i < n_; ++i) {
        trial_multi_[i] = (w_multi_[i] - old2[i]) + scratch_multi_[i];
      }
    }
    return model_.reduce(trial_single_, trial_multi_, mix_).total;
  }

 private:
  const MarketModel& model_;
  TripMix mix_;
  std::size_t n_;
  bool want_multi_;
  std::vector<Site> sites_;
  std::vector<double> site_single_, site_multi_;
  std::vector<double> w_single_, w_multi_;
  std::vector<double> scratch_single_, scratch_multi_;
  std::vector<double> trial_single_, trial_multi_;
  double current_ = 0.0;
};

}  // namespace chainloc
