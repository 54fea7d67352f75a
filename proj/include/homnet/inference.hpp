#pragma once

// Ridge-stabilized maximum likelihood for the feature-feature logit, fitted by
// Newton-Raphson with step halving, with Wald standard errors from the
// inverse penalized information.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "homnet/design.hpp"
#include "homnet/error.hpp"

namespace homnet {

inline constexpr double kZ975 = 1.959963984540054;

// Two-sided normal p-value of estimate / se.
inline double wald(double estimate, double se) {
  if (!(se > 0.0)) throw ConfigError("standard error must be positive");
  return std::erfc(std::abs(estimate / se) / std::numbers::sqrt2);
}

namespace detail {

// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// sum_i [y_i eta_i - log(1 + e^eta_i)] - ridge/2 * |theta without intercept|^2
class PenalizedLogLik {
 public:
  PenalizedLogLik(const Design& design, double ridge) : d_(design), ridge_(ridge) {
    if (!(ridge >= 0.0)) throw ConfigError("ridge must be nonnegative");
  }

  double unpenalized(std::span<const double> theta) const {
    check(theta);
    // Neumaier compensated sum, in row order.
    double ll = 0.0, carry = 0.0;
    for (std::size_t i = 0; i < d_.rows(); ++i) {
      const double eta = d_.eta(i, theta);
      const double term = d_.y[i] * eta - detail::softplus(eta);
      const double t = ll + term;
      carry += std::abs(ll) >= std::abs(term) ? (ll - t) + term : (term - t) + ll;
      ll = t;
    }
    return ll + carry;
  }

  double penalty(std::span<const double> theta) const {
    double sq = 0.0;
    for (std::size_t j = 1; j < theta.size(); ++j) sq += theta[j] * theta[j];
    return 0.5 * ridge_ * sq;
  }

  double value(std::span<const double> theta) const { return unpenalized(theta) - penalty(theta); }

  std::vector<double> gradient(std::span<const double> theta) const {
    check(theta);
    std::vector<double> g(theta.size(), 0.0);
    for (std::size_t i = 0; i < d_.rows(); ++i) {
      const double r = d_.y[i] - detail::sigmoid(d_.eta(i, theta));
      for (std::size_t p = d_.row_start[i]; p < d_.row_start[i + 1]; ++p) g[d_.cols[p]] += d_.vals[p] * r;
    }
    for (std::size_t j = 1; j < theta.size(); ++j) g[j] -= ridge_ * theta[j];
    return g;
  }

  // Negative Hessian: X^T diag(mu (1 - mu)) X + ridge on all but the intercept.
  Eigen::MatrixXd information(std::span<const double> theta) const {
    check(theta);
    const auto p = static_cast<Eigen::Index>(theta.size());
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t i = 0; i < d_.rows(); ++i) {
      const double mu = detail::sigmoid(d_.eta(i, theta));
      const double w = mu * (1.0 - mu);
      for (std::size_t a = d_.row_start[i]; a < d_.row_start[i + 1]; ++a) {
        const double wa = w * d_.vals[a];
        for (std::size_t b = a; b < d_.row_start[i + 1]; ++b) info(d_.cols[a], d_.cols[b]) += wa * d_.vals[b];
      }
    }
    info.triangularView<Eigen::StrictlyLower>() = info.transpose();
    for (Eigen::Index j = 1; j < p; ++j) info(j, j) += ridge_;
    return info;
  }

  double ridge() const { return ridge_; }
  const Design& design() const { return d_; }

 private:
  void check(std::span<const double> theta) const {
    if (theta.size() != d_.columns()) {
      throw DimensionError("expected " + std::to_string(d_.columns()) + " coefficients, got " +
                           std::to_string(theta.size()));
    }
  }

  const Design& d_;
  double ridge_;
};

struct Coefficient {
  double estimate = 0.0;
  double se = std::numeric_limits<double>::quiet_NaN();
  double p = 1.0;
  double ci_low = std::numeric_limits<double>::quiet_NaN();
  double ci_high = std::numeric_limits<double>::quiet_NaN();
  bool active = false;
};

struct FitOptions {
  double ridge = 1e-6;
  std::size_t max_iter = 100;
  double step_tol = 1e-8;  // max |coefficient change| to stop
  double score_tol = 1e-6;  // per-example tolerance on the penalized score
};

struct FitResult {
  ModelLayout layout;
  std::vector<Coefficient> coef;  // in design-column order
  double loglik = 0.0;            // penalized, at the reported coefficients
  double loglik_unpenalized = 0.0;
  std::vector<double> loglik_trace;  // penalized, start point then every iteration
  std::size_t n_iter = 0;
  bool converged = false;
  double max_abs_score = 0.0;
  double ridge = 0.0;
  std::size_t n_examples = 0;

  Mode mode() const { return layout.mode; }
  const Coefficient& beta0() const { return coef.at(0); }
  const Coefficient& W(std::size_t h, std::size_t k) const { return coef.at(layout.w_column(h, k)); }
  const Coefficient& Q(std::size_t h, std::size_t t) const {
    if (layout.mode != Mode::kSdt) throw ConfigError("Q is only fitted in sdt mode");
    return coef.at(layout.q_column(h, t));
  }
  std::vector<double> theta() const {
    std::vector<double> t;
    t.reserve(coef.size());
    for (const auto& c : coef) t.push_back(c.estimate);
    return t;
  }
};

namespace detail {

inline Eigen::MatrixXd restrict(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) out(a, b) = m(idx[a], idx[b]);
  return out;
}

}  // namespace detail

// Newton-Raphson on the penalized loglik over the columns active in the data.
// Inactive columns are reported as 0 with p = 1. Non-convergence is reported
// through FitResult::converged, not thrown.
inline FitResult fit(const Design& design, const FitOptions& opt = {}) {
  if (design.rows() == 0) throw ConfigError("cannot fit an empty dataset");
  const PenalizedLogLik objective(design, opt.ridge);
  const std::size_t p = design.columns();
  const auto active = design.active_columns();
  std::vector<Eigen::Index> idx;
  for (std::size_t j = 0; j < p; ++j)
    if (active[j]) idx.push_back(static_cast<Eigen::Index>(j));
  const auto na = static_cast<Eigen::Index>(idx.size());

  std::vector<double> theta(p, 0.0);

  // Rank check at the start point; a tiny ridge repairs never-activated or
  // collinear directions, an absent one cannot.
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(detail::restrict(objective.information(theta), idx));
    qr.setThreshold(1e-13);
    if (qr.rank() < na) {
      std::vector<std::string> names;
      const auto perm = qr.colsPermutation().indices();
      for (Eigen::Index r = qr.rank(); r < na; ++r) {
        names.push_back(design.layout.column_name(static_cast<std::size_t>(idx[perm[r]])));
      }
      std::string list;
      for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
      throw IllConditionedError("information matrix is rank deficient; dependent columns: " + list,
                                std::move(names));
    }
  }

  FitResult res;
  res.layout = design.layout;
  res.ridge = opt.ridge;
  res.n_examples = design.rows();

  double current = objective.value(theta);
  res.loglik_trace.push_back(current);
  bool small_step = false;
  for (std::size_t iter = 0; iter < opt.max_iter && !small_step; ++iter) {
    const auto grad = objective.gradient(theta);
    Eigen::VectorXd g(na);
    for (Eigen::Index a = 0; a < na; ++a) g(a) = grad[static_cast<std::size_t>(idx[a])];
    const Eigen::MatrixXd info = detail::restrict(objective.information(theta), idx);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) {
      throw IllConditionedError("information matrix could not be factorized", {});
    }
    const Eigen::VectorXd step = ldlt.solve(g);

    // Halve the step until the objective does not decrease.
    double scale = 1.0;
    std::vector<double> trial(theta);
    double trial_value = current;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving, scale *= 0.5) {
      for (Eigen::Index a = 0; a < na; ++a) {
        const auto j = static_cast<std::size_t>(idx[a]);
        trial[j] = theta[j] + scale * step(a);
      }
      trial_value = objective.value(trial);
      if (trial_value >= current) {
        accepted = true;
        break;
      }
    }
    ++res.n_iter;
    const double max_change = accepted ? scale * step.cwiseAbs().maxCoeff() : 0.0;
    if (accepted) {
      theta = trial;
      current = trial_value;
    }
    res.loglik_trace.push_back(current);
    small_step = max_change < opt.step_tol;
  }

  const auto grad = objective.gradient(theta);
  for (double gj : grad) res.max_abs_score = std::max(res.max_abs_score, std::abs(gj));
  res.converged = small_step && res.max_abs_score < opt.score_tol * static_cast<double>(design.rows());

  const Eigen::MatrixXd info = detail::restrict(objective.information(theta), idx);
  const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(na, na));

  res.coef.assign(p, Coefficient{});
  for (Eigen::Index a = 0; a < na; ++a) {
    const auto j = static_cast<std::size_t>(idx[a]);
    auto& c = res.coef[j];
    c.active = true;
    c.estimate = theta[j];
    c.se = std::sqrt(cov(a, a));
    c.p = c.se > 0.0 ? wald(c.estimate, c.se) : 1.0;
    c.ci_low = c.estimate - kZ975 * c.se;
    c.ci_high = c.estimate + kZ975 * c.se;
  }
  res.loglik = current;
  res.loglik_unpenalized = objective.unpenalized(theta);
  return res;
}

inline FitResult fit(const LabeledDataset& ds, const FeatureTable& features, Mode mode,
                     const FitOptions& opt = {}, const TopicIndex& topics = TopicIndex(default_topics())) {
  if (ds.count(1) != ds.count(0)) throw ConfigError("dataset must be balanced");
  return fit(build_design(ds, features, mode, topics), opt);
}

namespace detail {

inline nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline nlohmann::json cell_json(const Coefficient& c) {
  return {{"estimate", c.estimate},
          {"se", number_or_null(c.se)},
          {"p", c.p},
          {"ci95", {number_or_null(c.ci_low), number_or_null(c.ci_high)}},
          {"active", c.active}};
}

inline Coefficient cell_from_json(const nlohmann::json& j) {
  Coefficient c;
  c.estimate = j.at("estimate").get<double>();
  c.se = number_or_nan(j.at("se"));
  c.p = j.at("p").get<double>();
  c.ci_low = number_or_nan(j.at("ci95").at(0));
  c.ci_high = number_or_nan(j.at("ci95").at(1));
  c.active = j.value("active", true);
  return c;
}

}  // namespace detail

inline nlohmann::json fit_to_json(const FitResult& r) {
  using nlohmann::json;
  const auto& L = r.layout;
  const std::size_t nf = L.num_features();
  json W = json::array();
  for (std::size_t h = 0; h < nf; ++h) {
    json row = json::array();
    for (std::size_t k = 0; k < nf; ++k) row.push_back(detail::cell_json(r.W(h, k)));
    W.push_back(row);
  }
  json Q = nullptr;
  if (L.mode == Mode::kSdt) {
    Q = json::array();
    for (std::size_t h = 0; h < nf; ++h) {
      json row = json::array();
      for (std::size_t t = 0; t < L.num_topics(); ++t) row.push_back(detail::cell_json(r.Q(h, t)));
      Q.push_back(row);
    }
  }
  return {{"mode", to_string(L.mode)},
          {"features", L.feature_names},
          {"topics", L.mode == Mode::kSdt ? json(L.topics.names()) : json::array()},
          {"beta0", detail::cell_json(r.beta0())},
          {"W", W},
          {"Q", Q},
          {"loglik", r.loglik},
          {"loglik_unpenalized", r.loglik_unpenalized},
          {"converged", r.converged},
          {"n_iter", r.n_iter},
          {"max_abs_score", r.max_abs_score},
          {"ridge", r.ridge},
          {"n_examples", r.n_examples},
          {"ci_kind", "wald"}};
}

inline FitResult fit_from_json(const nlohmann::json& j) {
  FitResult r;
  try {
    auto& L = r.layout;
    L.mode = parse_mode(j.at("mode").get<std::string>());
    L.feature_names = j.at("features").get<std::vector<std::string>>();
    if (L.mode == Mode::kSdt) L.topics = TopicIndex(j.at("topics").get<std::vector<std::string>>());
    r.coef.assign(L.num_coefficients(), Coefficient{});
    r.coef[0] = detail::cell_from_json(j.at("beta0"));
    const std::size_t nf = L.num_features();
    const auto& W = j.at("W");
    if (W.size() != nf) throw DimensionError("W has the wrong number of rows");
    for (std::size_t h = 0; h < nf; ++h) {
      if (W[h].size() != nf) throw DimensionError("W has the wrong number of columns");
      for (std::size_t k = 0; k < nf; ++k) r.coef[L.w_column(h, k)] = detail::cell_from_json(W[h][k]);
    }
    if (L.mode == Mode::kSdt) {
      const auto& Q = j.at("Q");
      if (Q.size() != nf) throw DimensionError("Q has the wrong number of rows");
      for (std::size_t h = 0; h < nf; ++h) {
        if (Q[h].size() != L.num_topics()) throw DimensionError("Q has the wrong number of columns");
        for (std::size_t t = 0; t < L.num_topics(); ++t) r.coef[L.q_column(h, t)] = detail::cell_from_json(Q[h][t]);
      }
    }
    r.loglik = j.at("loglik").get<double>();
    r.loglik_unpenalized = j.value("loglik_unpenalized", r.loglik);
    r.converged = j.at("converged").get<bool>();
    r.n_iter = j.value("n_iter", std::size_t{0});
    r.max_abs_score = j.value("max_abs_score", 0.0);
    r.ridge = j.at("ridge").get<double>();
    r.n_examples = j.at("n_examples").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed fit json: ") + e.what(), 0);
  }
  return r;
}

}  // namespace homnet
