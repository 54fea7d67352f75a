#pragma once

// Forward simulation of the feature-feature logit with planted coefficients,
// and a direct (non-optimizing) evaluation of its penalized likelihood. The
// likelihood code here deliberately shares nothing with design.hpp or
// inference.hpp so that it can serve as an oracle for them.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "homnet/error.hpp"
#include "homnet/features.hpp"
#include "homnet/inference.hpp"
#include "homnet/null_sampler.hpp"
#include "homnet/rng.hpp"
#include "homnet/topics.hpp"

namespace homnet {

using Matrix = std::vector<std::vector<double>>;

inline Matrix zero_matrix(std::size_t rows, std::size_t cols) {
  return Matrix(rows, std::vector<double>(cols, 0.0));
}

// beta0, W (|F| x |F|) and, in sdt mode, Q (|F| x |T|).
struct CoefficientSet {
  double beta0 = 0.0;
  Matrix W;
  Matrix Q;  // empty in sd mode
};

struct ProclivityLaw {
  enum class Kind { kLogNormal, kConstant } kind = Kind::kLogNormal;
  double mu = 0.0;
  double sigma = 1.0;
};

struct PlantedConfig {
  std::size_t n_users = 5000;
  std::size_t n_candidates = 40000;
  std::vector<std::string> feature_names = default_feature_names();
  std::vector<std::string> axis_names{homnet::axis_names().begin(), homnet::axis_names().end()};
  std::vector<double> feature_prevalence = std::vector<double>(kNumFeatures, 0.25);
  Mode mode = Mode::kSd;
  std::vector<TopicId> topics = default_topics();
  std::vector<double> topic_dist;  // empty: uniform over topics
  CoefficientSet truth{0.0, zero_matrix(kNumFeatures, kNumFeatures), {}};
  ProclivityLaw proclivity_law;
  std::uint64_t seed = 0;
};

// Throws GenerationError describing the first problem found.
inline void validate(const PlantedConfig& c) {
  const std::size_t nf = c.feature_names.size();
  if (nf == 0 || nf % 2 != 0 || c.axis_names.size() * 2 != nf) {
    throw GenerationError("features must come in one pole pair per axis");
  }
  if (c.n_users < 2) throw GenerationError("need at least two users");
  if (c.n_candidates == 0) throw GenerationError("need at least one candidate pair");
  if (c.feature_prevalence.size() != nf) throw GenerationError("one prevalence per feature expected");
  for (std::size_t a = 0; a < nf / 2; ++a) {
    const double lo = c.feature_prevalence[2 * a], hi = c.feature_prevalence[2 * a + 1];
    if (!(lo >= 0.0 && hi >= 0.0 && lo + hi <= 1.0)) {
      throw GenerationError("prevalences of axis '" + c.axis_names[a] + "' must be >= 0 and sum to <= 1");
    }
  }
  if (c.truth.W.size() != nf) throw GenerationError("W must be |F| x |F|");
  for (const auto& row : c.truth.W)
    if (row.size() != nf) throw GenerationError("W must be |F| x |F|");
  if (c.mode == Mode::kSdt) {
    if (c.topics.empty()) throw GenerationError("sdt mode needs topics");
    if (c.truth.Q.size() != nf) throw GenerationError("Q must be |F| x |T|");
    for (const auto& row : c.truth.Q)
      if (row.size() != c.topics.size()) throw GenerationError("Q must be |F| x |T|");
    if (!c.topic_dist.empty() && c.topic_dist.size() != c.topics.size()) {
      throw GenerationError("topic_dist must have one weight per topic");
    }
  }
  if (c.proclivity_law.kind == ProclivityLaw::Kind::kLogNormal && !(c.proclivity_law.sigma >= 0.0)) {
    throw GenerationError("log-normal sigma must be nonnegative");
  }
  if (c.proclivity_law.kind == ProclivityLaw::Kind::kConstant && !(c.proclivity_law.mu > 0.0)) {
    throw GenerationError("constant proclivity must be positive");
  }
}

struct Candidate {
  std::size_t u;
  std::size_t v;
  std::size_t topic;  // index into config topics; unused in sd mode
  double eta;
  std::uint8_t y;
};

struct CandidateSet {
  std::vector<UserId> users;
  std::vector<std::vector<std::uint8_t>> x;
  std::vector<Candidate> candidates;
};

inline std::string synth_user_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "u%06zu", i);
  return buf;
}

// Features, proclivities, candidate pairs and their Bernoulli labels.
inline CandidateSet generate_candidates(const PlantedConfig& c) {
  validate(c);
  const std::size_t nf = c.feature_names.size();
  CandidateSet out;

  Rng feature_rng(derive_seed(c.seed, 1));
  out.users.reserve(c.n_users);
  out.x.assign(c.n_users, std::vector<std::uint8_t>(nf, 0));
  for (std::size_t i = 0; i < c.n_users; ++i) {
    out.users.push_back(synth_user_name(i));
    for (std::size_t a = 0; a < nf / 2; ++a) {
      const double r = feature_rng.uniform();
      if (r < c.feature_prevalence[2 * a]) {
        out.x[i][2 * a] = 1;
      } else if (r < c.feature_prevalence[2 * a] + c.feature_prevalence[2 * a + 1]) {
        out.x[i][2 * a + 1] = 1;
      }
    }
  }

  Rng weight_rng(derive_seed(c.seed, 2));
  std::vector<double> out_w(c.n_users), in_w(c.n_users);
  for (std::size_t i = 0; i < c.n_users; ++i) {
    if (c.proclivity_law.kind == ProclivityLaw::Kind::kConstant) {
      out_w[i] = in_w[i] = c.proclivity_law.mu;
    } else {
      out_w[i] = weight_rng.lognormal(c.proclivity_law.mu, c.proclivity_law.sigma);
      in_w[i] = weight_rng.lognormal(c.proclivity_law.mu, c.proclivity_law.sigma);
    }
  }
  const CumulativeSampler source(out_w), target(in_w);
  std::vector<double> tw = c.topic_dist;
  if (tw.empty()) tw.assign(c.topics.size(), 1.0);
  const CumulativeSampler topic_sampler(tw);

  Rng pair_rng(derive_seed(c.seed, 3));
  out.candidates.reserve(c.n_candidates);
  for (std::size_t n = 0; n < c.n_candidates; ++n) {
    std::size_t u, v;
    do {
      u = source.draw(pair_rng);
      v = target.draw(pair_rng);
    } while (u == v);
    const std::size_t t = c.mode == Mode::kSdt ? topic_sampler.draw(pair_rng) : 0;
    double eta = c.truth.beta0;
    for (std::size_t h = 0; h < nf; ++h) {
      if (!out.x[u][h]) continue;
      for (std::size_t k = 0; k < nf; ++k)
        if (out.x[v][k]) eta += c.truth.W[h][k];
    }
    if (c.mode == Mode::kSdt) {
      for (std::size_t h = 0; h < nf; ++h) eta += (out.x[u][h] + out.x[v][h]) * c.truth.Q[h][t];
    }
    const double prob = 1.0 / (1.0 + std::exp(-eta));
    out.candidates.push_back({u, v, t, eta, static_cast<std::uint8_t>(pair_rng.bernoulli(prob))});
  }
  return out;
}

struct SynthOutput {
  FeatureTable features;
  LabeledDataset dataset;
  std::size_t candidate_positives = 0;
  std::size_t candidate_negatives = 0;
};

// Balanced dataset from the candidates: every positive, plus as many
// negatives drawn without replacement from the label-0 candidates.
inline SynthOutput generate(const PlantedConfig& c) {
  const auto cs = generate_candidates(c);
  const std::size_t nf = c.feature_names.size();

  std::vector<const Candidate*> pos, neg;
  for (const auto& cand : cs.candidates) (cand.y ? pos : neg).push_back(&cand);
  if (pos.empty()) throw GenerationError("no positive candidates were drawn");
  if (neg.size() < pos.size()) {
    throw GenerationError("only " + std::to_string(neg.size()) + " negative candidates for " +
                          std::to_string(pos.size()) + " positives");
  }

  Rng pick_rng(derive_seed(c.seed, 4));
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const auto j = i + static_cast<std::size_t>(pick_rng.below(neg.size() - i));
    std::swap(neg[i], neg[j]);
  }
  neg.resize(pos.size());

  SynthOutput out;
  out.candidate_positives = pos.size();
  out.candidate_negatives = cs.candidates.size() - pos.size();
  out.features.feature_names = c.feature_names;
  out.features.axis_names = c.axis_names;
  out.features.scored_population.assign(nf / 2, 0);
  for (std::size_t i = 0; i < cs.users.size(); ++i) {
    out.features.rows[cs.users[i]] = FeatureRow{std::vector<std::optional<double>>(nf / 2),
                                                std::vector<std::optional<double>>(nf / 2), cs.x[i]};
  }

  auto& ds = out.dataset;
  ds.seed = c.seed;
  ds.mode = c.mode;
  for (const auto* group : {&pos, &neg}) {
    for (const Candidate* cand : *group) {
      ds.examples.push_back({cs.users[cand->u], cs.users[cand->v],
                             c.mode == Mode::kSdt ? c.topics[cand->topic] : std::string(kNoTopic), cand->y});
    }
  }
  Rng shuffle_rng(derive_seed(c.seed, 5));
  shuffle_in_place(ds.examples, shuffle_rng);
  return out;
}

// Penalized Bernoulli loglik by direct summation over the examples:
// eta = beta0 + x_u' W x_v + x_u' Q tau + x_v' Q tau.
inline double brute_force_loglik(const CoefficientSet& params, const LabeledDataset& ds,
                                 const FeatureTable& features, double ridge,
                                 const std::vector<TopicId>& topics = default_topics()) {
  const std::size_t nf = features.num_features();
  if (params.W.size() != nf) throw DimensionError("W rows must equal the number of features");
  for (const auto& row : params.W)
    if (row.size() != nf) throw DimensionError("W columns must equal the number of features");
  const bool with_topics = !params.Q.empty();
  if (with_topics) {
    if (params.Q.size() != nf) throw DimensionError("Q rows must equal the number of features");
    for (const auto& row : params.Q)
      if (row.size() != topics.size()) throw DimensionError("Q columns must equal the number of topics");
  }

  auto log_sigmoid = [](double z) {  // log(1 / (1 + e^-z))
    return z < 0.0 ? z - std::log1p(std::exp(z)) : -std::log1p(std::exp(-z));
  };

  double total = 0.0;
  for (const auto& e : ds.examples) {
    const auto& xu = features.x(e.u);
    const auto& xv = features.x(e.v);
    if (xu.size() != nf || xv.size() != nf) throw DimensionError("feature row length mismatch");
    double eta = params.beta0;
    for (std::size_t h = 0; h < nf; ++h)
      for (std::size_t k = 0; k < nf; ++k) eta += xu[h] * params.W[h][k] * xv[k];
    if (with_topics && e.topic != kNoTopic) {
      std::size_t t = 0;
      while (t < topics.size() && topics[t] != e.topic) ++t;
      if (t == topics.size()) throw DimensionError("topic '" + e.topic + "' is not in the topic list");
      for (std::size_t h = 0; h < nf; ++h) eta += xu[h] * params.Q[h][t];
      for (std::size_t k = 0; k < nf; ++k) eta += xv[k] * params.Q[k][t];
    }
    total += e.y ? log_sigmoid(eta) : log_sigmoid(-eta);
  }

  double sq = 0.0;
  for (const auto& row : params.W)
    for (double w : row) sq += w * w;
  for (const auto& row : params.Q)
    for (double q : row) sq += q * q;
  return total - 0.5 * ridge * sq;
}

inline CoefficientSet coefficients_of(const FitResult& r) {
  const auto& L = r.layout;
  CoefficientSet s;
  s.beta0 = r.beta0().estimate;
  s.W = zero_matrix(L.num_features(), L.num_features());
  for (std::size_t h = 0; h < L.num_features(); ++h)
    for (std::size_t k = 0; k < L.num_features(); ++k) s.W[h][k] = r.W(h, k).estimate;
  if (L.mode == Mode::kSdt) {
    s.Q = zero_matrix(L.num_features(), L.num_topics());
    for (std::size_t h = 0; h < L.num_features(); ++h)
      for (std::size_t t = 0; t < L.num_topics(); ++t) s.Q[h][t] = r.Q(h, t).estimate;
  }
  return s;
}

// planted.json. Every field is optional; W and Q default to zero.
inline PlantedConfig planted_config_from_json(const nlohmann::json& j) {
  PlantedConfig c;
  try {
    c.n_users = j.value("n_users", c.n_users);
    c.n_candidates = j.value("n_candidates", c.n_candidates);
    c.seed = j.value("seed", c.seed);
    if (j.contains("features")) c.feature_names = j.at("features").get<std::vector<std::string>>();
    if (j.contains("axes")) {
      c.axis_names = j.at("axes").get<std::vector<std::string>>();
    } else if (c.feature_names != default_feature_names()) {
      c.axis_names.clear();
      for (std::size_t a = 0; a < c.feature_names.size() / 2; ++a) c.axis_names.push_back("axis" + std::to_string(a));
    }
    const std::size_t nf = c.feature_names.size();
    c.feature_prevalence = j.value("feature_prevalence", std::vector<double>(nf, 0.25));
    c.mode = parse_mode(j.value("mode", std::string(j.contains("Q") ? "sdt" : "sd")));
    if (j.contains("topics")) c.topics = j.at("topics").get<std::vector<std::string>>();
    c.topic_dist = j.value("topic_dist", std::vector<double>{});
    c.truth.beta0 = j.value("beta0", 0.0);
    c.truth.W = j.contains("W") ? j.at("W").get<Matrix>() : zero_matrix(nf, nf);
    if (c.mode == Mode::kSdt) {
      c.truth.Q = j.contains("Q") && !j.at("Q").is_null() ? j.at("Q").get<Matrix>()
                                                          : zero_matrix(nf, c.topics.size());
    }
    if (j.contains("proclivity_law")) {
      const auto& law = j.at("proclivity_law");
      const auto kind = law.value("kind", std::string("lognormal"));
      if (kind == "lognormal") {
        c.proclivity_law = {ProclivityLaw::Kind::kLogNormal, law.value("mu", 0.0), law.value("sigma", 1.0)};
      } else if (kind == "constant") {
        c.proclivity_law = {ProclivityLaw::Kind::kConstant, law.value("value", 1.0), 0.0};
      } else {
        throw GenerationError("unknown proclivity law '" + kind + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed planted config: ") + e.what(), 0);
  }
  validate(c);
  return c;
}

inline nlohmann::json planted_config_to_json(const PlantedConfig& c) {
  nlohmann::json j = {{"n_users", c.n_users},
                      {"n_candidates", c.n_candidates},
                      {"seed", c.seed},
                      {"features", c.feature_names},
                      {"axes", c.axis_names},
                      {"feature_prevalence", c.feature_prevalence},
                      {"mode", to_string(c.mode)},
                      {"beta0", c.truth.beta0},
                      {"W", c.truth.W}};
  if (c.mode == Mode::kSdt) {
    j["topics"] = c.topics;
    j["topic_dist"] = c.topic_dist;
    j["Q"] = c.truth.Q;
  }
  if (c.proclivity_law.kind == ProclivityLaw::Kind::kConstant) {
    j["proclivity_law"] = {{"kind", "constant"}, {"value", c.proclivity_law.mu}};
  } else {
    j["proclivity_law"] = {{"kind", "lognormal"}, {"mu", c.proclivity_law.mu}, {"sigma", c.proclivity_law.sigma}};
  }
  return j;
}

}  // namespace homnet
