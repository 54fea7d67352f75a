#pragma once

// Balanced positive/negative pair datasets. Negatives come from the
// product-proclivity null: the source is drawn proportionally to its reply
// activity, the target proportionally to the replies it received, and pairs
// that are self-pairs or observed arcs are redrawn.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "homnet/error.hpp"
#include "homnet/ingest.hpp"
#include "homnet/rng.hpp"
#include "homnet/text.hpp"
#include "homnet/topics.hpp"

namespace homnet {

enum class Mode { kSd, kSdt };

inline std::string_view to_string(Mode m) { return m == Mode::kSd ? "sd" : "sdt"; }

inline Mode parse_mode(std::string_view s) {
  if (s == "sd") return Mode::kSd;
  if (s == "sdt") return Mode::kSdt;
  throw ConfigError("mode must be sd or sdt, got '" + std::string(s) + "'");
}

struct Example {
  UserId u;
  UserId v;
  TopicId topic;  // kNoTopic in sd mode
  std::uint8_t y = 0;

  friend bool operator==(const Example&, const Example&) = default;
};

// Reply-event weights per node, in the graph's node order.
struct Proclivity {
  std::vector<UserId> nodes;
  std::vector<double> out_weight;  // comments posted
  std::vector<double> in_weight;   // comments received
};

inline Proclivity compute_proclivity(const InteractionGraph& g) {
  Proclivity p;
  p.nodes.assign(g.nodes.begin(), g.nodes.end());
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < p.nodes.size(); ++i) index.emplace(p.nodes[i], i);
  p.out_weight.assign(p.nodes.size(), 0.0);
  p.in_weight.assign(p.nodes.size(), 0.0);
  for (const auto& [arc, counts] : g.arcs) {
    std::uint64_t events = 0;
    for (const auto& [t, c] : counts) events += c;
    p.out_weight[index.at(arc.first)] += static_cast<double>(events);
    p.in_weight[index.at(arc.second)] += static_cast<double>(events);
  }
  return p;
}

inline std::vector<Example> positives(const InteractionGraph& g, Mode mode) {
  std::vector<Example> out;
  for (const auto& [arc, counts] : g.arcs) {
    if (mode == Mode::kSd) {
      out.push_back({arc.first, arc.second, std::string(kNoTopic), 1});
    } else {
      for (const auto& [topic, c] : counts) out.push_back({arc.first, arc.second, topic, 1});
    }
  }
  return out;
}

using TopicDistribution = std::vector<std::pair<TopicId, double>>;

// Topic frequencies among the given examples, in first-seen order.
inline TopicDistribution empirical_topic_distribution(const std::vector<Example>& examples) {
  TopicDistribution dist;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& e : examples) {
    auto [it, fresh] = slot.emplace(e.topic, dist.size());
    if (fresh) dist.emplace_back(e.topic, 0.0);
    dist[it->second].second += 1.0;
  }
  return dist;
}

struct RejectionStats {
  std::uint64_t draws = 0;
  std::uint64_t self_rejections = 0;
  std::uint64_t link_rejections = 0;
  std::uint64_t max_consecutive_rejections = 0;

  RejectionStats& operator+=(const RejectionStats& o) {
    draws += o.draws;
    self_rejections += o.self_rejections;
    link_rejections += o.link_rejections;
    max_consecutive_rejections = std::max(max_consecutive_rejections, o.max_consecutive_rejections);
    return *this;
  }
};

inline constexpr std::uint64_t kRejectionCap = 1'000'000;

// Product-law pair sampler over a fixed graph. draw_candidate() exposes the
// raw pre-rejection draw.
class ProclivitySampler {
 public:
  ProclivitySampler(const InteractionGraph& g, const Proclivity& p) : nodes_(p.nodes) {
    if (p.out_weight.size() != nodes_.size() || p.in_weight.size() != nodes_.size()) {
      throw DimensionError("proclivity weights do not match the node list");
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i], i);
    for (const auto& [arc, counts] : g.arcs) {
      links_.insert(key(index_.at(arc.first), index_.at(arc.second)));
    }
    source_ = CumulativeSampler(p.out_weight);
    target_ = CumulativeSampler(p.in_weight);
    if (source_.degenerate() || target_.degenerate()) {
      throw DegenerateWeightsError("all out-weights or all in-weights are zero");
    }
    // Count pairs with positive probability that are neither self-pairs nor
    // links; zero means no negative can ever be accepted.
    std::uint64_t senders = 0, receivers = 0, both = 0, reachable_links = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const bool s = p.out_weight[i] > 0.0, r = p.in_weight[i] > 0.0;
      senders += s;
      receivers += r;
      both += s && r;
    }
    for (const auto& [arc, counts] : g.arcs) {
      const auto u = index_.at(arc.first), v = index_.at(arc.second);
      reachable_links += p.out_weight[u] > 0.0 && p.in_weight[v] > 0.0;
    }
    if (senders * receivers - both - reachable_links == 0) {
      throw NearCompleteGraphError("no non-link pair has positive sampling weight");
    }
  }

  ProclivitySampler(const ProclivitySampler&) = delete;
  ProclivitySampler& operator=(const ProclivitySampler&) = delete;

  std::pair<std::size_t, std::size_t> draw_candidate(Rng& rng) const {
    const auto u = source_.draw(rng);
    const auto v = target_.draw(rng);
    return {u, v};
  }

  bool is_link(std::size_t u, std::size_t v) const { return links_.contains(key(u, v)); }

  // Redraws until the pair is neither a self-pair nor a link.
  std::pair<std::size_t, std::size_t> draw_negative(Rng& rng, RejectionStats& stats) const {
    std::uint64_t consecutive = 0;
    for (;;) {
      ++stats.draws;
      const auto [u, v] = draw_candidate(rng);
      if (u == v) {
        ++stats.self_rejections;
      } else if (is_link(u, v)) {
        ++stats.link_rejections;
      } else {
        return {u, v};
      }
      ++consecutive;
      stats.max_consecutive_rejections = std::max(stats.max_consecutive_rejections, consecutive);
      if (consecutive >= kRejectionCap) {
        throw NearCompleteGraphError("rejection cap of " + std::to_string(kRejectionCap) +
                                     " consecutive draws exceeded");
      }
    }
  }

  const std::vector<UserId>& nodes() const { return nodes_; }

 private:
  std::uint64_t key(std::size_t u, std::size_t v) const {
    return static_cast<std::uint64_t>(u) * nodes_.size() + v;
  }

  std::vector<UserId> nodes_;
  std::unordered_map<std::string_view, std::size_t> index_;
  std::unordered_set<std::uint64_t> links_;
  CumulativeSampler source_;
  CumulativeSampler target_;
};

struct NegativeOptions {
  std::uint64_t seed = 0;
  std::size_t streams = 1;  // stream i uses derive_seed(seed, i); output is concatenated
  TopicDistribution topic_dist;  // empty: negatives carry kNoTopic
};

// m negatives from the non-link-conditioned product law.
inline std::vector<Example> sample_negatives(const InteractionGraph& g, const Proclivity& p,
                                             std::size_t m, const NegativeOptions& opt,
                                             RejectionStats* stats_out = nullptr) {
  if (m == 0) throw ConfigError("number of negatives must be at least 1");
  if (opt.streams == 0) throw ConfigError("need at least one sampling stream");
  const ProclivitySampler sampler(g, p);

  std::vector<double> topic_weights;
  for (const auto& [t, w] : opt.topic_dist) topic_weights.push_back(w);
  const CumulativeSampler topics(topic_weights);
  if (!opt.topic_dist.empty() && topics.degenerate()) {
    throw DegenerateWeightsError("topic distribution has zero mass");
  }

  std::vector<Example> out;
  out.reserve(m);
  RejectionStats stats;
  for (std::size_t s = 0; s < opt.streams; ++s) {
    const std::size_t share = m / opt.streams + (s < m % opt.streams ? 1 : 0);
    Rng rng(derive_seed(opt.seed, s));
    for (std::size_t i = 0; i < share; ++i) {
      const auto [u, v] = sampler.draw_negative(rng, stats);
      TopicId topic(kNoTopic);
      if (!opt.topic_dist.empty()) topic = opt.topic_dist[topics.draw(rng)].first;
      out.push_back({sampler.nodes()[u], sampler.nodes()[v], std::move(topic), 0});
    }
  }
  if (stats_out) *stats_out = stats;
  return out;
}

struct LabeledDataset {
  std::vector<Example> examples;
  std::uint64_t seed = 0;
  Mode mode = Mode::kSd;
  RejectionStats rejection_stats;

  std::size_t count(std::uint8_t y) const {
    std::size_t n = 0;
    for (const auto& e : examples) n += e.y == y;
    return n;
  }
};

inline constexpr std::uint64_t kShuffleStream = 0xfffffffffULL;

// All positives plus as many negatives, shuffled under `seed`. In sdt mode
// negative topics follow the empirical topic distribution of the positives.
inline LabeledDataset build_balanced_dataset(const InteractionGraph& g, const Proclivity& p, Mode mode,
                                             std::uint64_t seed) {
  LabeledDataset ds;
  ds.seed = seed;
  ds.mode = mode;
  ds.examples = positives(g, mode);
  if (ds.examples.empty()) return ds;

  NegativeOptions opt;
  opt.seed = seed;
  if (mode == Mode::kSdt) opt.topic_dist = empirical_topic_distribution(ds.examples);
  auto negatives = sample_negatives(g, p, ds.examples.size(), opt, &ds.rejection_stats);
  ds.examples.insert(ds.examples.end(), std::make_move_iterator(negatives.begin()),
                     std::make_move_iterator(negatives.end()));
  Rng rng(derive_seed(seed, kShuffleStream));
  shuffle_in_place(ds.examples, rng);
  return ds;
}

// Throws unless the dataset is balanced, free of self-pairs and no negative
// is an arc of `g`.
inline void validate_dataset(const LabeledDataset& ds, const InteractionGraph& g) {
  if (ds.count(1) != ds.count(0)) {
    throw Error("dataset is unbalanced: " + std::to_string(ds.count(1)) + " positives vs " +
                std::to_string(ds.count(0)) + " negatives");
  }
  for (const auto& e : ds.examples) {
    if (e.u == e.v) throw Error("self-pair example for " + e.u);
    if (e.y == 0 && g.arcs.contains({e.u, e.v})) {
      throw Error("negative example collides with arc " + e.u + " -> " + e.v);
    }
  }
}

inline void write_dataset_tsv(std::ostream& out, const LabeledDataset& ds) {
  out << "u\tv\ttopic\ty\n";
  for (const auto& e : ds.examples) {
    out << e.u << '\t' << e.v << '\t' << e.topic << '\t' << int(e.y) << '\n';
  }
}

inline nlohmann::json dataset_sidecar(const LabeledDataset& ds) {
  const auto& s = ds.rejection_stats;
  return {{"seed", ds.seed},
          {"mode", to_string(ds.mode)},
          {"counts", {{"positives", ds.count(1)}, {"negatives", ds.count(0)}, {"total", ds.examples.size()}}},
          {"rejection_stats",
           {{"draws", s.draws},
            {"self_rejections", s.self_rejections},
            {"link_rejections", s.link_rejections},
            {"max_consecutive_rejections", s.max_consecutive_rejections}}}};
}

inline LabeledDataset read_dataset_tsv(std::istream& in) {
  LabeledDataset ds;
  std::string raw;
  std::size_t line_no = 0;
  bool any_topic = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::chomp(raw);
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_tabs(line, 4);
    if (f.size() != 4) throw ParseError("expected u<TAB>v<TAB>topic<TAB>y", line_no);
    if (line_no == 1 && f[0] == "u" && f[3] == "y") continue;
    if (f[0].empty() || f[1].empty() || f[2].empty()) throw ParseError("empty field", line_no);
    if (f[3] != "0" && f[3] != "1") throw ParseError("label must be 0 or 1", line_no);
    any_topic = any_topic || f[2] != kNoTopic;
    ds.examples.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2]),
                           static_cast<std::uint8_t>(f[3] == "1")});
  }
  ds.mode = any_topic ? Mode::kSdt : Mode::kSd;
  return ds;
}

}  // namespace homnet
