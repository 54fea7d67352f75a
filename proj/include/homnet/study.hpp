#pragma once

// Per-slice pipelines (ingest -> features -> sample -> fit), cross-slice
// significance aggregation and the CSV tables behind the figures.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "homnet/error.hpp"
#include "homnet/features.hpp"
#include "homnet/inference.hpp"
#include "homnet/ingest.hpp"
#include "homnet/null_sampler.hpp"
#include "homnet/text.hpp"

namespace homnet {

class SliceError : public Error {
 public:
  SliceError(std::string slice, const std::string& what)
      : Error("slice " + slice + ": " + what), slice_(std::move(slice)) {}
  const std::string& slice() const noexcept { return slice_; }

 private:
  std::string slice_;
};

struct SliceConfig {
  std::string label;
  std::filesystem::path posts;
  std::filesystem::path comments;
  std::filesystem::path activity;
};

struct StudyConfig {
  Mode mode = Mode::kSd;
  double q = 0.25;
  double ridge = 1e-6;
  std::uint64_t seed = 0;
  bool per_slice_seeds = true;  // slice i samples with derive_seed(seed, i); else seed as is
  double alpha = 0.05;
  double robust_fraction = 0.8;
  std::filesystem::path scores;
  std::optional<std::filesystem::path> botlist;
  SelectionOptions selection;
  std::vector<TopicId> topics = default_topics();
  std::vector<SliceConfig> slices;
};

namespace detail {

inline std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

inline std::string unquote(std::string_view v, std::size_t line_no) {
  v = trim(v);
  if (v.size() < 2 || v.front() != '"' || v.back() != '"') {
    throw ParseError("expected a quoted string, got '" + std::string(v) + "'", line_no);
  }
  return std::string(v.substr(1, v.size() - 2));
}

inline std::vector<std::string> string_array(std::string_view v, std::size_t line_no) {
  v = trim(v);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') throw ParseError("expected [\"a\", ...]", line_no);
  std::vector<std::string> out;
  const auto inner = trim(v.substr(1, v.size() - 2));
  if (inner.empty()) return out;
  for (auto item : split(inner, ',')) out.push_back(unquote(item, line_no));
  return out;
}

inline bool boolean(std::string_view v, std::size_t line_no) {
  v = trim(v);
  if (v == "true") return true;
  if (v == "false") return false;
  throw ParseError("expected true or false", line_no);
}

}  // namespace detail

// TOML-style study config: top-level `key = value` pairs followed by one
// `[[slice]]` table per slice. Relative paths resolve against `base_dir`.
inline StudyConfig parse_study_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  StudyConfig c;
  SliceConfig* slice = nullptr;
  auto path = [&](std::string_view v, std::size_t line_no) {
    std::filesystem::path p = detail::unquote(v, line_no);
    return p.is_absolute() ? p : base_dir / p;
  };

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(detail::strip_comment(detail::chomp(raw)));
    if (line.empty()) continue;
    if (line == "[[slice]]") {
      slice = &c.slices.emplace_back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));

    if (slice) {
      if (key == "label") slice->label = detail::unquote(value, line_no);
      else if (key == "posts") slice->posts = path(value, line_no);
      else if (key == "comments") slice->comments = path(value, line_no);
      else if (key == "activity") slice->activity = path(value, line_no);
      else throw ParseError("unknown slice key '" + std::string(key) + "'", line_no);
      continue;
    }
    if (key == "mode") c.mode = parse_mode(detail::unquote(value, line_no));
    else if (key == "q") c.q = detail::parse_real(value, line_no);
    else if (key == "ridge") c.ridge = detail::parse_real(value, line_no);
    else if (key == "seed") c.seed = detail::parse_count(value, line_no);
    else if (key == "per_slice_seeds") c.per_slice_seeds = detail::boolean(value, line_no);
    else if (key == "alpha") c.alpha = detail::parse_real(value, line_no);
    else if (key == "robust_fraction") c.robust_fraction = detail::parse_real(value, line_no);
    else if (key == "scores") c.scores = path(value, line_no);
    else if (key == "botlist") c.botlist = path(value, line_no);
    else if (key == "min_messages") c.selection.min_messages = detail::parse_count(value, line_no);
    else if (key == "min_subreddits") c.selection.min_subreddits = detail::parse_count(value, line_no);
    else if (key == "max_subreddits_per_month") c.selection.max_subreddits_per_month = detail::parse_count(value, line_no);
    else if (key == "months_in_slice") c.selection.months_in_slice = detail::parse_count(value, line_no);
    else if (key == "topics") c.topics = detail::string_array(value, line_no);
    else throw ParseError("unknown key '" + std::string(key) + "'", line_no);
  }

  if (c.slices.empty()) throw ConfigError("study config lists no [[slice]]");
  for (const auto& s : c.slices) {
    if (s.label.empty() || s.posts.empty() || s.comments.empty() || s.activity.empty()) {
      throw ConfigError("every slice needs label, posts, comments and activity");
    }
  }
  if (c.scores.empty()) throw ConfigError("study config needs a scores path");
  return c;
}

// Cross-slice verdict for one design column.
struct CoefficientSummary {
  std::size_t n_significant = 0;
  bool sign_consistent = false;
  bool robust = false;
};

struct SliceDiagnostics {
  std::size_t n_nodes = 0;
  std::size_t n_arcs = 0;
  std::uint64_t n_reply_events = 0;
  std::size_t n_examples = 0;
  std::vector<std::size_t> scored_population;
};

struct StudyResult {
  std::vector<std::string> slice_labels;
  std::vector<FitResult> fits;
  std::vector<SliceDiagnostics> diagnostics;  // empty when built from fit files
  std::vector<CoefficientSummary> summary;    // per design column
  double alpha = 0.05;
  double robust_fraction = 0.8;

  const ModelLayout& layout() const { return fits.at(0).layout; }
};

// Minimum number of significant slices for robustness.
inline std::size_t required_slices(std::size_t n_slices, double fraction) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n_slices) - 1e-9));
}

// A coefficient is robust when it is significant (active and p < alpha) in
// at least ceil(fraction * n) slices and its estimate has the same strict
// sign in every slice.
inline StudyResult aggregate(std::vector<std::string> labels, std::vector<FitResult> fits, double alpha = 0.05,
                             double fraction = 0.8) {
  if (fits.empty()) throw ConfigError("nothing to aggregate");
  if (labels.size() != fits.size()) throw DimensionError("one label per fit expected");
  if (!(alpha > 0.0 && alpha < 1.0) || !(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("alpha must lie in (0,1) and the robust fraction in (0,1]");
  }
  const auto& L = fits.front().layout;
  for (const auto& f : fits) {
    if (f.layout.mode != L.mode || f.layout.feature_names != L.feature_names ||
        f.layout.topics.names() != L.topics.names() || f.coef.size() != L.num_coefficients()) {
      throw DimensionError("fits disagree on the model layout");
    }
  }

  StudyResult r;
  r.alpha = alpha;
  r.robust_fraction = fraction;
  const std::size_t need = required_slices(fits.size(), fraction);
  r.summary.resize(L.num_coefficients());
  for (std::size_t j = 0; j < L.num_coefficients(); ++j) {
    auto& s = r.summary[j];
    bool all_pos = true, all_neg = true;
    for (const auto& f : fits) {
      const auto& c = f.coef[j];
      if (c.active && c.p < alpha) ++s.n_significant;
      all_pos = all_pos && c.estimate > 0.0;
      all_neg = all_neg && c.estimate < 0.0;
    }
    s.sign_consistent = all_pos || all_neg;
    s.robust = s.n_significant >= need && s.sign_consistent;
  }
  r.slice_labels = std::move(labels);
  r.fits = std::move(fits);
  return r;
}

struct SliceOutcome {
  FitResult fit;
  SliceDiagnostics diagnostics;
  InteractionGraph graph;
};

inline std::ifstream open_input(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  return in;
}

inline SliceOutcome run_slice(const StudyConfig& c, std::size_t index, const ScoreTable& scores,
                              const SelectionOptions& selection) {
  const auto& s = c.slices.at(index);
  EventLog log;
  log.slice_label = s.label;
  {
    auto in = open_input(s.posts);
    parse_events_into(log, in, EventFormat::kPost);
  }
  {
    auto in = open_input(s.comments);
    parse_events_into(log, in, EventFormat::kComment);
  }
  auto activity_in = open_input(s.activity);
  const auto activity = parse_activity(activity_in);

  SliceOutcome out;
  const auto users = select_users(log, activity, selection);
  out.graph = build_graph(log, users);
  const auto features = build_feature_table(out.graph.nodes, activity, scores, c.q);
  const auto seed = c.per_slice_seeds ? derive_seed(c.seed, index) : c.seed;
  const auto proclivity = compute_proclivity(out.graph);
  const auto ds = build_balanced_dataset(out.graph, proclivity, c.mode, seed);
  validate_dataset(ds, out.graph);
  FitOptions opt;
  opt.ridge = c.ridge;
  out.fit = fit(ds, features, c.mode, opt, TopicIndex(c.topics));

  auto& d = out.diagnostics;
  d.n_nodes = out.graph.nodes.size();
  d.n_arcs = out.graph.arcs.size();
  d.n_reply_events = out.graph.reply_events();
  d.n_examples = ds.examples.size();
  d.scored_population = features.scored_population;
  return out;
}

// Runs every slice in order; the first failure aborts with the slice named.
inline StudyResult run_study(const StudyConfig& c) {
  if (c.slices.empty()) throw ConfigError("study has no slices");
  ScoreTable scores;
  {
    auto in = open_input(c.scores);
    scores = parse_scores(in);
  }
  SelectionOptions selection = c.selection;
  if (c.botlist) {
    auto in = open_input(*c.botlist);
    selection.bot_list = parse_botlist(in);
  }

  std::vector<std::string> labels;
  std::vector<FitResult> fits;
  std::vector<SliceDiagnostics> diags;
  for (std::size_t i = 0; i < c.slices.size(); ++i) {
    try {
      auto outcome = run_slice(c, i, scores, selection);
      labels.push_back(c.slices[i].label);
      fits.push_back(std::move(outcome.fit));
      diags.push_back(std::move(outcome.diagnostics));
    } catch (const SliceError&) {
      throw;
    } catch (const std::exception& e) {
      throw SliceError(c.slices[i].label, e.what());
    }
  }
  auto result = aggregate(std::move(labels), std::move(fits), c.alpha, c.robust_fraction);
  result.diagnostics = std::move(diags);
  return result;
}

namespace detail {

inline std::string csv_real(double v) { return std::isfinite(v) ? format_real(v) : std::string("NA"); }

inline void write_coefficient(std::ostream& out, const Coefficient& c, bool robust) {
  out << csv_real(c.estimate) << ',' << csv_real(c.se) << ',' << csv_real(c.p) << ',' << csv_real(c.ci_low)
      << ',' << csv_real(c.ci_high) << ',' << (robust ? 1 : 0) << '\n';
}

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

}  // namespace detail

// Writes w_matrix.csv, diag.csv and (sdt) q_matrix.csv into out_dir, plus one
// fit json per slice. Returns the paths written.
inline std::vector<std::filesystem::path> emit_tables(const StudyResult& r, const std::filesystem::path& out_dir) {
  if (r.fits.empty() || r.summary.empty()) throw ConfigError("study result is empty; nothing written");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const auto& L = r.layout();
  const std::size_t nf = L.num_features();
  std::vector<std::filesystem::path> written;

  {
    const auto path = out_dir / "w_matrix.csv";
    auto out = detail::open_output(path);
    out << "slice,feature_from,feature_to,estimate,se,p,ci_low,ci_high,robust\n";
    for (std::size_t s = 0; s < r.fits.size(); ++s) {
      for (std::size_t h = 0; h < nf; ++h) {
        for (std::size_t k = 0; k < nf; ++k) {
          out << r.slice_labels[s] << ',' << L.feature_names[h] << ',' << L.feature_names[k] << ',';
          detail::write_coefficient(out, r.fits[s].W(h, k), r.summary[L.w_column(h, k)].robust);
        }
      }
    }
    written.push_back(path);
  }

  if (L.mode == Mode::kSdt) {
    const auto path = out_dir / "q_matrix.csv";
    auto out = detail::open_output(path);
    out << "slice,feature,topic,estimate,se,p,ci_low,ci_high,robust\n";
    for (std::size_t s = 0; s < r.fits.size(); ++s) {
      for (std::size_t h = 0; h < nf; ++h) {
        for (std::size_t t = 0; t < L.num_topics(); ++t) {
          out << r.slice_labels[s] << ',' << L.feature_names[h] << ',' << L.topics.name(t) << ',';
          detail::write_coefficient(out, r.fits[s].Q(h, t), r.summary[L.q_column(h, t)].robust);
        }
      }
    }
    written.push_back(path);
  }

  {
    // Within-class and cross-class cells of each axis' 2x2 block.
    const auto path = out_dir / "diag.csv";
    auto out = detail::open_output(path);
    out << "slice,axis,kind,feature_from,feature_to,estimate,se,p,ci_low,ci_high,robust\n";
    const std::array<std::pair<const char*, std::pair<int, int>>, 4> kinds = {
        {{"within", {0, 0}}, {"within", {1, 1}}, {"cross", {0, 1}}, {"cross", {1, 0}}}};
    for (std::size_t s = 0; s < r.fits.size(); ++s) {
      for (std::size_t a = 0; a < nf / 2; ++a) {
        const std::string axis = a < axis_names().size() && nf == kNumFeatures ? axis_names()[a]
                                                                               : "axis" + std::to_string(a);
        for (const auto& [kind, cell] : kinds) {
          const std::size_t h = 2 * a + static_cast<std::size_t>(cell.first);
          const std::size_t k = 2 * a + static_cast<std::size_t>(cell.second);
          out << r.slice_labels[s] << ',' << axis << ',' << kind << ',' << L.feature_names[h] << ','
              << L.feature_names[k] << ',';
          detail::write_coefficient(out, r.fits[s].W(h, k), r.summary[L.w_column(h, k)].robust);
        }
      }
    }
    written.push_back(path);
  }

  for (std::size_t s = 0; s < r.fits.size(); ++s) {
    const auto path = out_dir / ("fit_" + r.slice_labels[s] + ".json");
    auto out = detail::open_output(path);
    out << fit_to_json(r.fits[s]).dump(2) << '\n';
    written.push_back(path);
  }

  if (!r.diagnostics.empty()) {
    const auto path = out_dir / "slices.json";
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t s = 0; s < r.diagnostics.size(); ++s) {
      const auto& d = r.diagnostics[s];
      j.push_back({{"slice", r.slice_labels[s]},
                   {"n_nodes", d.n_nodes},
                   {"n_arcs", d.n_arcs},
                   {"n_reply_events", d.n_reply_events},
                   {"n_examples", d.n_examples},
                   {"scored_population", d.scored_population}});
    }
    auto out = detail::open_output(path);
    out << j.dump(2) << '\n';
    written.push_back(path);
  }
  return written;
}

}  // namespace homnet
