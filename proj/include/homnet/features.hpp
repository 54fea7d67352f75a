#pragma once

// User-level socio-demographic features: projection of subreddit scores onto
// users, rank normalization and quartile binarization into pole bits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "homnet/error.hpp"
#include "homnet/ingest.hpp"
#include "homnet/rng.hpp"
#include "homnet/text.hpp"

namespace homnet {

enum class Axis : std::size_t { kAge = 0, kGender = 1, kAffluence = 2, kPartisan = 3 };

inline constexpr std::size_t kNumAxes = 4;
inline constexpr std::size_t kNumFeatures = 2 * kNumAxes;

inline const std::array<std::string, kNumAxes>& axis_names() {
  static const std::array<std::string, kNumAxes> names = {"age", "gender", "affluence", "partisan"};
  return names;
}

// Canonical feature order; axis a owns features 2a (low pole) and 2a+1.
inline const std::vector<std::string>& default_feature_names() {
  static const std::vector<std::string> names = {"Young", "Old",  "Male", "Female",
                                                 "Poor",  "Rich", "Left", "Right"};
  return names;
}

inline std::optional<Axis> parse_axis(std::string_view name) {
  const auto& names = axis_names();
  for (std::size_t a = 0; a < kNumAxes; ++a) {
    if (names[a] == name) return static_cast<Axis>(a);
  }
  return std::nullopt;
}

inline std::optional<std::size_t> feature_index(std::string_view name) {
  const auto& names = default_feature_names();
  for (std::size_t f = 0; f < names.size(); ++f) {
    if (names[f] == name) return f;
  }
  return std::nullopt;
}

// Which feature the lowest and highest quantiles of an axis map to.
struct AxisPolarity {
  std::size_t low_feature;
  std::size_t high_feature;
};

struct ScoreRow {
  std::string subreddit;
  Axis axis;
  double score;
};

struct ScoreTable {
  std::vector<ScoreRow> rows;
  std::array<AxisPolarity, kNumAxes> polarity = {{{0, 1}, {2, 3}, {4, 5}, {6, 7}}};
};

// scores.csv: subreddit,axis,score rows, an optional header row, and optional
// `#polarity axis=Low:High [axis=Low:High ...]` lines.
inline ScoreTable parse_scores(std::istream& in) {
  ScoreTable table;
  std::set<std::pair<std::string, std::size_t>> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(detail::chomp(raw));
    if (line.empty()) continue;
    if (line.starts_with("#polarity")) {
      for (auto entry : detail::split(detail::trim(line.substr(9)), ' ')) {
        entry = detail::trim(entry);
        if (entry.empty()) continue;
        const auto eq = detail::split(entry, '=');
        const auto poles = eq.size() == 2 ? detail::split(eq[1], ':') : decltype(eq){};
        if (eq.size() != 2 || poles.size() != 2) {
          throw ParseError("polarity entry must look like axis=Low:High", line_no);
        }
        const auto axis = parse_axis(eq[0]);
        const auto lo = feature_index(poles[0]);
        const auto hi = feature_index(poles[1]);
        if (!axis || !lo || !hi) {
          throw ParseError("unknown axis or feature in '" + std::string(entry) + "'", line_no);
        }
        const auto a = static_cast<std::size_t>(*axis);
        const std::set<std::size_t> own = {2 * a, 2 * a + 1};
        if (*lo == *hi || !own.contains(*lo) || !own.contains(*hi)) {
          throw ParseError("polarity must map the axis onto its own two features", line_no);
        }
        table.polarity[a] = {*lo, *hi};
      }
      continue;
    }
    if (line.starts_with('#')) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != 3) throw ParseError("expected subreddit,axis,score", line_no);
    if (fields[0] == "subreddit" && fields[1] == "axis") continue;
    const auto axis = parse_axis(detail::trim(fields[1]));
    if (!axis) throw ParseError("unknown axis '" + std::string(fields[1]) + "'", line_no);
    ScoreRow row{std::string(detail::trim(fields[0])), *axis, detail::parse_real(fields[2], line_no)};
    if (!seen.emplace(row.subreddit, static_cast<std::size_t>(row.axis)).second) {
      throw DuplicateError("duplicate score for (" + row.subreddit + ", " + std::string(fields[1]) + ")",
                           line_no);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// Activity-weighted mean of subreddit scores on one axis. Only subreddits
// scored on that axis enter numerator and denominator; a user whose scored
// activity is zero maps to nullopt.
inline std::map<UserId, std::optional<double>> project_scores(const ActivityTable& activity,
                                                              const ScoreTable& scores, Axis axis) {
  std::unordered_map<std::string_view, double> score_of;
  for (const auto& row : scores.rows) {
    if (row.axis == axis) score_of.emplace(row.subreddit, row.score);
  }

  struct Acc {
    double weighted = 0.0;
    double total = 0.0;
  };
  std::map<UserId, Acc> acc;
  for (const auto& row : activity) {
    auto& a = acc[row.user];
    auto it = score_of.find(row.subreddit);
    if (it == score_of.end() || row.n_submissions == 0) continue;
    const auto n = static_cast<double>(row.n_submissions);
    a.weighted += n * it->second;
    a.total += n;
  }

  std::map<UserId, std::optional<double>> out;
  for (const auto& [user, a] : acc) {
    out.emplace(user, a.total > 0.0 ? std::optional<double>(a.weighted / a.total) : std::nullopt);
  }
  return out;
}

struct PoleAssignment {
  std::optional<double> quantile;  // (rank + 0.5) / n
  bool low = false;
  bool high = false;
};

inline constexpr std::uint64_t kTieBreakSalt = 0x7f4a7c159e3779b9ULL;

// Ranks users with a present score (ties broken by a salted hash of the user
// id) and labels the lowest and highest floor(q * n) as the two poles.
inline std::map<UserId, PoleAssignment> quantile_binarize(
    const std::map<UserId, std::optional<double>>& raw, double q = 0.25) {
  if (!(q > 0.0 && q < 0.5)) throw ConfigError("quantile fraction must lie in (0, 0.5)");

  struct Ranked {
    double value;
    std::uint64_t hash;
    const UserId* user;
  };
  std::vector<Ranked> present;
  std::map<UserId, PoleAssignment> out;
  for (const auto& [user, value] : raw) {
    out.emplace(user, PoleAssignment{});
    if (value) present.push_back({*value, stable_hash(user, kTieBreakSalt), &user});
  }
  const std::size_t n = present.size();
  if (n < 4) {
    throw InsufficientPopulationError("need at least 4 scored users to binarize, have " +
                                      std::to_string(n));
  }
  std::sort(present.begin(), present.end(), [](const Ranked& a, const Ranked& b) {
    if (a.value != b.value) return a.value < b.value;
    if (a.hash != b.hash) return a.hash < b.hash;
    return *a.user < *b.user;
  });

  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(n) + 1e-9));
  for (std::size_t rank = 0; rank < n; ++rank) {
    auto& slot = out[*present[rank].user];
    slot.quantile = (static_cast<double>(rank) + 0.5) / static_cast<double>(n);
    slot.low = rank < k;
    slot.high = rank >= n - k;
  }
  return out;
}

struct FeatureRow {
  std::vector<std::optional<double>> raw;       // per axis
  std::vector<std::optional<double>> quantile;  // per axis
  std::vector<std::uint8_t> x;                  // per feature
};

// Binary feature vectors per user. Features come in axis pairs: axis a owns
// feature columns 2a and 2a+1.
struct FeatureTable {
  std::vector<std::string> feature_names = default_feature_names();
  std::vector<std::string> axis_names{homnet::axis_names().begin(), homnet::axis_names().end()};
  std::map<UserId, FeatureRow> rows;
  std::vector<std::size_t> scored_population;  // per axis, users with a present raw score

  std::size_t num_features() const { return feature_names.size(); }

  const std::vector<std::uint8_t>& x(const UserId& user) const {
    auto it = rows.find(user);
    if (it == rows.end()) throw ConfigError("user '" + user + "' has no feature row");
    return it->second.x;
  }
};

// Features for `users`, quantiled among those of them with scored activity.
inline FeatureTable build_feature_table(const std::set<UserId>& users, const ActivityTable& activity,
                                        const ScoreTable& scores, double q = 0.25) {
  FeatureTable table;
  for (const auto& u : users) {
    table.rows[u] = FeatureRow{std::vector<std::optional<double>>(kNumAxes),
                               std::vector<std::optional<double>>(kNumAxes),
                               std::vector<std::uint8_t>(kNumFeatures, 0)};
  }
  table.scored_population.assign(kNumAxes, 0);

  for (std::size_t a = 0; a < kNumAxes; ++a) {
    const auto projected = project_scores(activity, scores, static_cast<Axis>(a));
    std::map<UserId, std::optional<double>> raw;
    for (const auto& u : users) {
      auto it = projected.find(u);
      raw.emplace(u, it == projected.end() ? std::nullopt : it->second);
    }
    const auto poles = quantile_binarize(raw, q);
    const auto [lo, hi] = scores.polarity[a];
    for (const auto& [u, pole] : poles) {
      auto& row = table.rows[u];
      row.raw[a] = raw[u];
      row.quantile[a] = pole.quantile;
      row.x[lo] = pole.low ? 1 : 0;
      row.x[hi] = pole.high ? 1 : 0;
      if (pole.quantile) ++table.scored_population[a];
    }
  }
  return table;
}

// features.csv: user, then axis_raw,axis_quantile,<feature 2a>,<feature 2a+1>
// per axis. Missing reals are written as NA.
inline void write_features_csv(std::ostream& out, const FeatureTable& table) {
  const std::size_t n_axes = table.axis_names.size();
  if (table.feature_names.size() != 2 * n_axes) {
    throw DimensionError("feature table must have two features per axis");
  }
  out << "user";
  for (std::size_t a = 0; a < n_axes; ++a) {
    out << ',' << table.axis_names[a] << "_raw," << table.axis_names[a] << "_quantile,"
        << table.feature_names[2 * a] << ',' << table.feature_names[2 * a + 1];
  }
  out << '\n';
  auto real = [](const std::optional<double>& v) { return v ? detail::format_real(*v) : std::string("NA"); };
  for (const auto& [user, row] : table.rows) {
    out << user;
    for (std::size_t a = 0; a < n_axes; ++a) {
      out << ',' << real(a < row.raw.size() ? row.raw[a] : std::nullopt) << ','
          << real(a < row.quantile.size() ? row.quantile[a] : std::nullopt) << ','
          << int(row.x[2 * a]) << ',' << int(row.x[2 * a + 1]);
    }
    out << '\n';
  }
}

inline FeatureTable read_features_csv(std::istream& in) {
  FeatureTable table;
  table.feature_names.clear();
  table.axis_names.clear();
  std::string raw;
  std::size_t line_no = 0;
  if (!std::getline(in, raw)) throw ParseError("features file is empty", 0);
  ++line_no;
  const auto header = detail::split(detail::chomp(raw), ',');
  if (header.empty() || header[0] != "user" || (header.size() - 1) % 4 != 0) {
    throw ParseError("features header must be user followed by 4 columns per axis", line_no);
  }
  const std::size_t n_axes = (header.size() - 1) / 4;
  for (std::size_t a = 0; a < n_axes; ++a) {
    const auto raw_col = header[1 + 4 * a];
    if (!raw_col.ends_with("_raw")) throw ParseError("expected <axis>_raw column", line_no);
    table.axis_names.emplace_back(raw_col.substr(0, raw_col.size() - 4));
    table.feature_names.emplace_back(header[3 + 4 * a]);
    table.feature_names.emplace_back(header[4 + 4 * a]);
  }
  auto real = [&](std::string_view f) -> std::optional<double> {
    if (f == "NA") return std::nullopt;
    return detail::parse_real(f, line_no);
  };
  auto bit = [&](std::string_view f) -> std::uint8_t {
    if (f == "0") return 0;
    if (f == "1") return 1;
    throw ParseError("feature bit must be 0 or 1", line_no);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::chomp(raw);
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != header.size()) throw ParseError("wrong number of columns", line_no);
    FeatureRow row;
    row.x.assign(2 * n_axes, 0);
    for (std::size_t a = 0; a < n_axes; ++a) {
      row.raw.push_back(real(f[1 + 4 * a]));
      row.quantile.push_back(real(f[2 + 4 * a]));
      row.x[2 * a] = bit(f[3 + 4 * a]);
      row.x[2 * a + 1] = bit(f[4 + 4 * a]);
    }
    if (!table.rows.emplace(std::string(f[0]), std::move(row)).second) {
      throw DuplicateError("duplicate user '" + std::string(f[0]) + "'", line_no);
    }
  }
  return table;
}

}  // namespace homnet
