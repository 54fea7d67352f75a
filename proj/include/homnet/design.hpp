#pragma once

// Design rows of the feature-feature logit: an intercept, the outer product
// x_u (x) x_v, and (sdt mode) the shared topic block (x_u + x_v) tau^T.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "homnet/error.hpp"
#include "homnet/features.hpp"
#include "homnet/null_sampler.hpp"
#include "homnet/topics.hpp"

namespace homnet {

// Entry (h, k) = x_u[h] * x_v[k], flattened row-major.
inline std::vector<std::uint8_t> outer_kernel(std::span<const std::uint8_t> x_u,
                                              std::span<const std::uint8_t> x_v) {
  if (x_u.size() != x_v.size()) {
    throw DimensionError("feature vectors differ in length: " + std::to_string(x_u.size()) + " vs " +
                         std::to_string(x_v.size()));
  }
  const std::size_t n = x_u.size();
  std::vector<std::uint8_t> block(n * n, 0);
  for (std::size_t h = 0; h < n; ++h) {
    if (!x_u[h]) continue;
    for (std::size_t k = 0; k < n; ++k) block[h * n + k] = x_v[k];
  }
  return block;
}

// Entry (h, t) = (x_u[h] + x_v[h]) * [t == topic], flattened row-major over
// |F| x |T|. kNoTopic gives the zero block.
inline std::vector<std::uint8_t> topic_terms(std::span<const std::uint8_t> x_u,
                                             std::span<const std::uint8_t> x_v, std::string_view topic,
                                             const TopicIndex& topics) {
  if (x_u.size() != x_v.size()) throw DimensionError("feature vectors differ in length");
  const std::size_t n_t = topics.size();
  std::vector<std::uint8_t> block(x_u.size() * n_t, 0);
  if (topic == kNoTopic) return block;
  const auto t = topics.find(topic);
  if (!t) throw ConfigError("unknown topic '" + std::string(topic) + "'");
  for (std::size_t h = 0; h < x_u.size(); ++h) {
    block[h * n_t + *t] = static_cast<std::uint8_t>(x_u[h] + x_v[h]);
  }
  return block;
}

// Column layout: 0 = intercept, then W row-major, then Q row-major (sdt).
struct ModelLayout {
  Mode mode = Mode::kSd;
  std::vector<std::string> feature_names;
  TopicIndex topics;

  std::size_t num_features() const { return feature_names.size(); }
  std::size_t num_topics() const { return mode == Mode::kSdt ? topics.size() : 0; }
  std::size_t num_coefficients() const {
    return 1 + num_features() * num_features() + num_features() * num_topics();
  }
  std::size_t w_column(std::size_t h, std::size_t k) const { return 1 + h * num_features() + k; }
  std::size_t q_column(std::size_t h, std::size_t t) const {
    return 1 + num_features() * num_features() + h * num_topics() + t;
  }

  std::string column_name(std::size_t j) const {
    const std::size_t nf = num_features();
    if (j == 0) return "intercept";
    if (j < 1 + nf * nf) {
      const auto c = j - 1;
      return "W[" + feature_names[c / nf] + "," + feature_names[c % nf] + "]";
    }
    const auto c = j - 1 - nf * nf;
    return "Q[" + feature_names[c / num_topics()] + "," + topics.name(c % num_topics()) + "]";
  }
};

// Compressed sparse rows; columns ascend within a row.
struct Design {
  ModelLayout layout;
  std::vector<std::size_t> row_start{0};
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  std::vector<double> y;

  std::size_t rows() const { return y.size(); }
  std::size_t columns() const { return layout.num_coefficients(); }

  void append_row(std::span<const std::uint8_t> x_u, std::span<const std::uint8_t> x_v,
                  std::string_view topic, std::uint8_t label) {
    const auto pair_block = outer_kernel(x_u, x_v);
    cols.push_back(0);
    vals.push_back(1.0);
    for (std::size_t i = 0; i < pair_block.size(); ++i) {
      if (pair_block[i]) {
        cols.push_back(static_cast<std::uint32_t>(1 + i));
        vals.push_back(1.0);
      }
    }
    if (layout.mode == Mode::kSdt) {
      const auto block = topic_terms(x_u, x_v, topic, layout.topics);
      const std::size_t offset = 1 + pair_block.size();
      for (std::size_t i = 0; i < block.size(); ++i) {
        if (block[i]) {
          cols.push_back(static_cast<std::uint32_t>(offset + i));
          vals.push_back(block[i]);
        }
      }
    } else if (topic != kNoTopic) {
      throw ConfigError("sd mode expects no topic, got '" + std::string(topic) + "'");
    }
    y.push_back(label);
    row_start.push_back(cols.size());
  }

  // Linear predictor, summed in ascending column order.
  double eta(std::size_t i, std::span<const double> theta) const {
    double s = 0.0;
    for (std::size_t p = row_start[i]; p < row_start[i + 1]; ++p) s += vals[p] * theta[cols[p]];
    return s;
  }

  // Columns that are nonzero in at least one row.
  std::vector<bool> active_columns() const {
    std::vector<bool> active(columns(), false);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      if (vals[p] != 0.0) active[cols[p]] = true;
    }
    return active;
  }
};

inline Design build_design(const LabeledDataset& ds, const FeatureTable& features, Mode mode,
                           const TopicIndex& topics = TopicIndex(default_topics())) {
  Design d;
  d.layout.mode = mode;
  d.layout.feature_names = features.feature_names;
  if (mode == Mode::kSdt) d.layout.topics = topics;
  for (const auto& e : ds.examples) {
    const auto& xu = features.x(e.u);
    const auto& xv = features.x(e.v);
    if (xu.size() != features.num_features() || xv.size() != features.num_features()) {
      throw DimensionError("feature row length disagrees with the feature list");
    }
    d.append_row(xu, xv, mode == Mode::kSdt ? std::string_view(e.topic) : kNoTopic, e.y);
  }
  return d;
}

}  // namespace homnet
