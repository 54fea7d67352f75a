#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "homnet/error.hpp"

namespace homnet {

using TopicId = std::string;

// Written in place of a topic for examples that carry none (sd mode).
inline constexpr std::string_view kNoTopic = "NA";

// The 15 most frequent headline categories, most popular first.
inline const std::vector<TopicId>& default_topics() {
  static const std::vector<TopicId> topics = {
      "Business", "Politics", "Worldpost", "Entertainment", "Healthy Living",
      "Crime",    "Sports",   "Travel",    "Green",         "Tech",
      "Arts",     "Media",    "Style",     "Weird News",    "Religion"};
  return topics;
}

// Ordered topic list with O(1) name lookup.
class TopicIndex {
 public:
  TopicIndex() = default;
  explicit TopicIndex(std::vector<TopicId> topics) : topics_(std::move(topics)) {
    for (std::size_t i = 0; i < topics_.size(); ++i) {
      if (topics_[i].empty() || topics_[i] == kNoTopic) {
        throw ConfigError("invalid topic name '" + topics_[i] + "'");
      }
      if (!index_.emplace(topics_[i], i).second) {
        throw ConfigError("duplicate topic '" + topics_[i] + "'");
      }
    }
  }

  std::size_t size() const { return topics_.size(); }
  const std::vector<TopicId>& names() const { return topics_; }
  const TopicId& name(std::size_t i) const { return topics_.at(i); }

  std::optional<std::size_t> find(std::string_view topic) const {
    auto it = index_.find(std::string(topic));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<TopicId> topics_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Topic -> keywords, in tie-break order.
using KeywordMap = std::vector<std::pair<TopicId, std::vector<std::string>>>;

inline const KeywordMap& default_keyword_map() {
  static const KeywordMap map = {
      {"Business", {"bank", "stock", "stocks", "market", "economy", "hiring", "company", "investment", "jobs", "trade"}},
      {"Politics", {"trump", "senate", "congress", "election", "president", "democrats", "republicans", "impeachment", "vote"}},
      {"Worldpost", {"china", "italy", "russia", "india", "europe", "un", "coronavirus", "iran", "syria"}},
      {"Entertainment", {"oscar", "oscars", "movie", "film", "music", "album", "grammy", "actor", "singer"}},
      {"Healthy Living", {"health", "nursing", "virus", "diet", "sleep", "exercise", "isolation", "hospital"}},
      {"Crime", {"police", "cop", "cops", "suspect", "shooting", "arrested", "murder", "court", "charged"}},
      {"Sports", {"nfl", "nba", "boxing", "espn", "soccer", "olympics", "championship", "coach"}},
      {"Travel", {"flight", "airline", "tourism", "tourists", "hotel", "skies", "travel", "vacation"}},
      {"Green", {"climate", "environment", "emissions", "wildlife", "pollution", "denialism", "warming"}},
      {"Tech", {"google", "apple", "windows", "chrome", "software", "ai", "facebook", "app", "apps"}},
      {"Arts", {"art", "museum", "painting", "crafting", "theater", "poetry", "sculpture"}},
      {"Media", {"tv", "newshour", "pbs", "anchor", "journalist", "newspaper", "cnn", "fox"}},
      {"Style", {"fashion", "beauty", "gifts", "dress", "makeup", "style"}},
      {"Weird News", {"ufo", "bizarre", "strange", "panties", "weird", "alligator"}},
      {"Religion", {"ramadan", "church", "pope", "religion", "muslim", "christian", "faith"}},
  };
  return map;
}

namespace detail {

inline std::vector<std::string> lower_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace detail

// Keyword-vote stand-in for a headline classifier. A keyword hits once per
// occurrence as a whole token sequence (case-insensitive). Ties go to the
// earlier topic in `keyword_map`; no hits at all yields `fallback`, or the
// first topic when no fallback is given.
inline TopicId assign_topic_baseline(std::string_view title, const KeywordMap& keyword_map,
                                     std::optional<TopicId> fallback = std::nullopt) {
  if (keyword_map.empty()) throw ConfigError("keyword map is empty");
  const auto tokens = detail::lower_tokens(title);

  std::size_t best = 0;
  std::size_t best_hits = 0;
  for (std::size_t t = 0; t < keyword_map.size(); ++t) {
    std::size_t hits = 0;
    for (const auto& keyword : keyword_map[t].second) {
      const auto phrase = detail::lower_tokens(keyword);
      if (phrase.empty() || phrase.size() > tokens.size()) continue;
      for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
        if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) ++hits;
      }
    }
    if (hits > best_hits) {
      best = t;
      best_hits = hits;
    }
  }
  if (best_hits == 0) return fallback.value_or(keyword_map.front().first);
  return keyword_map[best].first;
}

}  // namespace homnet
