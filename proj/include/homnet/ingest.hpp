#pragma once

// Event-dump parsing, user selection and reply-graph construction.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "homnet/error.hpp"
#include "homnet/text.hpp"
#include "homnet/topics.hpp"

namespace homnet {

using UserId = std::string;

struct Post {
  std::string post_id;
  UserId author;
  std::optional<TopicId> topic;
  std::string title;
};

struct Comment {
  std::string comment_id;
  std::string post_id;
  std::string parent_id;  // a post_id or a comment_id
  UserId author;
};

struct EventLog {
  std::vector<Post> posts;
  std::vector<Comment> comments;
  std::string slice_label;
};

enum class EventFormat { kPost, kComment };

struct ActivityRow {
  UserId user;
  std::string subreddit;
  std::uint64_t n_submissions = 0;
};

using ActivityTable = std::vector<ActivityRow>;

enum class ExclusionReason {
  kLowActivity,
  kFewSubreddits,
  kBotName,
  kBotList,
  kPostOnly,
  kTooManySubreddits,
};

inline std::string_view to_string(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::kLowActivity: return "low_activity";
    case ExclusionReason::kFewSubreddits: return "few_subreddits";
    case ExclusionReason::kBotName: return "bot_name";
    case ExclusionReason::kBotList: return "bot_list";
    case ExclusionReason::kPostOnly: return "post_only";
    case ExclusionReason::kTooManySubreddits: return "too_many_subreddits";
  }
  return "unknown";
}

struct UserSet {
  std::set<UserId> selected;
  std::map<UserId, ExclusionReason> exclusion_reasons;
  // The per-month subreddit rule was evaluated as distinct/months because the
  // activity table carries no monthly breakdown.
  bool monthly_rule_approximated = false;
};

struct SelectionOptions {
  std::uint64_t min_messages = 25;
  std::uint64_t min_subreddits = 5;
  std::uint64_t max_subreddits_per_month = 50;
  std::uint64_t months_in_slice = 12;
  std::unordered_set<UserId> bot_list;
};

// Per-topic reply counts of one arc.
using TopicCounts = std::map<TopicId, std::uint64_t>;
using Arc = std::pair<UserId, UserId>;

// Where each comment of the log ended up. The four tallies sum to
// total_comments.
struct BuildReport {
  std::uint64_t total_comments = 0;
  std::uint64_t contributing = 0;
  std::uint64_t skipped_unresolved = 0;
  std::uint64_t self_loops = 0;
  std::uint64_t unselected_endpoint = 0;
  std::uint64_t posts_topic_assigned = 0;
};

struct InteractionGraph {
  std::string slice_label;
  std::set<UserId> nodes;
  std::map<Arc, TopicCounts> arcs;
  BuildReport report;
  bool monthly_rule_approximated = false;

  std::uint64_t reply_events() const {
    std::uint64_t n = 0;
    for (const auto& [arc, counts] : arcs)
      for (const auto& [t, c] : counts) n += c;
    return n;
  }
};

namespace detail {

inline bool contains_bot(std::string_view name) {
  return lower(name).find("bot") != std::string::npos;
}

}  // namespace detail

// Appends the rows of a posts.tsv or comments.tsv stream to `log`. Blank lines
// are ignored. Row order is preserved.
inline void parse_events_into(EventLog& log, std::istream& in, EventFormat format) {
  std::unordered_set<std::string> seen;
  if (format == EventFormat::kPost) {
    for (const auto& p : log.posts) seen.insert(p.post_id);
  } else {
    for (const auto& c : log.comments) seen.insert(c.comment_id);
  }

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::chomp(raw);
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_tabs(line, 4);
    if (fields.size() != 4) {
      throw ParseError("expected 4 tab-separated fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    const std::size_t required = format == EventFormat::kPost ? 3 : 4;  // post title may be empty
    for (std::size_t i = 0; i < required; ++i) {
      if (fields[i].empty()) {
        throw ParseError("field " + std::to_string(i + 1) + " is empty", line_no);
      }
    }
    if (format == EventFormat::kPost) {
      Post post{std::string(fields[0]), std::string(fields[1]), std::nullopt, std::string(fields[3])};
      if (fields[2] != kNoTopic) post.topic = std::string(fields[2]);
      if (!seen.insert(post.post_id).second) {
        throw DuplicateError("duplicate post_id '" + post.post_id + "'", line_no);
      }
      log.posts.push_back(std::move(post));
    } else {
      Comment c{std::string(fields[0]), std::string(fields[1]), std::string(fields[2]),
                std::string(fields[3])};
      if (!seen.insert(c.comment_id).second) {
        throw DuplicateError("duplicate comment_id '" + c.comment_id + "'", line_no);
      }
      log.comments.push_back(std::move(c));
    }
  }
}

inline EventLog parse_events(std::istream& in, EventFormat format, std::string slice_label = {}) {
  EventLog log;
  log.slice_label = std::move(slice_label);
  parse_events_into(log, in, format);
  return log;
}

// Comments whose post_id names no post in the log.
inline std::vector<std::size_t> orphan_comments(const EventLog& log) {
  std::unordered_set<std::string_view> posts;
  for (const auto& p : log.posts) posts.insert(p.post_id);
  std::vector<std::size_t> orphans;
  for (std::size_t i = 0; i < log.comments.size(); ++i) {
    if (!posts.contains(log.comments[i].post_id)) orphans.push_back(i);
  }
  return orphans;
}

inline ActivityTable parse_activity(std::istream& in) {
  ActivityTable table;
  std::set<std::pair<std::string, std::string>> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::chomp(raw);
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_tabs(line, 3);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("expected user<TAB>subreddit<TAB>n_submissions", line_no);
    }
    ActivityRow row{std::string(fields[0]), std::string(fields[1]),
                    detail::parse_count(fields[2], line_no)};
    if (!seen.emplace(row.user, row.subreddit).second) {
      throw DuplicateError("duplicate (user, subreddit) pair (" + row.user + ", " +
                               row.subreddit + ")",
                           line_no);
    }
    table.push_back(std::move(row));
  }
  return table;
}

inline std::unordered_set<UserId> parse_botlist(std::istream& in) {
  std::unordered_set<UserId> bots;
  std::string raw;
  while (std::getline(in, raw)) {
    const auto name = detail::trim(raw);
    if (!name.empty()) bots.emplace(name);
  }
  return bots;
}

// Applies the activity thresholds and the four bot rules to every author in
// the log. Each excluded user gets the first matching reason, checking bot
// rules before the activity thresholds.
inline UserSet select_users(const EventLog& log, const ActivityTable& activity,
                            const SelectionOptions& opt = {}) {
  if (opt.min_messages == 0 || opt.min_subreddits == 0 || opt.max_subreddits_per_month == 0 ||
      opt.months_in_slice == 0) {
    throw ConfigError("selection thresholds must be positive");
  }

  struct Tally {
    std::uint64_t posts = 0;
    std::uint64_t comments = 0;
    std::uint64_t subreddits = 0;
  };
  std::map<UserId, Tally> users;
  for (const auto& p : log.posts) ++users[p.author].posts;
  for (const auto& c : log.comments) ++users[c.author].comments;

  std::unordered_map<std::string_view, std::uint64_t> subreddits;
  for (const auto& row : activity) {
    if (row.n_submissions > 0) ++subreddits[row.user];
  }

  UserSet out;
  out.monthly_rule_approximated = true;
  for (auto& [user, tally] : users) {
    auto it = subreddits.find(user);
    const std::uint64_t n_sub = it == subreddits.end() ? 0 : it->second;

    std::optional<ExclusionReason> reason;
    if (detail::contains_bot(user)) {
      reason = ExclusionReason::kBotName;
    } else if (opt.bot_list.contains(user)) {
      reason = ExclusionReason::kBotList;
    } else if (tally.posts > 0 && tally.comments == 0) {
      reason = ExclusionReason::kPostOnly;
    } else if (n_sub > opt.max_subreddits_per_month * opt.months_in_slice) {
      // distinct / months > max  <=>  distinct > max * months
      reason = ExclusionReason::kTooManySubreddits;
    } else if (tally.posts + tally.comments < opt.min_messages) {
      reason = ExclusionReason::kLowActivity;
    } else if (n_sub < opt.min_subreddits) {
      reason = ExclusionReason::kFewSubreddits;
    }

    if (reason) {
      out.exclusion_reasons.emplace(user, *reason);
    } else {
      out.selected.insert(user);
    }
  }
  return out;
}

// Builds u -> v arcs for replies between distinct selected users, counted per
// topic of the enclosing post. Posts without a topic label are tagged with
// the keyword baseline.
inline InteractionGraph build_graph(const EventLog& log, const UserSet& users,
                                    const KeywordMap& keywords = default_keyword_map()) {
  InteractionGraph g;
  g.slice_label = log.slice_label;
  g.nodes = users.selected;
  g.monthly_rule_approximated = users.monthly_rule_approximated;

  // Two-pass parent index: posts first, then comments.
  std::unordered_map<std::string_view, const Post*> post_by_id;
  for (const auto& p : log.posts) post_by_id.emplace(p.post_id, &p);
  std::unordered_map<std::string_view, std::string_view> author_by_id;
  for (const auto& p : log.posts) author_by_id.emplace(p.post_id, p.author);
  for (const auto& c : log.comments) author_by_id.emplace(c.comment_id, c.author);

  std::unordered_map<std::string_view, TopicId> topic_of_post;
  for (const auto& p : log.posts) {
    if (p.topic) {
      topic_of_post.emplace(p.post_id, *p.topic);
    } else {
      topic_of_post.emplace(p.post_id, assign_topic_baseline(p.title, keywords));
      ++g.report.posts_topic_assigned;
    }
  }

  auto& r = g.report;
  r.total_comments = log.comments.size();
  for (const auto& c : log.comments) {
    auto parent = author_by_id.find(c.parent_id);
    auto topic = topic_of_post.find(c.post_id);
    if (parent == author_by_id.end() || topic == topic_of_post.end()) {
      ++r.skipped_unresolved;
      continue;
    }
    const auto& u = c.author;
    const auto v = parent->second;
    if (u == v) {
      ++r.self_loops;
      continue;
    }
    if (!users.selected.contains(u) || !users.selected.contains(std::string(v))) {
      ++r.unselected_endpoint;
      continue;
    }
    ++g.arcs[{u, std::string(v)}][topic->second];
    ++r.contributing;
  }
  return g;
}

inline nlohmann::json graph_to_json(const InteractionGraph& g) {
  using nlohmann::json;
  json arcs = json::array();
  for (const auto& [arc, counts] : g.arcs) {
    json c = json::object();
    for (const auto& [t, n] : counts) c[t] = n;
    arcs.push_back({{"u", arc.first}, {"v", arc.second}, {"counts", c}});
  }
  const auto& r = g.report;
  return {
      {"slice", g.slice_label},
      {"nodes", json(std::vector<UserId>(g.nodes.begin(), g.nodes.end()))},
      {"arcs", arcs},
      {"report",
       {{"n_nodes", g.nodes.size()},
        {"n_arcs", g.arcs.size()},
        {"n_reply_events", g.reply_events()},
        {"total_comments", r.total_comments},
        {"contributing", r.contributing},
        {"skipped_unresolved", r.skipped_unresolved},
        {"self_loops", r.self_loops},
        {"unselected_endpoint", r.unselected_endpoint},
        {"posts_topic_assigned", r.posts_topic_assigned},
        {"monthly_rule_approximated", g.monthly_rule_approximated}}},
  };
}

inline InteractionGraph graph_from_json(const nlohmann::json& j) {
  InteractionGraph g;
  try {
    g.slice_label = j.value("slice", std::string{});
    for (const auto& n : j.at("nodes")) g.nodes.insert(n.get<std::string>());
    for (const auto& a : j.at("arcs")) {
      Arc arc{a.at("u").get<std::string>(), a.at("v").get<std::string>()};
      if (arc.first == arc.second) throw ParseError("self-loop arc for " + arc.first, 0);
      if (!g.nodes.contains(arc.first) || !g.nodes.contains(arc.second)) {
        throw ParseError("arc endpoint not among nodes: " + arc.first + " -> " + arc.second, 0);
      }
      auto& counts = g.arcs[arc];
      for (const auto& [t, n] : a.at("counts").items()) {
        const auto c = n.get<std::uint64_t>();
        if (c == 0) throw ParseError("zero topic count on arc " + arc.first + " -> " + arc.second, 0);
        counts[t] = c;
      }
      if (counts.empty()) throw ParseError("arc without counts: " + arc.first + " -> " + arc.second, 0);
    }
    if (j.contains("report")) {
      const auto& r = j.at("report");
      g.report.total_comments = r.value("total_comments", std::uint64_t{0});
      g.report.contributing = r.value("contributing", std::uint64_t{0});
      g.report.skipped_unresolved = r.value("skipped_unresolved", std::uint64_t{0});
      g.report.self_loops = r.value("self_loops", std::uint64_t{0});
      g.report.unselected_endpoint = r.value("unselected_endpoint", std::uint64_t{0});
      g.report.posts_topic_assigned = r.value("posts_topic_assigned", std::uint64_t{0});
      g.monthly_rule_approximated = r.value("monthly_rule_approximated", false);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed graph json: ") + e.what(), 0);
  }
  return g;
}

}  // namespace homnet
