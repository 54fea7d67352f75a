// homnet: command-line front end for the reply-network homophily toolkit.
//
//   homnet ingest   --posts F --comments F --activity F [--botlist F] --slice YEAR --out graph.json
//   homnet features --graph graph.json --activity F --scores F --q 0.25 --out features.csv
//   homnet sample   --graph graph.json --mode sd|sdt --seed N --out dataset.tsv
//   homnet fit      --dataset dataset.tsv --features features.csv --mode sd|sdt --ridge 1e-6 --out fit.json
//   homnet study    --config study.cfg --out results/
//   homnet synth    --config planted.json --out-dir synth/

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "homnet/homnet.hpp"

namespace fs = std::filesystem;
using namespace homnet;

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

nlohmann::json read_json(const std::string& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

std::vector<TopicId> topic_list(const std::string& csv) {
  if (csv.empty()) return default_topics();
  std::vector<TopicId> topics;
  for (auto t : detail::split(csv, ',')) topics.emplace_back(detail::trim(t));
  return topics;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-feature homophily inference on reply networks"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse dumps, select users and build the reply graph");
  std::string posts, comments, activity, botlist, slice, graph_out;
  SelectionOptions selection;
  ingest->add_option("--posts", posts, "posts.tsv")->required();
  ingest->add_option("--comments", comments, "comments.tsv")->required();
  ingest->add_option("--activity", activity, "activity.tsv")->required();
  ingest->add_option("--botlist", botlist, "known bot usernames, one per line");
  ingest->add_option("--slice", slice, "slice label, e.g. a year")->required();
  ingest->add_option("--min-messages", selection.min_messages)->capture_default_str();
  ingest->add_option("--min-subreddits", selection.min_subreddits)->capture_default_str();
  ingest->add_option("--max-subreddits-per-month", selection.max_subreddits_per_month)->capture_default_str();
  ingest->add_option("--months", selection.months_in_slice, "months covered by the slice")->capture_default_str();
  ingest->add_option("--out", graph_out, "graph.json")->required();

  // features
  auto* features = app.add_subcommand("features", "Project subreddit scores and binarize quartiles");
  std::string graph_in, scores_in, features_out;
  double q = 0.25;
  features->add_option("--graph", graph_in)->required();
  features->add_option("--activity", activity)->required();
  features->add_option("--scores", scores_in)->required();
  features->add_option("--q", q)->capture_default_str();
  features->add_option("--out", features_out)->required();

  // sample
  auto* sample = app.add_subcommand("sample", "Build the balanced dataset against the proclivity null");
  std::string mode_name = "sd", dataset_out;
  std::uint64_t seed = 0;
  sample->add_option("--graph", graph_in)->required();
  sample->add_option("--mode", mode_name)->check(CLI::IsMember({"sd", "sdt"}))->capture_default_str();
  sample->add_option("--seed", seed)->capture_default_str();
  sample->add_option("--out", dataset_out)->required();

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit the logit and report Wald statistics");
  std::string dataset_in, features_in, fit_out, topics_csv;
  FitOptions fit_opt;
  fit_cmd->add_option("--dataset", dataset_in)->required();
  fit_cmd->add_option("--features", features_in)->required();
  fit_cmd->add_option("--mode", mode_name)->check(CLI::IsMember({"sd", "sdt"}))->capture_default_str();
  fit_cmd->add_option("--ridge", fit_opt.ridge)->capture_default_str();
  fit_cmd->add_option("--max-iter", fit_opt.max_iter)->capture_default_str();
  fit_cmd->add_option("--topics", topics_csv, "comma-separated topic list (default: the 15 standard topics)");
  fit_cmd->add_option("--out", fit_out)->required();

  // study
  auto* study = app.add_subcommand("study", "Run every slice and aggregate significance");
  std::string config_in, out_dir;
  study->add_option("--config", config_in)->required();
  study->add_option("--out", out_dir)->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a dataset from planted coefficients");
  synth->add_option("--config", config_in)->required();
  synth->add_option("--out-dir", out_dir)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      EventLog log;
      log.slice_label = slice;
      {
        auto in = open_in(posts);
        parse_events_into(log, in, EventFormat::kPost);
      }
      {
        auto in = open_in(comments);
        parse_events_into(log, in, EventFormat::kComment);
      }
      auto act_in = open_in(activity);
      const auto table = parse_activity(act_in);
      if (!botlist.empty()) {
        auto in = open_in(botlist);
        selection.bot_list = parse_botlist(in);
      }
      const auto users = select_users(log, table, selection);
      const auto graph = build_graph(log, users);
      auto out = open_out(graph_out);
      const auto j = graph_to_json(graph);
      out << j.dump() << '\n';
      std::cout << j.at("report").dump(2) << '\n';
      std::cout << "excluded users: " << users.exclusion_reasons.size() << '\n';
    } else if (*features) {
      const auto graph = graph_from_json(read_json(graph_in));
      auto act_in = open_in(activity);
      auto sc_in = open_in(scores_in);
      const auto table = build_feature_table(graph.nodes, parse_activity(act_in), parse_scores(sc_in), q);
      auto out = open_out(features_out);
      write_features_csv(out, table);
      for (std::size_t a = 0; a < table.axis_names.size(); ++a) {
        std::cout << table.axis_names[a] << ": " << table.scored_population[a] << " scored users\n";
      }
    } else if (*sample) {
      const auto graph = graph_from_json(read_json(graph_in));
      const auto ds = build_balanced_dataset(graph, compute_proclivity(graph), parse_mode(mode_name), seed);
      validate_dataset(ds, graph);
      auto out = open_out(dataset_out);
      write_dataset_tsv(out, ds);
      auto side = open_out(dataset_out + ".json");
      const auto j = dataset_sidecar(ds);
      side << j.dump(2) << '\n';
      std::cout << j.dump(2) << '\n';
    } else if (*fit_cmd) {
      auto ds_in = open_in(dataset_in);
      auto ft_in = open_in(features_in);
      const auto ds = read_dataset_tsv(ds_in);
      const auto table = read_features_csv(ft_in);
      const auto result = fit(ds, table, parse_mode(mode_name), fit_opt, TopicIndex(topic_list(topics_csv)));
      auto out = open_out(fit_out);
      out << fit_to_json(result).dump(2) << '\n';
      std::cout << "loglik " << result.loglik << ", converged " << std::boolalpha << result.converged << " after "
                << result.n_iter << " iterations\n";
    } else if (*study) {
      auto in = open_in(config_in);
      const auto config = parse_study_config(in, fs::path(config_in).parent_path());
      const auto result = run_study(config);
      for (const auto& p : emit_tables(result, out_dir)) std::cout << "wrote " << p.string() << '\n';
    } else if (*synth) {
      const auto config = planted_config_from_json(read_json(config_in));
      const auto out = generate(config);
      const fs::path dir(out_dir);
      {
        auto f = open_out(dir / "features.csv");
        write_features_csv(f, out.features);
      }
      {
        auto f = open_out(dir / "dataset.tsv");
        write_dataset_tsv(f, out.dataset);
        auto side = open_out(dir / "dataset.tsv.json");
        auto j = dataset_sidecar(out.dataset);
        j["candidates"] = {{"positives", out.candidate_positives}, {"negatives", out.candidate_negatives}};
        side << j.dump(2) << '\n';
      }
      {
        auto f = open_out(dir / "planted.json");
        f << planted_config_to_json(config).dump(2) << '\n';
      }
      std::cout << "wrote " << out.dataset.examples.size() << " examples for " << out.features.rows.size()
                << " users to " << dir.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
