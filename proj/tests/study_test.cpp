#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "homnet/study.hpp"

namespace homnet {
namespace {

namespace fs = std::filesystem;

// An sd fit whose coefficient `column` has the given estimate and p-value;
// every other coefficient is inactive.
FitResult fixture_fit(std::size_t column, double estimate, double p, Mode mode = Mode::kSd) {
  FitResult r;
  r.layout.mode = mode;
  r.layout.feature_names = default_feature_names();
  r.coef.assign(r.layout.num_coefficients(), Coefficient{});
  auto& c = r.coef[column];
  c.active = true;
  c.estimate = estimate;
  c.p = p;
  c.se = 0.1;
  c.ci_low = estimate - kZ975 * 0.1;
  c.ci_high = estimate + kZ975 * 0.1;
  return r;
}

constexpr std::size_t kCell = 1 + 6 * 8 + 6;  // W[Left, Left]

StudyResult study_of(const std::vector<std::pair<double, double>>& slices, double alpha = 0.05) {
  std::vector<std::string> labels;
  std::vector<FitResult> fits;
  for (std::size_t s = 0; s < slices.size(); ++s) {
    labels.push_back(std::to_string(2012 + s));
    fits.push_back(fixture_fit(kCell, slices[s].first, slices[s].second));
  }
  return aggregate(labels, fits, alpha);
}

TEST(Aggregate, SingleSlice) {
  EXPECT_TRUE(study_of({{-0.4, 0.01}}).summary[kCell].robust);
  EXPECT_FALSE(study_of({{-0.4, 0.2}}).summary[kCell].robust);
  EXPECT_EQ(required_slices(1, 0.8), 1u);
}

TEST(Aggregate, FourOfFiveSameSignIsRobust) {
  const auto r = study_of({{-0.5, 0.001}, {-0.4, 0.01}, {-0.1, 0.3}, {-0.6, 0.0001}, {-0.3, 0.04}});
  EXPECT_EQ(r.summary[kCell].n_significant, 4u);
  EXPECT_TRUE(r.summary[kCell].sign_consistent);
  EXPECT_TRUE(r.summary[kCell].robust);
  EXPECT_EQ(required_slices(5, 0.8), 4u);
}

TEST(Aggregate, ThreeOfFiveIsNotRobust) {
  const auto r = study_of({{-0.5, 0.001}, {-0.4, 0.2}, {-0.1, 0.3}, {-0.6, 0.0001}, {-0.3, 0.04}});
  EXPECT_EQ(r.summary[kCell].n_significant, 3u);
  EXPECT_FALSE(r.summary[kCell].robust);
}

TEST(Aggregate, SignFlipIsNotRobust) {
  const auto r = study_of({{0.5, 0.001}, {0.4, 0.01}, {-0.2, 0.03}, {0.6, 0.0001}, {0.3, 0.04}});
  EXPECT_EQ(r.summary[kCell].n_significant, 5u);
  EXPECT_FALSE(r.summary[kCell].sign_consistent);
  EXPECT_FALSE(r.summary[kCell].robust);
}

TEST(Aggregate, InactiveSliceCountsAsNonSignificant) {
  auto r = study_of({{0.5, 0.001}, {0.4, 0.01}, {0.2, 0.03}, {0.6, 0.0001}, {0.3, 0.04}});
  EXPECT_TRUE(r.summary[kCell].robust);
  auto fits = r.fits;
  fits[1].coef[kCell].active = false;
  fits[2].coef[kCell].active = false;
  EXPECT_FALSE(aggregate(r.slice_labels, fits).summary[kCell].robust);
  // Inactive cells sit at exactly zero, which is neither sign.
  EXPECT_FALSE(r.summary[0].sign_consistent);
}

TEST(Aggregate, LoweringAlphaNeverCreatesRobustCells) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<double, double>> slices;
    const std::size_t n = 1 + rng.below(6);
    for (std::size_t s = 0; s < n; ++s) slices.emplace_back(rng.normal(), rng.uniform() * 0.1);
    bool previous = true;
    for (double alpha : {0.09, 0.05, 0.02, 0.01, 0.001}) {
      const bool robust = study_of(slices, alpha).summary[kCell].robust;
      EXPECT_TRUE(previous || !robust);
      previous = robust;
    }
  }
}

TEST(Aggregate, Errors) {
  EXPECT_THROW(aggregate({}, {}), ConfigError);
  EXPECT_THROW(aggregate({"a"}, {fixture_fit(0, 1, 0.01), fixture_fit(0, 1, 0.01)}), DimensionError);
  EXPECT_THROW(aggregate({"a", "b"}, {fixture_fit(0, 1, 0.01), fixture_fit(0, 1, 0.01, Mode::kSdt)}),
               DimensionError);
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("homnet_study_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::size_t data_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  std::getline(in, line);  // header
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

TEST(EmitTables, RowCounts) {
  std::vector<std::string> labels;
  std::vector<FitResult> sd, sdt;
  for (int s = 0; s < 5; ++s) {
    labels.push_back("y" + std::to_string(s));
    sd.push_back(fixture_fit(kCell, 0.2, 0.01));
    auto f = fixture_fit(kCell, 0.2, 0.01, Mode::kSdt);
    f.layout.topics = TopicIndex(default_topics());
    f.coef.resize(f.layout.num_coefficients());
    sdt.push_back(f);
  }
  const auto dir = scratch("rows");
  emit_tables(aggregate(labels, sd), dir / "sd");
  EXPECT_EQ(data_rows(dir / "sd" / "w_matrix.csv"), 5u * 64u);
  EXPECT_EQ(data_rows(dir / "sd" / "diag.csv"), 5u * 4u * 4u);
  EXPECT_FALSE(fs::exists(dir / "sd" / "q_matrix.csv"));
  emit_tables(aggregate(labels, sdt), dir / "sdt");
  EXPECT_EQ(data_rows(dir / "sdt" / "q_matrix.csv"), 5u * 8u * 15u);
}

TEST(EmitTables, EmptyResultWritesNothing) {
  const auto dir = scratch("empty");
  EXPECT_THROW(emit_tables(StudyResult{}, dir), ConfigError);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(EmitTables, AggregationReproducesFromFitJson) {
  const auto r = study_of({{0.5, 0.001}, {0.4, 0.01}, {-0.2, 0.03}, {0.6, 0.0001}, {0.3, 0.04}});
  const auto dir = scratch("json");
  emit_tables(r, dir);
  std::vector<FitResult> reread;
  for (const auto& label : r.slice_labels) {
    std::ifstream in(dir / ("fit_" + label + ".json"));
    reread.push_back(fit_from_json(nlohmann::json::parse(in)));
  }
  const auto again = aggregate(r.slice_labels, reread);
  for (std::size_t j = 0; j < r.summary.size(); ++j) {
    EXPECT_EQ(again.summary[j].n_significant, r.summary[j].n_significant);
    EXPECT_EQ(again.summary[j].sign_consistent, r.summary[j].sign_consistent);
    EXPECT_EQ(again.summary[j].robust, r.summary[j].robust);
  }
}

TEST(StudyConfig, ParsesSlicesAndResolvesPaths) {
  std::istringstream in(
      "# demo\nmode = \"sdt\"\nq = 0.2\nseed = 3\nscores = \"s.csv\"\ntopics = [\"Crime\", \"Tech\"]\n"
      "\n[[slice]]\nlabel = \"2015\"\nposts = \"p.tsv\"\ncomments = \"/abs/c.tsv\"\nactivity = \"a.tsv\"\n");
  const auto c = parse_study_config(in, "/base");
  EXPECT_EQ(c.mode, Mode::kSdt);
  EXPECT_DOUBLE_EQ(c.q, 0.2);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.topics, (std::vector<TopicId>{"Crime", "Tech"}));
  ASSERT_EQ(c.slices.size(), 1u);
  EXPECT_EQ(c.slices[0].posts, fs::path("/base/p.tsv"));
  EXPECT_EQ(c.slices[0].comments, fs::path("/abs/c.tsv"));
  EXPECT_EQ(c.scores, fs::path("/base/s.csv"));
}

TEST(StudyConfig, Errors) {
  std::istringstream none("scores = \"s.csv\"\n");
  EXPECT_THROW(parse_study_config(none), ConfigError);
  std::istringstream unknown("colour = 3\n");
  EXPECT_THROW(parse_study_config(unknown), ParseError);
  std::istringstream partial("scores = \"s.csv\"\n[[slice]]\nlabel = \"x\"\n");
  EXPECT_THROW(parse_study_config(partial), ConfigError);
}

StudyConfig sample_config() {
  const fs::path dir = HOMNET_SAMPLES_DIR;
  std::ifstream in(dir / "study.cfg");
  return parse_study_config(in, dir);
}

TEST(RunStudy, SampleForumEndToEnd) {
  const auto c = sample_config();
  const auto r = run_study(c);
  ASSERT_EQ(r.fits.size(), 3u);
  EXPECT_EQ(r.slice_labels, (std::vector<std::string>{"2014", "2015", "2016"}));
  for (const auto& d : r.diagnostics) {
    EXPECT_EQ(d.n_nodes, 90u);  // bots and the lurker are gone
    EXPECT_EQ(d.n_examples % 2, 0u);
  }
  for (const auto& f : r.fits) {
    EXPECT_TRUE(f.converged);
    EXPECT_EQ(f.mode(), Mode::kSdt);
  }
  // Same config, same answer.
  const auto again = run_study(c);
  for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(again.fits[s].theta(), r.fits[s].theta());
}

TEST(RunStudy, FailingSliceIsNamed) {
  auto c = sample_config();
  c.slices[1].comments = "/nonexistent/comments.tsv";
  try {
    run_study(c);
    FAIL() << "expected a slice error";
  } catch (const SliceError& e) {
    EXPECT_EQ(e.slice(), "2015");
    EXPECT_NE(std::string(e.what()).find("2015"), std::string::npos);
  }
}

}  // namespace
}  // namespace homnet
