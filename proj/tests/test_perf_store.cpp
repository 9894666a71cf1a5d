#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "metaood/perf_store.hpp"
#include "metaood/rank.hpp"
#include "support.hpp"

using namespace metaood;
using testing_support::fixture;
using testing_support::scratch;

namespace {

const PerformanceMatrix& table_b() {
  static const PerformanceMatrix m = load_performance_matrix(fixture("table_b.csv"));
  return m;
}

// Brute-force descending midrank: 1 + #greater + (#equal - 1) / 2.
double brute_rank(std::span<const double> row, std::size_t j) {
  double greater = 0, equal = 0;
  for (double v : row) {
    if (std::isnan(v)) continue;
    if (v > row[j]) greater += 1;
    if (v == row[j]) equal += 1;
  }
  return 1.0 + greater + (equal - 1.0) / 2.0;
}

PerformanceMatrix from_text(const std::string& text, const std::string& name = "m.csv") {
  const auto dir = scratch("perf-" + name);
  csv::write_text(dir / name, text);
  return load_performance_matrix(dir / name);
}

}  // namespace

TEST(TableB, ShapeAndGroups) {
  const auto& m = table_b();
  EXPECT_EQ(m.rows(), 46u);
  EXPECT_EQ(m.cols(), 11u);
  EXPECT_EQ(m.non_missing_count(), 46u * 11u);
  EXPECT_EQ(m.id_datasets().size(), 4u);
  EXPECT_EQ(m.ood_datasets().size(), 12u);
}

TEST(TableB, PublishedCells) {
  const auto& m = table_b();
  EXPECT_EQ(m.lookup("CIFAR-10", "CIFAR-100", "Openmax"), 90.68);
  EXPECT_EQ(m.lookup("FashionMNIST", "CIFAR-10", "Mahalanobis"), 99.46);
  EXPECT_EQ(m.lookup("FashionMNIST", "SVHN", "Mahalanobis"), 99.90);
  EXPECT_EQ(m.lookup("CIFAR-10", "iNaturalist", "ODIN"), 50.47);
  EXPECT_EQ(m.lookup("CIFAR-10", "MNIST", "EnergyBased"), 97.45);
}

TEST(TableB, DiagonalIsMissing) {
  const auto& m = table_b();
  EXPECT_FALSE(m.lookup("CIFAR-10", "CIFAR-10", "Openmax").has_value());
  EXPECT_FALSE(m.lookup("CIFAR-100", "CIFAR-100", "KNN").has_value());
  EXPECT_THROW(m.lookup("Nope", "CIFAR-10", "Openmax"), ValidationError);
  EXPECT_THROW(m.lookup("CIFAR-10", "CIFAR-100", "Foo"), ValidationError);
}

TEST(TableB, LoadsFast) {
  const auto start = std::chrono::steady_clock::now();
  (void)load_performance_matrix(fixture("table_b.csv"));
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 1.0);
}

TEST(Catalog, FixtureMatchesMatrix) {
  const auto c = load_catalog(fixture("catalog.json"));
  EXPECT_EQ(c.size(), 11u);
  EXPECT_TRUE(c.same_names(table_b().catalog()));
  EXPECT_EQ(c.name(0), "Openmax");
  for (std::size_t j = 0; j < c.size(); ++j) EXPECT_FALSE(c[j].description.empty());
}

TEST(Catalog, RejectsDuplicates) {
  EXPECT_THROW(ModelCatalog::from_names({"A", "B", "A"}), ValidationError);
}

TEST(Matrix, RoundTrip) {
  const auto dir = scratch("perf-roundtrip");
  save_performance_matrix(table_b(), dir / "out.csv");
  EXPECT_EQ(load_performance_matrix(dir / "out.csv"), table_b());
}

TEST(Matrix, RejectsOutOfRange) {
  try {
    from_text("id_dataset,ood_dataset,A,B\nX,Y,10,101\n", "range.csv");
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("B"), std::string::npos) << msg;
  }
}

TEST(Matrix, RejectsDuplicateRowsAndBadCells) {
  EXPECT_THROW(from_text("id_dataset,ood_dataset,A\nX,Y,1\nX,Y,2\n", "dup.csv"), ValidationError);
  EXPECT_THROW(from_text("id_dataset,ood_dataset,A\nX,Y,abc\n", "nan.csv"), ValidationError);
  EXPECT_THROW(from_text("id_dataset,ood_dataset,A\nX,Y,1,2\n", "wide.csv"), ValidationError);
  EXPECT_THROW(from_text("id,ood,A\nX,Y,1\n", "hdr.csv"), ValidationError);
  EXPECT_THROW(from_text("id_dataset,ood_dataset,A\nX,X,1\n", "self.csv"), ValidationError);
}

TEST(Matrix, EmptyCellIsMissing) {
  const auto m = from_text("id_dataset,ood_dataset,A,B\nX,Y,,40\n", "missing.csv");
  EXPECT_FALSE(m.value(0, 0).has_value());
  EXPECT_EQ(m.value(0, 1), 40.0);
}

TEST(Split, DefaultCounts) {
  const auto s = load_split(fixture("split_default.json"), table_b());
  EXPECT_EQ(s.train.size(), 26u);
  EXPECT_EQ(s.test.size(), 20u);
  const std::set<std::string> classic{"CIFAR-10", "CIFAR-100", "MNIST", "Places365", "SVHN", "Texture", "TIN"};
  for (const auto& p : s.train) EXPECT_TRUE(classic.count(p.ood_dataset)) << p.str();
  for (const auto& p : s.test) EXPECT_FALSE(classic.count(p.ood_dataset)) << p.str();
}

TEST(Split, RejectsOverlapUnknownAndEmpty) {
  const nlohmann::json p = {{"id", "CIFAR-10"}, {"ood", "MNIST"}};
  const nlohmann::json q = {{"id", "CIFAR-10"}, {"ood", "SVHN"}};
  EXPECT_THROW(parse_split({{"train", {p}}, {"test", {p}}}, table_b(), "s"), ValidationError);
  EXPECT_THROW(parse_split({{"train", {p}}, {"test", nlohmann::json::array()}}, table_b(), "s"), ValidationError);
  EXPECT_THROW(parse_split({{"train", {p}}, {"test", {{{"id", "A"}, {"ood", "B"}}}}}, table_b(), "s"),
               ValidationError);
  EXPECT_NO_THROW(parse_split({{"train", {p}}, {"test", {q}}}, table_b(), "s"));
}

TEST(RankRow, FashionMnistCifar10) {
  const auto& m = table_b();
  const auto r = rank_row(m, DatasetPairId{"FashionMNIST", "CIFAR-10"});
  const auto& c = m.catalog();
  EXPECT_EQ(r[c.index_of("Mahalanobis")], 1.0);
  EXPECT_EQ(r[c.index_of("KNN")], 2.0);
  EXPECT_EQ(r[c.index_of("ViM")], 3.0);
}

TEST(RankRow, Cifar10Mnist) {
  const auto& m = table_b();
  EXPECT_EQ(rank_row(m, DatasetPairId{"CIFAR-10", "MNIST"})[m.catalog().index_of("EnergyBased")], 1.0);
}

TEST(RankRow, AllEqualRow) {
  const auto m = from_text("id_dataset,ood_dataset,A,B,C,D\nX,Y,5,5,5,5\n", "equal.csv");
  for (const auto& r : rank_row(m, 0)) EXPECT_EQ(r, 2.5);
}

TEST(RankRow, MatchesBruteForceOnEveryRow) {
  const auto& m = table_b();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = rank_row(m, i);
    double sum = 0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      ASSERT_TRUE(r[j].has_value());
      EXPECT_EQ(*r[j], brute_rank(m.row(i), j));
      sum += *r[j];
    }
    EXPECT_EQ(sum, 11.0 * 12.0 / 2.0);
  }
}

TEST(RankRow, MissingCellsExcluded) {
  const auto m = from_text("id_dataset,ood_dataset,A,B,C\nX,Y,10,,30\n", "rmiss.csv");
  const auto r = rank_row(m, 0);
  EXPECT_EQ(r[0], 2.0);
  EXPECT_FALSE(r[1].has_value());
  EXPECT_EQ(r[2], 1.0);
  EXPECT_THROW(rank_row(m, DatasetPairId{"Q", "Z"}), ValidationError);
}

TEST(RankRow, PropertyRandomRowsWithTies) {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 2 + rng.below(12);
    std::vector<double> v(k);
    for (auto& x : v) x = static_cast<double>(rng.below(5));  // many ties
    const auto r = midranks(v, RankOrder::descending);
    double sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      EXPECT_EQ(r[j], brute_rank(v, j));
      sum += r[j];
    }
    EXPECT_EQ(sum, static_cast<double>(k * (k + 1)) / 2.0);
    // strictly increasing transform leaves ranks unchanged
    std::vector<double> w(v);
    for (auto& x : w) x = std::exp(0.3 * x) + 7.0;
    EXPECT_EQ(midranks(w, RankOrder::descending), r);
  }
}

TEST(BestInRow, SkipsMissingAndBreaksTiesLow) {
  const double nan = std::nan("");
  const std::vector<double> row{nan, 3.0, 5.0, 5.0};
  EXPECT_EQ(best_in_row(row), 2u);
  const std::vector<double> empty{nan, nan};
  EXPECT_FALSE(best_in_row(empty).has_value());
}
