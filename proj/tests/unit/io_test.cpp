#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rwad/io.hpp"

namespace rwad {
namespace {

namespace fs = std::filesystem;

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("rwad_io_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  fs::path dir_;
};

TEST_F(IoTest, ThreeByTwoFeatureCsv) {
  const auto path = write("x.csv", "a,b\n1,2\n3,4.5\n-1,0\n");
  const LoadedFeatures f = load_feature_csv(path);
  EXPECT_EQ(f.features.rows(), 3);
  EXPECT_EQ(f.features.cols(), 2);
  EXPECT_DOUBLE_EQ(f.features.values()(1, 1), 4.5);
  EXPECT_EQ(f.columns, (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(f.labels.empty());
  EXPECT_EQ(f.features.kind(0), FeatureKind::continuous);
}

TEST_F(IoTest, LabelColumnIsSeparated) {
  const auto path = write("x.csv", "a,Label,b\n1,0,2\n3,1,4\n");
  const LoadedFeatures f = load_feature_csv(path);
  EXPECT_EQ(f.features.cols(), 2);
  EXPECT_EQ(f.labels, (std::vector<bool>{false, true}));
  EXPECT_DOUBLE_EQ(f.features.values()(1, 1), 4.0);
}

TEST_F(IoTest, NonNumericCellNamesLineAndColumn) {
  const auto path = write("x.csv", "a,b\n1,2\n3,oops\n");
  try {
    load_feature_csv(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.column(), 2u);
    EXPECT_NE(std::string(e.what()).find("line 3, column 2"), std::string::npos);
  }
}

TEST_F(IoTest, RaggedRowIsParseError) {
  const auto path = write("x.csv", "a,b\n1,2\n3\n");
  EXPECT_THROW(load_feature_csv(path), ParseError);
}

TEST_F(IoTest, MissingFileIsDataError) { EXPECT_THROW(load_feature_csv((dir_ / "nope.csv").string()), DataError); }

TEST_F(IoTest, DiscreteSidecarByNameAndIndex) {
  const auto path = write("x.csv", "a,b,c\n1,2,3\n4,5,6\n");
  write("x.csv.discrete", "c\n0\n");
  const LoadedFeatures f = load_feature_csv(path);
  EXPECT_EQ(f.features.kind(0), FeatureKind::discrete);
  EXPECT_EQ(f.features.kind(1), FeatureKind::continuous);
  EXPECT_EQ(f.features.kind(2), FeatureKind::discrete);
}

TEST_F(IoTest, DiscreteColumnWithFractionRejected) {
  const auto path = write("x.csv", "a,b\n1,2.5\n4,5\n");
  write("x.csv.discrete", "b\n");
  EXPECT_THROW(load_feature_csv(path), ParseError);
}

TEST_F(IoTest, ExplicitSidecarMustExist) {
  const auto path = write("x.csv", "a\n1\n2\n");
  EXPECT_THROW(load_feature_csv(path, (dir_ / "missing").string()), DataError);
  EXPECT_NO_THROW(load_feature_csv(path, std::string()));
}

TEST_F(IoTest, EdgeListWithDuplicatesWarns) {
  const auto path = write("e.csv", "u,v\n0,1\n1,2\n0,1\n2,0\n");
  const LoadedBipartite b = load_bipartite_edges(path);
  EXPECT_EQ(b.graph.u_size(), 3);
  EXPECT_EQ(b.graph.v_size(), 3);
  EXPECT_EQ(b.graph.edges().sum(), 3.0);
  ASSERT_EQ(b.warnings.size(), 1u);
  EXPECT_NE(b.warnings[0].find("line 4"), std::string::npos);
}

TEST_F(IoTest, EdgeListDeclaredSizes) {
  const auto path = write("e.csv", "u,v\n0,1\n");
  const LoadedBipartite b = load_bipartite_edges(path, 4, 5);
  EXPECT_EQ(b.graph.u_size(), 4);
  EXPECT_EQ(b.graph.v_size(), 5);
  EXPECT_THROW(load_bipartite_edges(path, 1, 1), DimensionMismatch);
}

TEST_F(IoTest, EdgeListRejectsNegativeAndFractional) {
  EXPECT_THROW(load_bipartite_edges(write("a.csv", "u,v\n0,-1\n")), ParseError);
  EXPECT_THROW(load_bipartite_edges(write("b.csv", "u,v\n0,1.5\n")), ParseError);
  EXPECT_THROW(load_bipartite_edges(write("c.csv", "u,v\n0,1,2\n")), ParseError);
}

TEST_F(IoTest, NodeLabels) {
  const auto path = write("l.csv", "node\n2\n0\n");
  EXPECT_EQ(load_node_labels(path, 4), (std::vector<bool>{true, false, true, false}));
  EXPECT_THROW(load_node_labels(path, 2), ParseError);
}

TEST_F(IoTest, BipartiteRoundTrip) {
  Matrix m = Matrix::Zero(2, 3);
  m(0, 2) = m(1, 0) = m(1, 1) = 1.0;
  const BipartiteGraph bg(m);
  std::ostringstream out;
  write_bipartite_edges(out, bg);
  const LoadedBipartite back = load_bipartite_edges(write("e.csv", out.str()), 2, 3);
  EXPECT_EQ(back.graph.edges(), m);
}

TEST_F(IoTest, FeatureRoundTripKeepsDoubles) {
  RowMatrix x(2, 2);
  x << 0.1, 1.0 / 3.0, -2.5e-7, 12345.678901234567;
  std::ostringstream out;
  write_feature_csv(out, FeatureMatrix(x), {"p", "q"});
  const LoadedFeatures back = load_feature_csv(write("x.csv", out.str()));
  EXPECT_EQ(back.features.values(), x);
}

TEST(ScoresCsv, FlagColumns) {
  AnomalyScores s{Vector::LinSpaced(20, 0.0, 1.0), ModelKind::prox};
  std::ostringstream out;
  write_scores_csv(out, s);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "node,score,flagged_5,flagged_10");
  int f5 = 0, f10 = 0, rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    f5 += line[line.size() - 3] == '1';
    f10 += line.back() == '1';
  }
  EXPECT_EQ(rows, 20);
  EXPECT_EQ(f5, 1);
  EXPECT_EQ(f10, 2);
}

}  // namespace
}  // namespace rwad
