#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <string>

#include <doctest.h>

#include "cn/csv.hpp"
#include "cn/dataset.hpp"
#include "cn/errors.hpp"
#include "cn/rng.hpp"

using namespace cn;

namespace {

struct TempFile {
  std::string path;

  explicit TempFile(const std::string& name) {
    path = std::string("/tmp/cn_test_") + std::to_string(::getpid()) + "_" + name;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  RandomStream rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = rng.normal(1.5, 2.0);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("standardization uses training statistics only") {
  const Matrix x = random_matrix(1000, 3, 1);
  const Matrix y = random_matrix(1000, 1, 2);
  const LabeledDataset data = LabeledDataset::standardized(x, y, 0.7, 99);

  CHECK(data.train_rows.size() == 700);
  CHECK(data.test_rows.size() == 300);

  const Matrix xt = data.train_features();
  const Matrix yt = data.train_outcomes();
  for (Eigen::Index c = 0; c < xt.cols(); ++c) {
    CHECK(std::abs(xt.col(c).mean()) < 1e-9);
    const double sd = std::sqrt((xt.col(c).array() - xt.col(c).mean()).square().sum() /
                                static_cast<double>(xt.rows() - 1));
    CHECK(sd == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(std::abs(yt.col(0).mean()) < 1e-9);

  // Test rows share the transform, so their moments drift from (0, 1).
  const Matrix xs = data.test_features();
  CHECK(std::abs(xs.col(0).mean()) > 1e-12);

  // Round trip back to raw units.
  const Matrix back = data.destandardize_features(data.features);
  CHECK((back - x).cwiseAbs().maxCoeff() < 1e-10);
  const Matrix yback = data.destandardize_outcomes(data.outcomes);
  CHECK((yback - y).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("split is a seeded permutation") {
  const Matrix x = random_matrix(40, 2, 3);
  const Matrix y = random_matrix(40, 1, 4);
  const LabeledDataset a = LabeledDataset::standardized(x, y, 0.5, 7);
  const LabeledDataset b = LabeledDataset::standardized(x, y, 0.5, 7);
  const LabeledDataset c = LabeledDataset::standardized(x, y, 0.5, 8);
  CHECK(a.train_rows == b.train_rows);
  CHECK(a.test_rows == b.test_rows);
  CHECK(a.train_rows != c.train_rows);

  // Partition: every row appears exactly once.
  std::vector<int> seen(40, 0);
  for (auto r : a.train_rows) seen[static_cast<std::size_t>(r)]++;
  for (auto r : a.test_rows) seen[static_cast<std::size_t>(r)]++;
  for (int s : seen) CHECK(s == 1);
}

TEST_CASE("degenerate columns") {
  Matrix x = random_matrix(20, 2, 5);
  Matrix y = random_matrix(20, 1, 6);

  SUBCASE("constant outcome is rejected") {
    y.col(0).setConstant(3.0);
    CHECK_THROWS_AS(LabeledDataset::standardized(x, y, 0.5, 1), DataError);
  }

  SUBCASE("constant feature standardizes to zeros") {
    x.col(1).setConstant(-2.0);
    const LabeledDataset data = LabeledDataset::standardized(x, y, 0.5, 1);
    CHECK(data.features.col(1).cwiseAbs().maxCoeff() == 0.0);
    // And maps back to the constant.
    const Matrix back = data.destandardize_features(data.features);
    CHECK(back.col(1).isApproxToConstant(-2.0));
  }
}

TEST_CASE("presplit validates its indices") {
  const Matrix x = random_matrix(10, 2, 7);
  const Matrix y = random_matrix(10, 1, 8);
  CHECK_NOTHROW(LabeledDataset::standardized_presplit(x, y, {0, 1, 2, 3, 4}, {5, 6, 7}));
  CHECK_THROWS_AS(LabeledDataset::standardized_presplit(x, y, {0, 1, 12}, {2}), DataError);
  CHECK_THROWS_AS(LabeledDataset::standardized_presplit(x, y, {0, 1, 1}, {2}), DataError);
  CHECK_THROWS_AS(LabeledDataset::standardized_presplit(x, y, {0, 1}, {1, 2}), DataError);
}

TEST_CASE("dataset csv round trip") {
  TempFile file("roundtrip.csv");
  const Matrix x = random_matrix(25, 3, 9);
  const Matrix y = random_matrix(25, 2, 10);
  csv::write_dataset(file.path, x, y);

  const csv::DatasetFile read = csv::read_dataset(file.path);
  CHECK(read.features.rows() == 25);
  CHECK(read.features.cols() == 3);
  CHECK(read.outcomes.cols() == 2);
  CHECK((read.features - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((read.outcomes - y).cwiseAbs().maxCoeff() == 0.0);

  // Emitted tables re-read through the generic path too.
  const csv::Table table = csv::read_table(file.path);
  CHECK(table.header == std::vector<std::string>{"x_1", "x_2", "x_3", "y_1", "y_2"});
  CHECK(table.rows.size() == 25);
}

TEST_CASE("dataset csv schema errors carry locations") {
  TempFile file("schema.csv");

  SUBCASE("bad header") {
    std::ofstream(file.path) << "a,b,c\n1,2,3\n";
    CHECK_THROWS_AS(csv::read_dataset(file.path), DataError);
  }

  SUBCASE("ragged row") {
    std::ofstream(file.path) << "x_1,y\n1,2\n3\n";
    CHECK_THROWS_AS(csv::read_dataset(file.path), DataError);
  }

  SUBCASE("non-numeric cell names row and column") {
    std::ofstream(file.path) << "x_1,y\n1,2\n3,oops\n";
    try {
      csv::read_dataset(file.path);
      FAIL("expected a data error");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      // File rows, counting the header: the bad cell sits on row 3.
      CHECK(msg.find("row 3") != std::string::npos);
      CHECK(msg.find("column 2") != std::string::npos);
    }
  }

  SUBCASE("non-finite cell is rejected") {
    std::ofstream(file.path) << "x_1,y\n1,nan\n";
    CHECK_THROWS_AS(csv::read_dataset(file.path), DataError);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(csv::read_dataset("/nonexistent/nope.csv"), IoError);
  }

  SUBCASE("empty outcome block") {
    std::ofstream(file.path) << "x_1,x_2\n1,2\n";
    CHECK_THROWS_AS(csv::read_dataset(file.path), DataError);
  }
}

TEST_CASE("format_double round trips exactly") {
  for (double v : {0.0, -1.5, 3.141592653589793, 1e-300, -2.2250738585072014e-308,
                   123456789.123456789, 0.1}) {
    const std::string s = csv::format_double(v);
    CHECK(csv::parse_double(s, "test") == v);
  }
  CHECK_THROWS_AS(csv::parse_double("1.2.3", "test"), DataError);
  CHECK_THROWS_AS(csv::parse_double("", "test"), DataError);
  CHECK_THROWS_AS(csv::parse_double("inf", "test"), DataError);
}

TEST_CASE("atomic table write replaces the previous content") {
  TempFile file("atomic.csv");
  csv::Table first;
  first.header = {"a"};
  first.rows = {{"1"}};
  csv::write_table(file.path, first);

  csv::Table second;
  second.header = {"a", "b"};
  second.rows = {{"2", "3"}};
  csv::write_table(file.path, second);

  const csv::Table got = csv::read_table(file.path);
  CHECK(got.header == second.header);
  CHECK(got.rows == second.rows);
}
