#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "cn/chain.hpp"
#include "cn/dataset.hpp"
#include "cn/errors.hpp"
#include "cn/math.hpp"
#include "cn/model.hpp"
#include "cn/rng.hpp"
#include "cn/synthetic.hpp"

using namespace cn;

namespace {

struct TempFile {
  std::string path;

  explicit TempFile(const std::string& name) {
    path = std::string("/tmp/cn_test_") + std::to_string(::getpid()) + "_" + name;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

TrainingConfig small_link_config() {
  TrainingConfig cfg;
  cfg.pretrain_iters = 300;
  cfg.joint_iters = 300;
  cfg.batch_size = 32;
  cfg.g_hidden = {16, 12};
  cfg.f_hidden = {16, 12, 8};
  cfg.seed = 55;
  return cfg;
}

LabeledDataset bivariate_data(Eigen::Index n, std::uint64_t seed) {
  const GeneratedData raw = gen_bivariate_gaussian(n, derive_seed(seed, 0));
  return LabeledDataset::standardized(raw.features, raw.outcomes, 0.7, derive_seed(seed, 1));
}

// Training is the slow part, so the natural-order chain is shared by every
// case that only queries it.
const ChainModel& toy_chain() {
  static const ChainModel chain = [] {
    ChainConfig cfg;
    cfg.link_cfg = small_link_config();
    cfg.sample_count_for_cdf = 600;
    return train_chain(bivariate_data(320, 901), cfg);
  }();
  return chain;
}

Vector bivariate_x() {
  Vector x(4);
  x << 0.3, -0.4, 1.3, 1.7;
  return x;
}

// The levels drawn inside sample_joint for draw d; position j feeds link j.
Vector draw_levels(std::uint64_t seed, Eigen::Index d, Eigen::Index m) {
  RandomStream stream(derive_seed(seed, static_cast<std::uint64_t>(d)));
  Vector u(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    u(j) = std::clamp(stream.uniform(0.0, 1.0), kProbFloor, 1.0 - kProbFloor);
  }
  return u;
}

}  // namespace

TEST_CASE("chain training builds one link per outcome with chained inputs") {
  const ChainModel& chain = toy_chain();

  CHECK(chain.links.size() == 2);
  CHECK(chain.order == std::vector<int>{0, 1});
  CHECK(chain.sample_count_for_cdf == 600);
  CHECK(chain.outcome_width() == 2);
  CHECK(chain.feature_width() == 4);

  // Link j sees the features plus the j earlier outcomes.
  CHECK(chain.links[0].feature_mean.size() == 4);
  CHECK(chain.links[1].feature_mean.size() == 5);

  // Per-link seeds branch off the chain seed so links never share streams.
  CHECK(chain.links[0].config.seed == derive_seed(55, 100));
  CHECK(chain.links[1].config.seed == derive_seed(55, 101));
  CHECK(chain.links[0].config.variant == Variant::cn_full);
  CHECK(chain.links[1].config.variant == Variant::cn_full);
}

TEST_CASE("chain training validates order, variant, and sample count") {
  const LabeledDataset data = bivariate_data(80, 17);
  ChainConfig cfg;
  cfg.link_cfg = small_link_config();

  SUBCASE("wrong order length") {
    cfg.order = {0};
    CHECK_THROWS_AS(train_chain(data, cfg), ConfigError);
  }
  SUBCASE("repeated column") {
    cfg.order = {0, 0};
    CHECK_THROWS_AS(train_chain(data, cfg), ConfigError);
  }
  SUBCASE("column out of range") {
    cfg.order = {0, 2};
    CHECK_THROWS_AS(train_chain(data, cfg), ConfigError);
  }
  SUBCASE("oracle links are rejected") {
    cfg.link_cfg.variant = Variant::t_g_oracle_f;
    CHECK_THROWS_AS(train_chain(data, cfg), ConfigError);
  }
  SUBCASE("sample count must be positive") {
    cfg.sample_count_for_cdf = 0;
    CHECK_THROWS_AS(train_chain(data, cfg), ConfigError);
  }
}

TEST_CASE("sampling is deterministic, chunk invariant, and validated") {
  const ChainModel& chain = toy_chain();
  const Vector x = bivariate_x();

  const JointSample a = sample_joint(chain, x, 64, 777);
  CHECK(a.draws.rows() == 64);
  CHECK(a.draws.cols() == 2);
  CHECK(a.saturated >= 0);

  SUBCASE("same call, same draws") {
    const JointSample b = sample_joint(chain, x, 64, 777);
    CHECK((a.draws - b.draws).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.saturated == b.saturated);
  }
  SUBCASE("a shorter call is a prefix of a longer one") {
    const JointSample c = sample_joint(chain, x, 32, 777);
    CHECK((a.draws.topRows(32) - c.draws).cwiseAbs().maxCoeff() == 0.0);
    CHECK(c.saturated <= a.saturated);
  }
  SUBCASE("the seed matters") {
    const JointSample d = sample_joint(chain, x, 64, 778);
    CHECK((a.draws - d.draws).cwiseAbs().maxCoeff() > 0.0);
  }
  SUBCASE("draws stay inside the destandardized inversion grids") {
    for (Eigen::Index j = 0; j < 2; ++j) {
      const TrainedCnModel& link = chain.links[static_cast<std::size_t>(j)];
      const double lo = link.destandardize_outcome(link.grid.lo);
      const double hi = link.destandardize_outcome(link.grid.hi);
      CHECK(a.draws.col(j).minCoeff() >= lo);
      CHECK(a.draws.col(j).maxCoeff() <= hi);
    }
  }
  SUBCASE("count and feature width are validated") {
    CHECK_THROWS_AS(sample_joint(chain, x, 0, 777), ConfigError);
    CHECK_THROWS_AS(sample_joint(chain, Vector::Zero(3), 8, 777), ConfigError);
  }
}

TEST_CASE("draws are the per-link quantile transforms of the derived levels") {
  const ChainModel& chain = toy_chain();
  const Vector x = bivariate_x();
  const JointSample a = sample_joint(chain, x, 64, 777);

  for (const Eigen::Index d : {Eigen::Index{0}, Eigen::Index{5}, Eigen::Index{31}}) {
    const Vector u = draw_levels(777, d, 2);

    const double y1 = chain.links[0].quantile_from_g(u(0), x).value;
    CHECK(a.draws(d, 0) == doctest::Approx(y1).epsilon(1e-12));

    Vector x2(5);
    x2 << x, a.draws(d, 0);
    const double y2 = chain.links[1].quantile_from_g(u(1), x2).value;
    CHECK(a.draws(d, 1) == doctest::Approx(y2).epsilon(1e-12));
  }
}

TEST_CASE("a swapped order still fills the natural outcome columns") {
  ChainConfig cfg;
  cfg.link_cfg = small_link_config();
  cfg.link_cfg.pretrain_iters = 150;
  cfg.link_cfg.joint_iters = 150;
  cfg.order = {1, 0};
  const ChainModel chain = train_chain(bivariate_data(260, 33), cfg);

  CHECK(chain.order == std::vector<int>{1, 0});
  // The first link now models outcome 1, so it sees only the raw features.
  CHECK(chain.links[0].feature_mean.size() == 4);
  CHECK(chain.links[1].feature_mean.size() == 5);

  const Vector x = bivariate_x();
  const JointSample a = sample_joint(chain, x, 16, 5);
  for (const Eigen::Index d : {Eigen::Index{0}, Eigen::Index{7}}) {
    const Vector u = draw_levels(5, d, 2);

    // Link 0 writes column 1; link 1 conditions on that draw and writes
    // column 0.
    const double y2 = chain.links[0].quantile_from_g(u(0), x).value;
    CHECK(a.draws(d, 1) == doctest::Approx(y2).epsilon(1e-12));

    Vector x2(5);
    x2 << x, a.draws(d, 1);
    const double y1 = chain.links[1].quantile_from_g(u(1), x2).value;
    CHECK(a.draws(d, 0) == doctest::Approx(y1).epsilon(1e-12));
  }
}

TEST_CASE("a single-outcome chain works and refuses joint queries") {
  const GeneratedData raw = gen_hetero_gaussian(220, 3);
  const LabeledDataset data =
      LabeledDataset::standardized(raw.features, raw.outcomes, 0.7, derive_seed(3, 1));
  ChainConfig cfg;
  cfg.link_cfg = small_link_config();
  cfg.link_cfg.pretrain_iters = 150;
  cfg.link_cfg.joint_iters = 150;
  const ChainModel chain = train_chain(data, cfg);

  CHECK(chain.links.size() == 1);
  CHECK(chain.order == std::vector<int>{0});

  Vector x(2);
  x << 0.5, 1.2;
  const JointSample a = sample_joint(chain, x, 200, 11);
  CHECK(a.draws.rows() == 200);
  CHECK(a.draws.cols() == 1);

  // Draws come back in original units: at this x the outcome law is centred
  // near the first feature, nowhere near the standardized scale.
  CHECK(std::abs(a.draws.col(0).mean() - 0.5) < 0.8);

  for (const Eigen::Index d : {Eigen::Index{0}, Eigen::Index{3}}) {
    const Vector u = draw_levels(11, d, 1);
    const double y = chain.links[0].quantile_from_g(u(0), x).value;
    CHECK(a.draws(d, 0) == doctest::Approx(y).epsilon(1e-12));
  }

  CHECK_THROWS_AS(joint_cdf(chain, 0.0, 0.0, x), ConfigError);
}

TEST_CASE("the joint CDF is deterministic, bounded, and grid consistent") {
  const ChainModel& chain = toy_chain();
  const Vector x = bivariate_x();

  // Span mean +- 4 sd of each outcome at this x.
  Vector z1s(5), z2s(5);
  z1s << 0.3 - 5.2, 0.3 - 2.6, 0.3, 0.3 + 2.6, 0.3 + 5.2;
  z2s << -0.4 - 6.8, -0.4 - 3.4, -0.4, -0.4 + 3.4, -0.4 + 6.8;

  const Matrix grid = joint_cdf_grid(chain, z1s, z2s, x);
  CHECK(grid.rows() == 5);
  CHECK(grid.cols() == 5);
  CHECK(grid.minCoeff() >= 0.0);
  CHECK(grid.maxCoeff() <= 1.0);

  SUBCASE("monotone in the first argument, nearly so in the second") {
    // z1 enters through an indicator over a shared draw set, so rows are
    // exactly monotone down each column. z2 enters through the learned CDF
    // net, which this training budget leaves only approximately monotone.
    for (Eigen::Index j = 0; j < 5; ++j) {
      for (Eigen::Index i = 1; i < 5; ++i) {
        CHECK(grid(i, j) >= grid(i - 1, j));
      }
    }
    for (Eigen::Index i = 0; i < 5; ++i) {
      for (Eigen::Index j = 1; j < 5; ++j) {
        CHECK(grid(i, j) >= grid(i, j - 1) - 0.05);
      }
    }
  }
  SUBCASE("far corners approach the distribution limits") {
    CHECK(grid(0, 0) <= 0.2);
    // Eight sd out; the learned CDF net saturates slowly at this budget.
    CHECK(joint_cdf(chain, 0.3 + 10.4, -0.4 + 13.6, x) >= 0.8);
  }
  SUBCASE("scalar queries agree with the grid and with themselves") {
    // The scalar path reduces a one-column product, so only the summation
    // order differs from the grid path.
    CHECK(joint_cdf(chain, z1s(1), z2s(3), x) == doctest::Approx(grid(1, 3)).epsilon(1e-12));
    CHECK(joint_cdf(chain, z1s(2), z2s(2), x) == doctest::Approx(grid(2, 2)).epsilon(1e-12));
    const Matrix again = joint_cdf_grid(chain, z1s, z2s, x);
    CHECK((grid - again).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("feature width is validated") {
    CHECK_THROWS_AS(joint_cdf(chain, 0.0, 0.0, Vector::Zero(5)), ConfigError);
  }
}

TEST_CASE("chain checkpoints round trip and reject damaged files") {
  const ChainModel& chain = toy_chain();
  const Vector x = bivariate_x();
  TempFile file("chain.json");

  chain_save(chain, file.path);
  const ChainModel loaded = chain_load(file.path);

  CHECK(loaded.links.size() == chain.links.size());
  CHECK(loaded.order == chain.order);
  CHECK(loaded.sample_count_for_cdf == chain.sample_count_for_cdf);
  for (std::size_t i = 0; i < chain.links.size(); ++i) {
    CHECK(loaded.links[i].fingerprint() == chain.links[i].fingerprint());
  }

  SUBCASE("queries agree bit for bit") {
    const JointSample a = sample_joint(chain, x, 32, 9);
    const JointSample b = sample_joint(loaded, x, 32, 9);
    CHECK((a.draws - b.draws).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.saturated == b.saturated);

    Vector z1s(2), z2s(2);
    z1s << -1.0, 1.5;
    z2s << -2.0, 0.5;
    const Matrix ga = joint_cdf_grid(chain, z1s, z2s, x);
    const Matrix gb = joint_cdf_grid(loaded, z1s, z2s, x);
    CHECK((ga - gb).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("saving the loaded chain reproduces the file") {
    TempFile second("chain_again.json");
    chain_save(loaded, second.path);
    CHECK(slurp(second.path) == slurp(file.path));
  }
  SUBCASE("damaged files raise IoError") {
    CHECK_THROWS_AS(chain_load("/tmp/cn_test_no_such_chain.json"), IoError);

    TempFile bad("chain_bad.json");
    std::ofstream(bad.path) << "not a checkpoint";
    CHECK_THROWS_AS(chain_load(bad.path), IoError);

    TempFile wrong("chain_wrong.json");
    std::ofstream(wrong.path) << "{\"format\":\"cn-model\",\"format_version\":1}";
    CHECK_THROWS_AS(chain_load(wrong.path), IoError);

    TempFile version("chain_version.json");
    std::ofstream(version.path) << "{\"format\":\"cn-chain\",\"format_version\":999}";
    CHECK_THROWS_AS(chain_load(version.path), IoError);

    TempFile cut("chain_cut.json");
    const std::string full = slurp(file.path);
    std::ofstream(cut.path) << full.substr(0, full.size() / 2);
    CHECK_THROWS_AS(chain_load(cut.path), IoError);
  }
  SUBCASE("an empty chain cannot be saved") {
    const ChainModel empty;
    TempFile target("chain_empty.json");
    CHECK_THROWS_AS(chain_save(empty, target.path), ConfigError);
  }
}
