#include "cn/chain.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "checkpoint_detail.hpp"
#include "cn/checkpoint.hpp"
#include "cn/csv.hpp"
#include "cn/errors.hpp"
#include "cn/rng.hpp"

namespace cn {

namespace {

using nlohmann::json;

std::vector<int> resolved_order(const std::vector<int>& order, Eigen::Index m) {
  std::vector<int> out = order;
  if (out.empty()) {
    out.resize(static_cast<std::size_t>(m));
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  if (static_cast<Eigen::Index>(out.size()) != m) {
    throw ConfigError("chain order must list every outcome column exactly once");
  }
  std::vector<int> sorted = out;
  std::sort(sorted.begin(), sorted.end());
  for (Eigen::Index j = 0; j < m; ++j) {
    if (sorted[static_cast<std::size_t>(j)] != j) {
      throw ConfigError("chain order must be a permutation of the outcome columns");
    }
  }
  return out;
}

void validate_chain(const ChainModel& chain) {
  const auto m = static_cast<Eigen::Index>(chain.links.size());
  if (m == 0) {
    throw ConfigError("chain has no links");
  }
  resolved_order(chain.order, m);
  if (chain.sample_count_for_cdf < 1) {
    throw ConfigError("chain sample count must be positive");
  }
  const Eigen::Index p = chain.links.front().feature_mean.size();
  for (Eigen::Index j = 0; j < m; ++j) {
    if (chain.links[static_cast<std::size_t>(j)].feature_mean.size() != p + j) {
      throw ConfigError("chain link widths do not chain");
    }
  }
}

void check_feature_width(const ChainModel& chain, const Vector& x) {
  if (x.size() != chain.feature_width()) {
    throw ConfigError("feature vector has width " + std::to_string(x.size()) + ", chain expects " +
                      std::to_string(chain.feature_width()));
  }
}

// g-side quantiles, one level per feature row. Rows are original units and
// may differ, so the grid curve is evaluated per row; chunking amortizes the
// network forwards without affecting the result.
Vector g_quantiles_rows(const TrainedCnModel& model, const Matrix& rows_raw, const Vector& levels,
                        Eigen::Index& saturated) {
  const Eigen::Index n = rows_raw.rows();
  const Eigen::Index d = rows_raw.cols();
  const Eigen::Index points = model.grid.points;
  const Vector grid_values = model.grid.values();

  Matrix rows_std = rows_raw;
  for (Eigen::Index c = 0; c < d; ++c) {
    rows_std.col(c) = (rows_std.col(c).array() - model.feature_mean(c)) / model.feature_sd(c);
  }

  Vector out(n);
  const Eigen::Index chunk = 32;
  Matrix input(chunk * points, 1 + d);
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index rows_here = std::min(chunk, n - start);
    input.conservativeResize(rows_here * points, Eigen::NoChange);
    for (Eigen::Index r = 0; r < rows_here; ++r) {
      input.block(r * points, 0, points, 1) = grid_values;
      input.block(r * points, 1, points, d) = rows_std.row(start + r).replicate(points, 1);
    }
    const Matrix logits = model.g_net.evaluate(input);
    for (Eigen::Index r = 0; r < rows_here; ++r) {
      Vector curve(points);
      for (Eigen::Index i = 0; i < points; ++i) {
        curve(i) = clamp_probability(sigmoid(logits(r * points + i, 0)));
      }
      const GridQuantile gq = invert_on_grid(grid_values, curve, levels(start + r));
      if (gq.saturated) {
        ++saturated;
      }
      out(start + r) = model.destandardize_outcome(gq.value);
    }
  }
  return out;
}

// Shared draw machinery for sampling and the joint CDF.
JointSample draw_joint(const ChainModel& chain, const Vector& x, Eigen::Index count,
                       std::uint64_t seed) {
  const auto m = static_cast<Eigen::Index>(chain.links.size());
  const Eigen::Index p = x.size();

  // Per-draw streams fix the levels up front; the chunked evaluation below
  // cannot change them.
  Matrix levels(count, m);
  for (Eigen::Index d = 0; d < count; ++d) {
    RandomStream stream(derive_seed(seed, static_cast<std::uint64_t>(d)));
    for (Eigen::Index j = 0; j < m; ++j) {
      levels(d, j) = std::clamp(stream.uniform(0.0, 1.0), kProbFloor, 1.0 - kProbFloor);
    }
  }

  JointSample result;
  result.draws = Matrix(count, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const TrainedCnModel& link = chain.links[static_cast<std::size_t>(j)];
    const int column = chain.order[static_cast<std::size_t>(j)];
    if (j == 0) {
      // One feature row, one curve shared by every draw.
      const Vector curve = link.g_curve(link.standardize_features(x));
      const Vector grid_values = link.grid.values();
      for (Eigen::Index d = 0; d < count; ++d) {
        const GridQuantile gq = invert_on_grid(grid_values, curve, levels(d, 0));
        if (gq.saturated) {
          ++result.saturated;
        }
        result.draws(d, column) = link.destandardize_outcome(gq.value);
      }
      continue;
    }
    Matrix rows(count, p + j);
    rows.leftCols(p) = x.transpose().replicate(count, 1);
    for (Eigen::Index k = 0; k < j; ++k) {
      rows.col(p + k) = result.draws.col(chain.order[static_cast<std::size_t>(k)]);
    }
    result.draws.col(column) = g_quantiles_rows(link, rows, levels.col(j), result.saturated);
  }
  return result;
}

std::uint64_t cdf_draw_seed(const ChainModel& chain, const Vector& x) {
  const std::uint64_t x_hash =
      fnv1a(x.data(), static_cast<std::size_t>(x.size()) * sizeof(double));
  return derive_seed(x_hash ^ chain.links.front().config.seed, 0x9e3779b9ull);
}

}  // namespace

ChainModel train_chain(const LabeledDataset& data, const ChainConfig& cfg) {
  const Eigen::Index m = data.outcome_width();
  const Eigen::Index p = data.feature_width();
  if (cfg.link_cfg.variant == Variant::t_g_oracle_f) {
    throw ConfigError("chain links cannot use the oracle variant");
  }
  if (cfg.sample_count_for_cdf < 1) {
    throw ConfigError("chain sample count must be positive");
  }
  const std::vector<int> order = resolved_order(cfg.order, m);

  const Matrix x_raw = data.destandardize_features(data.features);
  const Matrix y_raw = data.destandardize_outcomes(data.outcomes);

  ChainModel chain;
  chain.order = order;
  chain.sample_count_for_cdf = cfg.sample_count_for_cdf;
  for (Eigen::Index j = 0; j < m; ++j) {
    Matrix feats(data.rows(), p + j);
    feats.leftCols(p) = x_raw;
    for (Eigen::Index k = 0; k < j; ++k) {
      feats.col(p + k) = y_raw.col(order[static_cast<std::size_t>(k)]);
    }
    const Matrix outcome = y_raw.col(order[static_cast<std::size_t>(j)]);
    LabeledDataset link_data =
        LabeledDataset::standardized_presplit(feats, outcome, data.train_rows, data.test_rows);
    link_data.train_fraction = data.train_fraction;
    link_data.split_seed = data.split_seed;
    TrainingConfig link_cfg = cfg.link_cfg;
    link_cfg.seed = derive_seed(cfg.link_cfg.seed, 100 + static_cast<std::uint64_t>(j));
    chain.links.push_back(train(link_data, link_cfg));
  }
  validate_chain(chain);
  return chain;
}

JointSample sample_joint(const ChainModel& chain, const Vector& x, Eigen::Index count,
                         std::uint64_t seed) {
  validate_chain(chain);
  check_feature_width(chain, x);
  if (count < 1) {
    throw ConfigError("sample count must be positive");
  }
  return draw_joint(chain, x, count, seed);
}

double joint_cdf(const ChainModel& chain, double z1, double z2, const Vector& x) {
  Vector z1s(1), z2s(1);
  z1s(0) = z1;
  z2s(0) = z2;
  return joint_cdf_grid(chain, z1s, z2s, x)(0, 0);
}

Matrix joint_cdf_grid(const ChainModel& chain, const Vector& z1s, const Vector& z2s,
                      const Vector& x) {
  validate_chain(chain);
  check_feature_width(chain, x);
  if (chain.links.size() != 2) {
    throw ConfigError("joint CDF is defined for two-outcome chains");
  }
  const Eigen::Index s = chain.sample_count_for_cdf;
  const Eigen::Index p = x.size();

  // First-coordinate draws; their empirical pairing with the second link's
  // CDF gives P(Y1 <= z1, Y2 <= z2 | x) with shared randomness across the
  // whole grid, hence monotone entries.
  const TrainedCnModel& link1 = chain.links[0];
  const TrainedCnModel& link2 = chain.links[1];
  const std::uint64_t seed = cdf_draw_seed(chain, x);

  RandomStream stream(seed);
  Vector levels(s);
  for (Eigen::Index i = 0; i < s; ++i) {
    levels(i) = std::clamp(stream.uniform(0.0, 1.0), kProbFloor, 1.0 - kProbFloor);
  }
  const Vector curve = link1.g_curve(link1.standardize_features(x));
  const Vector grid_values = link1.grid.values();
  Vector y1(s);
  for (Eigen::Index i = 0; i < s; ++i) {
    y1(i) = link1.destandardize_outcome(invert_on_grid(grid_values, curve, levels(i)).value);
  }

  Matrix rows2(s, p + 1);
  rows2.leftCols(p) = x.transpose().replicate(s, 1);
  rows2.col(p) = y1;
  Matrix f2(s, z2s.size());
  for (Eigen::Index j = 0; j < z2s.size(); ++j) {
    f2.col(j) = link2.cdf_rows(z2s(j), rows2);
  }

  Matrix out(z1s.size(), z2s.size());
  for (Eigen::Index i = 0; i < z1s.size(); ++i) {
    const Vector indicator = (y1.array() <= z1s(i)).cast<double>().matrix();
    out.row(i) = (indicator.transpose() * f2) / static_cast<double>(s);
  }
  return out;
}

void chain_save(const ChainModel& chain, const std::string& path) {
  validate_chain(chain);
  json j;
  j["format"] = "cn-chain";
  j["format_version"] = kCheckpointFormatVersion;
  j["order"] = chain.order;
  j["sample_count_for_cdf"] = chain.sample_count_for_cdf;
  json links = json::array();
  for (const TrainedCnModel& link : chain.links) {
    links.push_back(detail::model_to_json(link));
  }
  j["links"] = std::move(links);
  csv::write_text_atomic(path, j.dump());
}

ChainModel chain_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("corrupt checkpoint " + path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "cn-chain") {
      throw IoError("corrupt checkpoint " + path + ": not a chain checkpoint");
    }
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw IoError("corrupt checkpoint " + path + ": unsupported format version");
    }
    ChainModel chain;
    chain.order = j.at("order").get<std::vector<int>>();
    chain.sample_count_for_cdf = j.at("sample_count_for_cdf").get<Eigen::Index>();
    const json& links = j.at("links");
    for (std::size_t k = 0; k < links.size(); ++k) {
      chain.links.push_back(
          detail::model_from_json(links[k], path + " (link " + std::to_string(k) + ")"));
    }
    validate_chain(chain);
    return chain;
  } catch (const IoError&) {
    throw;
  } catch (const ConfigError& e) {
    throw IoError("corrupt checkpoint " + path + ": " + e.what());
  } catch (const std::exception& e) {
    throw IoError("corrupt checkpoint " + path + ": " + e.what());
  }
}

}  // namespace cn
