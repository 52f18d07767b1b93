#include "cn/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cn/errors.hpp"
#include "cn/rng.hpp"

namespace cn {

const char* method_name(Method method) {
  switch (method) {
    case Method::truth: return "truth";
    case Method::cn_g: return "cn_g";
    case Method::cn_f: return "cn_f";
    case Method::g_only: return "g_only";
  }
  return "cn_g";
}

Method method_from_name(const std::string& name) {
  if (name == "truth") return Method::truth;
  if (name == "cn_g") return Method::cn_g;
  if (name == "cn_f") return Method::cn_f;
  if (name == "g_only") return Method::g_only;
  throw ConfigError("unknown method '" + name + "'");
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate out;
  if (values.empty()) {
    return out;
  }
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) {
      ss += (v - out.mean) * (v - out.mean);
    }
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

bool ReplicationResult::has(Method method) const {
  return std::any_of(methods.begin(), methods.end(),
                     [method](const MethodResult& m) { return m.method == method; });
}

const MethodResult& ReplicationResult::method(Method method) const {
  for (const MethodResult& m : methods) {
    if (m.method == method) {
      return m;
    }
  }
  throw ConfigError(std::string("method ") + method_name(method) + " was not run");
}

namespace {

bool wants(const ReplicationConfig& cfg, Method method) {
  return std::find(cfg.methods.begin(), cfg.methods.end(), method) != cfg.methods.end();
}

void finalize(MethodResult& result) {
  std::vector<double> cal, gof, cov, mae;
  for (const MetricReport& r : result.reports) {
    cal.push_back(r.cal_hat);
    gof.push_back(r.gof_hat);
    cov.push_back(r.coverage90);
    mae.push_back(r.mae);
  }
  result.cal_hat = aggregate(cal);
  result.gof_hat = aggregate(gof);
  result.coverage90 = aggregate(cov);
  result.mae = aggregate(mae);
}

}  // namespace

ReplicationResult run_replications(const ReplicationConfig& cfg) {
  if (cfg.replications < 1) {
    throw ConfigError("replication count must be positive");
  }
  if (cfg.methods.empty()) {
    throw ConfigError("replication study needs at least one method");
  }
  if (outcome_width(cfg.family) != 1) {
    throw ConfigError("replication study needs a scalar-outcome family");
  }
  cfg.training.validate();

  const OracleDistribution oracle = scalar_oracle(cfg.family);
  const CalibrationConfig cal_cfg = CalibrationConfig::defaults();
  const bool needs_joint = wants(cfg, Method::cn_g) || wants(cfg, Method::cn_f);
  const bool needs_g_only = wants(cfg, Method::g_only);

  ReplicationResult result;
  for (Method m : cfg.methods) {
    MethodResult mr;
    mr.method = m;
    result.methods.push_back(mr);
  }

  for (int rep = 0; rep < cfg.replications; ++rep) {
    // Auditable per-replication root: the study seed plus the replication
    // index. Data, split, and training streams branch off it.
    const std::uint64_t rep_root = cfg.seed + static_cast<std::uint64_t>(rep);
    SyntheticSpec spec;
    spec.family = cfg.family;
    spec.n = cfg.n;
    spec.seed = derive_seed(rep_root, 0);
    const GeneratedData gen = generate(spec);
    const LabeledDataset data = LabeledDataset::standardized(
        gen.features, gen.outcomes, cfg.train_fraction, derive_seed(rep_root, 1));

    const GofBins bins = GofBins::from_training(data.train_outcomes_raw().col(0));
    const Matrix x_test = data.test_features_raw();
    const Vector y_test = data.test_outcomes_raw().col(0);
    Vector median_ref(x_test.rows());
    for (Eigen::Index i = 0; i < x_test.rows(); ++i) {
      median_ref(i) = oracle.quantile(0.5, x_test.row(i).transpose());
    }

    double seconds = 0.0;
    bool collapsed = false;
    std::optional<TrainedCnModel> joint;
    std::optional<TrainedCnModel> g_only;
    TrainingConfig tc = cfg.training;
    tc.seed = derive_seed(rep_root, 2);
    if (needs_joint) {
      tc.variant = Variant::cn_full;
      const auto t0 = std::chrono::steady_clock::now();
      joint = train(data, tc);
      seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      collapsed = joint->collapse_warning;
    }
    if (needs_g_only) {
      // Same seed as the joint fit: identical pre-training, so the two runs
      // differ only in what drives the second phase.
      tc.variant = Variant::g_only_fixed_f;
      const auto t0 = std::chrono::steady_clock::now();
      g_only = train(data, tc);
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (!needs_joint) {
        seconds = s;
      }
    }

    for (MethodResult& mr : result.methods) {
      switch (mr.method) {
        case Method::truth:
          mr.reports.push_back(
              evaluate_distribution(oracle, x_test, y_test, bins, cal_cfg, &median_ref));
          break;
        case Method::cn_g:
          mr.reports.push_back(evaluate_distribution(joint->distribution(Source::from_g), x_test,
                                                     y_test, bins, cal_cfg, &median_ref));
          break;
        case Method::cn_f:
          mr.reports.push_back(evaluate_distribution(joint->distribution(Source::from_f), x_test,
                                                     y_test, bins, cal_cfg, &median_ref));
          break;
        case Method::g_only:
          mr.reports.push_back(evaluate_distribution(g_only->distribution(Source::from_g), x_test,
                                                     y_test, bins, cal_cfg, &median_ref));
          break;
      }
    }
    result.train_seconds.push_back(seconds);
    result.collapse_warnings.push_back(collapsed);
  }

  for (MethodResult& mr : result.methods) {
    finalize(mr);
  }
  return result;
}

csv::Table replication_table(const ReplicationResult& result) {
  csv::Table table;
  table.header = {"method",          "cal_hat_mean", "cal_hat_sd", "gof_hat_mean",
                  "gof_hat_sd",      "coverage90_mean", "coverage90_sd", "mae_mean",
                  "mae_sd"};
  for (const MethodResult& mr : result.methods) {
    table.rows.push_back({method_name(mr.method), csv::format_double(mr.cal_hat.mean),
                          csv::format_double(mr.cal_hat.sd), csv::format_double(mr.gof_hat.mean),
                          csv::format_double(mr.gof_hat.sd),
                          csv::format_double(mr.coverage90.mean),
                          csv::format_double(mr.coverage90.sd), csv::format_double(mr.mae.mean),
                          csv::format_double(mr.mae.sd)});
  }
  return table;
}

}  // namespace cn
