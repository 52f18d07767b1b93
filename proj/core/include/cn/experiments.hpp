#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cn/metrics.hpp"
#include "cn/model.hpp"
#include "cn/synthetic.hpp"

namespace cn {

// Repeated-draw comparison protocol: per replication, draw a fresh dataset,
// split it, fit the requested estimators, and score each on the held-out
// rows with bins and medians from that replication's analytic law.

enum class Method {
  truth,  // the analytic conditional law itself (calibration ceiling)
  cn_g,   // jointly trained model, CDF side
  cn_f,   // jointly trained model, quantile side
  g_only  // g against the fixed uniform quantile stand-in
};

const char* method_name(Method method);
Method method_from_name(const std::string& name);

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;  // n-1 denominator; zero for fewer than two values
};

Aggregate aggregate(const std::vector<double>& values);

struct ReplicationConfig {
  Family family = Family::hetero_gaussian;
  Eigen::Index n = 0;  // 0 selects the family default
  int replications = 10;
  double train_fraction = 0.7;
  // Shared training settings; per-replication seeds derive from `seed`, so
  // the value in training.seed is ignored.
  TrainingConfig training;
  std::uint64_t seed = 0;
  std::vector<Method> methods = {Method::truth, Method::cn_g, Method::cn_f, Method::g_only};
};

struct MethodResult {
  Method method = Method::cn_g;
  std::vector<MetricReport> reports;  // one per replication
  Aggregate cal_hat, gof_hat, coverage90, mae;
};

struct ReplicationResult {
  std::vector<MethodResult> methods;
  // Wall time of the replication's main model fit (joint model when trained,
  // otherwise the fixed-f fit; zero when nothing was trained).
  std::vector<double> train_seconds;
  std::vector<bool> collapse_warnings;

  bool has(Method method) const;
  const MethodResult& method(Method method) const;  // throws when absent
};

ReplicationResult run_replications(const ReplicationConfig& cfg);

// Mean and sd of every metric per method, one row per metric.
csv::Table replication_table(const ReplicationResult& result);

}  // namespace cn
