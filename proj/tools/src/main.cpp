#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cn/chain.hpp"
#include "cn/checkpoint.hpp"
#include "cn/csv.hpp"
#include "cn/errors.hpp"
#include "cn/experiments.hpp"
#include "cn/metrics.hpp"
#include "cn/model.hpp"
#include "cn/rng.hpp"
#include "cn/synthetic.hpp"

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string out_dir;
  int threads = 0;
};

void apply_threads(const GlobalOpts& g) {
  if (g.threads > 0) {
    Eigen::setNbThreads(g.threads);
  }
}

// Output paths are taken relative to --out-dir (inputs are not); parent
// directories are created on demand.
std::string resolve_out(const GlobalOpts& g, const std::string& path) {
  namespace fs = std::filesystem;
  try {
    fs::path p(path);
    fs::path full = (g.out_dir.empty() || p.is_absolute()) ? p : fs::path(g.out_dir) / p;
    if (full.has_parent_path()) {
      fs::create_directories(full.parent_path());
    }
    return full.string();
  } catch (const fs::filesystem_error& e) {
    throw cn::IoError(std::string("cannot prepare output path: ") + e.what());
  }
}

cn::Variant variant_from_flag(const std::string& name) {
  if (name == "cn_full" || name == "full") return cn::Variant::cn_full;
  if (name == "g_only" || name == "g_only_fixed_f") return cn::Variant::g_only_fixed_f;
  if (name == "t_g" || name == "t_g_oracle_f") return cn::Variant::t_g_oracle_f;
  throw cn::ConfigError("unknown variant '" + name + "' (use cn_full, g_only, or t_g)");
}

const char* variant_flag_name(cn::Variant v) {
  switch (v) {
    case cn::Variant::cn_full: return "cn_full";
    case cn::Variant::g_only_fixed_f: return "g_only";
    case cn::Variant::t_g_oracle_f: return "t_g";
  }
  return "cn_full";
}

cn::Source source_from_flag(const std::string& name) {
  if (name == "g") return cn::Source::from_g;
  if (name == "f") return cn::Source::from_f;
  throw cn::ConfigError("unknown source '" + name + "' (use g or f)");
}

void check_split(double split) {
  if (!(split > 0.0 && split < 1.0)) {
    throw cn::ConfigError("split ratio must lie in (0, 1)");
  }
}

void add_training_flags(CLI::App* cmd, cn::TrainingConfig& tc) {
  cmd->add_option("--pretrain-iters", tc.pretrain_iters, "Pre-training iterations")
      ->capture_default_str();
  cmd->add_option("--joint-iters", tc.joint_iters, "Second-phase iterations")
      ->capture_default_str();
  cmd->add_option("--batch-size", tc.batch_size, "Minibatch size (0 = size rule)")
      ->capture_default_str();
  cmd->add_option("--g-step", tc.g_step_size, "Adam step size for g")->capture_default_str();
  cmd->add_option("--f-step", tc.f_step_size, "Adam step size for f")->capture_default_str();
  cmd->add_option("--g-hidden", tc.g_hidden, "Hidden widths of g")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--f-hidden", tc.f_hidden, "Hidden widths of f")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--q-dist", tc.q_dist, "Level proposal during the joint phase")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, cn::QDist>{{"uniform", cn::QDist::uniform},
                                           {"beta", cn::QDist::beta}},
          CLI::ignore_case));
  cmd->add_option("--q-beta-a", tc.q_beta_a, "Beta level proposal, first shape")
      ->capture_default_str();
  cmd->add_option("--q-beta-b", tc.q_beta_b, "Beta level proposal, second shape")
      ->capture_default_str();
  cmd->add_option("--margin-k", tc.margin_k,
                  "Margin beyond the outcome range, standardized units (<=0 = half range)")
      ->capture_default_str();
  cmd->add_option("--ext-lambda", tc.ext_lambda, "Weight of the extra (q - g)^2 g-step term")
      ->capture_default_str();
  cmd->add_option("--inversion-points", tc.inversion_points, "CDF inversion grid size")
      ->capture_default_str();
}

cn::csv::Table trace_table(const cn::TrainingTrace& trace) {
  cn::csv::Table table;
  table.header = {"phase", "iteration", "g_loss", "f_loss"};
  for (std::size_t i = 0; i < trace.pretrain_g_loss.size(); ++i) {
    table.rows.push_back({"pretrain", std::to_string(i + 1),
                          cn::csv::format_double(trace.pretrain_g_loss[i]),
                          cn::csv::format_double(0.0)});
  }
  for (std::size_t i = 0; i < trace.joint_g_loss.size(); ++i) {
    const double f_loss = i < trace.joint_f_loss.size() ? trace.joint_f_loss[i] : 0.0;
    table.rows.push_back({"joint", std::to_string(i + 1),
                          cn::csv::format_double(trace.joint_g_loss[i]),
                          cn::csv::format_double(f_loss)});
  }
  return table;
}

cn::Vector vector_from(const std::vector<double>& values) {
  cn::Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = values[i];
  }
  return v;
}

// synth ----------------------------------------------------------------

struct SynthOpts {
  std::string family;
  long n = 0;
  std::string out = "data.csv";
  std::string manifest;
};

void run_synth(const SynthOpts& o, const GlobalOpts& g) {
  apply_threads(g);
  cn::SyntheticSpec spec;
  spec.family = cn::family_from_name(o.family);
  spec.n = o.n;
  spec.seed = g.seed;
  const cn::GeneratedData gen = cn::generate(spec);

  const std::string out = resolve_out(g, o.out);
  cn::csv::write_dataset(out, gen.features, gen.outcomes);

  nlohmann::json manifest;
  manifest["family"] = cn::family_name(spec.family);
  manifest["n"] = gen.features.rows();
  manifest["seed"] = spec.seed;
  manifest["feature_width"] = gen.features.cols();
  manifest["outcome_width"] = gen.outcomes.cols();
  manifest["data"] = out;
  const std::string mpath =
      resolve_out(g, o.manifest.empty() ? o.out + ".manifest.json" : o.manifest);
  cn::csv::write_text_atomic(mpath, manifest.dump(2) + "\n");

  std::cout << "wrote " << gen.features.rows() << " rows to " << out << "\n"
            << "manifest: " << mpath << "\n";
}

// train ----------------------------------------------------------------

struct TrainOpts {
  std::string data;
  std::string model = "model.ckpt";
  std::string trace;
  double split = 0.7;
  std::string variant = "cn_full";
  std::string oracle_family;
  cn::TrainingConfig tc;
};

void run_train(const TrainOpts& o, const GlobalOpts& g) {
  apply_threads(g);
  const cn::csv::DatasetFile file = cn::csv::read_dataset(o.data);
  if (file.outcomes.cols() != 1) {
    throw cn::DataError("train expects one outcome column; chain-train handles several");
  }
  check_split(o.split);
  const cn::LabeledDataset data = cn::LabeledDataset::standardized(
      file.features, file.outcomes, o.split, cn::derive_seed(g.seed, 1));

  cn::TrainingConfig tc = o.tc;
  tc.seed = g.seed;
  tc.variant = variant_from_flag(o.variant);
  std::optional<cn::FixedF> fixed_f;
  if (tc.variant == cn::Variant::t_g_oracle_f) {
    if (o.oracle_family.empty()) {
      throw cn::ConfigError("the t_g variant needs --family to pick the quantile oracle");
    }
    fixed_f = cn::oracle_fixed_f(cn::family_from_name(o.oracle_family));
  }

  const auto t0 = std::chrono::steady_clock::now();
  const cn::TrainedCnModel model = cn::train(data, tc, fixed_f);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string model_path = resolve_out(g, o.model);
  cn::checkpoint_save(model, model_path);
  const std::string trace_path =
      resolve_out(g, o.trace.empty() ? o.model + ".trace.csv" : o.trace);
  cn::csv::write_table(trace_path, trace_table(model.trace));

  std::cout << "trained " << variant_flag_name(tc.variant) << " on "
            << data.train_rows.size() << " train / " << data.test_rows.size()
            << " test rows in " << seconds << " s\n";
  if (model.collapse_warning) {
    std::cout << "warning: f outputs barely vary across levels; f-side queries are suspect\n";
  }
  std::cout << "checkpoint: " << model_path << "\ntrace: " << trace_path << "\n";
}

// eval -----------------------------------------------------------------

struct EvalOpts {
  std::string model;
  std::string data;
  std::string source = "g";
  std::string oracle;
  std::string report = "metrics.txt";
  std::string sharpness;
  std::string calibration;
  double split = 0.7;
  std::string median_oracle;
};

void run_eval(const EvalOpts& o, const GlobalOpts& g) {
  apply_threads(g);
  if (o.model.empty() == o.oracle.empty()) {
    throw cn::ConfigError("eval needs exactly one of --model or --oracle");
  }
  const cn::csv::DatasetFile file = cn::csv::read_dataset(o.data);
  if (file.outcomes.cols() != 1) {
    throw cn::DataError("eval expects one outcome column");
  }

  // Oracle runs split with the flags; checkpoint runs re-derive the split the
  // model was trained with, so test rows never overlap its training rows.
  std::optional<cn::TrainedCnModel> model;
  std::optional<cn::OracleDistribution> oracle;
  double split = o.split;
  std::uint64_t split_seed = cn::derive_seed(g.seed, 1);
  const cn::Source source = source_from_flag(o.source);
  if (!o.oracle.empty()) {
    oracle.emplace(cn::scalar_oracle(cn::family_from_name(o.oracle)));
    check_split(split);
  } else {
    model = cn::checkpoint_load(o.model);
    if (model->has_fixed_f() && model->fixed_f->kind == cn::FixedF::Kind::oracle &&
        source == cn::Source::from_f) {
      cn::rebind_oracle(*model);
    }
    split = model->train_fraction;
    split_seed = model->split_seed;
  }
  const cn::LabeledDataset data =
      cn::LabeledDataset::standardized(file.features, file.outcomes, split, split_seed);

  const cn::GofBins bins = cn::GofBins::from_training(data.train_outcomes_raw().col(0));
  const cn::CalibrationConfig cal = cn::CalibrationConfig::defaults();
  const cn::Matrix x_test = data.test_features_raw();
  const cn::Vector y_test = data.test_outcomes_raw().col(0);

  std::optional<cn::Vector> median_ref;
  const std::string med_family = o.median_oracle.empty() ? o.oracle : o.median_oracle;
  if (!med_family.empty()) {
    const cn::OracleDistribution med = cn::scalar_oracle(cn::family_from_name(med_family));
    cn::Vector v(x_test.rows());
    for (Eigen::Index i = 0; i < x_test.rows(); ++i) {
      v(i) = med.quantile(0.5, x_test.row(i).transpose());
    }
    median_ref = std::move(v);
  }

  cn::MetricReport report;
  if (oracle.has_value()) {
    report = cn::evaluate_distribution(*oracle, x_test, y_test, bins, cal,
                                       median_ref ? &*median_ref : nullptr);
  } else {
    report = cn::evaluate_distribution(model->distribution(source), x_test, y_test, bins, cal,
                                       median_ref ? &*median_ref : nullptr);
  }

  const std::string report_path = resolve_out(g, o.report);
  cn::csv::write_text_atomic(report_path, cn::metric_record(report));
  const std::string sharp_path =
      resolve_out(g, o.sharpness.empty() ? o.report + ".sharpness.csv" : o.sharpness);
  cn::csv::write_table(sharp_path, cn::sharpness_table(report));
  const std::string calib_path =
      resolve_out(g, o.calibration.empty() ? o.report + ".calibration.csv" : o.calibration);
  cn::csv::write_table(calib_path, cn::calibration_table(report));

  std::cout << cn::metric_record(report);
  std::cout << "report: " << report_path << "\nsharpness: " << sharp_path
            << "\ncalibration: " << calib_path << "\n";
}

// compare --------------------------------------------------------------

struct CompareOpts {
  std::vector<std::string> families;
  int replications = 10;
  double split = 0.7;
  long n = 0;
  std::vector<std::string> methods = {"truth", "cn_g", "cn_f", "g_only"};
  std::string out = "compare.csv";
  cn::TrainingConfig tc;
};

void run_compare(const CompareOpts& o, const GlobalOpts& g) {
  apply_threads(g);
  check_split(o.split);
  cn::csv::Table table;
  table.header = {"family"};
  for (const std::string& family : o.families) {
    cn::ReplicationConfig rc;
    rc.family = cn::family_from_name(family);
    rc.n = o.n;
    rc.replications = o.replications;
    rc.train_fraction = o.split;
    rc.training = o.tc;
    rc.seed = g.seed;
    rc.methods.clear();
    for (const std::string& m : o.methods) {
      rc.methods.push_back(cn::method_from_name(m));
    }

    const cn::ReplicationResult result = cn::run_replications(rc);
    const cn::csv::Table sub = cn::replication_table(result);
    if (table.header.size() == 1) {
      table.header.insert(table.header.end(), sub.header.begin(), sub.header.end());
    }
    for (const auto& row : sub.rows) {
      std::vector<std::string> cells{family};
      cells.insert(cells.end(), row.begin(), row.end());
      table.rows.push_back(std::move(cells));
    }

    double total_seconds = 0.0;
    int collapses = 0;
    for (double s : result.train_seconds) {
      total_seconds += s;
    }
    for (bool c : result.collapse_warnings) {
      collapses += c ? 1 : 0;
    }
    std::cout << family << ": " << o.replications << " replications, "
              << total_seconds / static_cast<double>(o.replications) << " s per fit\n";
    for (const cn::MethodResult& mr : result.methods) {
      std::cout << "  " << cn::method_name(mr.method) << ": cal " << mr.cal_hat.mean << " +/- "
                << mr.cal_hat.sd << ", gof " << mr.gof_hat.mean << " +/- " << mr.gof_hat.sd
                << ", cover90 " << mr.coverage90.mean << " +/- " << mr.coverage90.sd << ", mae "
                << mr.mae.mean << " +/- " << mr.mae.sd << "\n";
    }
    if (collapses > 0) {
      std::cout << "  warning: f collapsed in " << collapses << " replication(s)\n";
    }
  }
  const std::string out = resolve_out(g, o.out);
  cn::csv::write_table(out, table);
  std::cout << "table: " << out << "\n";
}

// convergence ----------------------------------------------------------

struct ConvergenceOpts {
  ConvergenceOpts() { tc.batch_size = 200; }

  std::string family = "sine1d";
  std::vector<long> n_grid = {100, 500, 1000, 2000, 5000};
  std::vector<std::string> variants = {"t_g", "cn_full", "g_only"};
  long n_test = 1000;
  std::string out = "convergence.csv";
  cn::TrainingConfig tc;
};

void run_convergence(const ConvergenceOpts& o, const GlobalOpts& g) {
  apply_threads(g);
  std::vector<Eigen::Index> grid(o.n_grid.begin(), o.n_grid.end());
  std::vector<cn::Variant> variants;
  for (const std::string& v : o.variants) {
    variants.push_back(variant_from_flag(v));
  }
  const std::vector<cn::ConvergenceCell> cells = cn::gof_vs_n_study(
      cn::family_from_name(o.family), grid, variants, o.tc, o.n_test, g.seed);

  cn::csv::Table table;
  table.header = {"n", "variant", "gof"};
  for (const cn::ConvergenceCell& cell : cells) {
    table.rows.push_back({std::to_string(cell.n), variant_flag_name(cell.variant),
                          cn::csv::format_double(cell.gof)});
    std::cout << "n=" << cell.n << " " << variant_flag_name(cell.variant) << ": gof "
              << cell.gof << "\n";
  }
  const std::string out = resolve_out(g, o.out);
  cn::csv::write_table(out, table);
  std::cout << "table: " << out << "\n";
}

// chain-train ----------------------------------------------------------

struct ChainTrainOpts {
  std::string data;
  std::string model = "chain.ckpt";
  std::vector<int> order;
  long sample_count = 5000;
  double split = 0.7;
  std::string variant = "cn_full";
  cn::TrainingConfig tc;
};

void run_chain_train(const ChainTrainOpts& o, const GlobalOpts& g) {
  apply_threads(g);
  const cn::csv::DatasetFile file = cn::csv::read_dataset(o.data);
  check_split(o.split);
  const cn::LabeledDataset data = cn::LabeledDataset::standardized(
      file.features, file.outcomes, o.split, cn::derive_seed(g.seed, 1));

  cn::ChainConfig cc;
  cc.link_cfg = o.tc;
  cc.link_cfg.seed = g.seed;
  cc.link_cfg.variant = variant_from_flag(o.variant);
  cc.order = o.order;
  cc.sample_count_for_cdf = o.sample_count;

  const auto t0 = std::chrono::steady_clock::now();
  const cn::ChainModel chain = cn::train_chain(data, cc);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string model_path = resolve_out(g, o.model);
  cn::chain_save(chain, model_path);
  std::cout << "trained " << chain.links.size() << " link(s) on " << data.train_rows.size()
            << " train rows in " << seconds << " s\nchain checkpoint: " << model_path << "\n";
}

// chain-eval -----------------------------------------------------------

struct ChainEvalOpts {
  std::string model;
  std::vector<double> x;
  long samples = 0;
  std::string samples_out = "chain_samples.csv";
  long grid_points = 0;
  std::string grid_out = "chain_cdf.csv";
  std::vector<double> z;
};

void run_chain_eval(const ChainEvalOpts& o, const GlobalOpts& g) {
  apply_threads(g);
  const cn::ChainModel chain = cn::chain_load(o.model);
  const cn::Vector x = vector_from(o.x);
  bool did_something = false;

  if (o.samples > 0) {
    const cn::JointSample js = cn::sample_joint(chain, x, o.samples, g.seed);
    cn::csv::Table table;
    for (Eigen::Index c = 0; c < js.draws.cols(); ++c) {
      table.header.push_back("y_" + std::to_string(c + 1));
    }
    for (Eigen::Index r = 0; r < js.draws.rows(); ++r) {
      std::vector<std::string> cells;
      for (Eigen::Index c = 0; c < js.draws.cols(); ++c) {
        cells.push_back(cn::csv::format_double(js.draws(r, c)));
      }
      table.rows.push_back(std::move(cells));
    }
    const std::string out = resolve_out(g, o.samples_out);
    cn::csv::write_table(out, table);
    std::cout << "wrote " << o.samples << " joint draws to " << out << " (" << js.saturated
              << " saturated inversions)\n";
    did_something = true;
  }

  if (o.grid_points > 1) {
    // Grid bounds come from a probe sample, so the surface spans the bulk of
    // the estimated law without manual limits.
    const cn::JointSample probe =
        cn::sample_joint(chain, x, 2000, cn::derive_seed(g.seed, 5));
    cn::Vector z1s(o.grid_points), z2s(o.grid_points);
    const double lo1 = probe.draws.col(0).minCoeff(), hi1 = probe.draws.col(0).maxCoeff();
    const double lo2 = probe.draws.col(1).minCoeff(), hi2 = probe.draws.col(1).maxCoeff();
    for (long i = 0; i < o.grid_points; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(o.grid_points - 1);
      z1s(i) = lo1 + t * (hi1 - lo1);
      z2s(i) = lo2 + t * (hi2 - lo2);
    }
    const cn::Matrix cdf = cn::joint_cdf_grid(chain, z1s, z2s, x);
    cn::csv::Table table;
    table.header = {"z1", "z2", "cdf"};
    for (Eigen::Index i = 0; i < z1s.size(); ++i) {
      for (Eigen::Index j = 0; j < z2s.size(); ++j) {
        table.rows.push_back({cn::csv::format_double(z1s(i)), cn::csv::format_double(z2s(j)),
                              cn::csv::format_double(cdf(i, j))});
      }
    }
    const std::string out = resolve_out(g, o.grid_out);
    cn::csv::write_table(out, table);
    std::cout << "wrote " << z1s.size() * z2s.size() << " joint CDF points to " << out << "\n";
    did_something = true;
  }

  if (o.z.size() == 2) {
    std::cout << "joint cdf(" << o.z[0] << ", " << o.z[1]
              << ") = " << cn::joint_cdf(chain, o.z[0], o.z[1], x) << "\n";
    did_something = true;
  } else if (!o.z.empty()) {
    throw cn::ConfigError("--z takes exactly two values");
  }

  if (!did_something) {
    throw cn::ConfigError("chain-eval needs --samples, --grid-points, or --z");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional distribution estimation with collaborating networks"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI file ([subcommand] sections)");
  app.set_version_flag("--version", "cn 1.0.0");

  GlobalOpts global;
  app.add_option("--seed", global.seed, "Root random seed")->capture_default_str();
  app.add_option("--out-dir", global.out_dir, "Directory prefix for output files")
      ->envname("CN_OUT_DIR");
  app.add_option("--threads", global.threads, "Worker threads for linear algebra")
      ->envname("CN_THREADS");

  auto synth = std::make_shared<SynthOpts>();
  CLI::App* synth_cmd = app.add_subcommand("synth", "Draw a synthetic dataset to CSV");
  synth_cmd->fallthrough();
  synth_cmd->add_option("--family", synth->family, "Data-generating family")->required();
  synth_cmd->add_option("--n", synth->n, "Sample count (0 = family default)")
      ->capture_default_str();
  synth_cmd->add_option("--out", synth->out, "Dataset path")->capture_default_str();
  synth_cmd->add_option("--manifest", synth->manifest,
                        "Manifest path (default: <out>.manifest.json)");
  synth_cmd->callback([synth, &global] { run_synth(*synth, global); });

  auto train = std::make_shared<TrainOpts>();
  CLI::App* train_cmd = app.add_subcommand("train", "Fit a model on a CSV dataset");
  train_cmd->fallthrough();
  train_cmd->add_option("--data", train->data, "Dataset path")->required();
  train_cmd->add_option("--model", train->model, "Checkpoint path")->capture_default_str();
  train_cmd->add_option("--trace", train->trace, "Loss trace path (default: <model>.trace.csv)");
  train_cmd->add_option("--split", train->split, "Training fraction")->capture_default_str();
  train_cmd->add_option("--variant", train->variant, "cn_full, g_only, or t_g")
      ->capture_default_str();
  train_cmd->add_option("--family", train->oracle_family,
                        "Family providing the quantile oracle (t_g only)");
  add_training_flags(train_cmd, train->tc);
  train_cmd->callback([train, &global] { run_train(*train, global); });

  auto eval = std::make_shared<EvalOpts>();
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a checkpoint or an analytic law");
  eval_cmd->fallthrough();
  eval_cmd->add_option("--model", eval->model, "Checkpoint path");
  eval_cmd->add_option("--data", eval->data, "Dataset path")->required();
  eval_cmd->add_option("--source", eval->source, "Queried side: g or f")->capture_default_str();
  eval_cmd->add_option("--oracle", eval->oracle, "Score this family's analytic law instead");
  eval_cmd->add_option("--report", eval->report, "Metrics record path")->capture_default_str();
  eval_cmd->add_option("--sharpness", eval->sharpness,
                       "Sharpness table path (default: <report>.sharpness.csv)");
  eval_cmd->add_option("--calibration", eval->calibration,
                       "Calibration-gap table path (default: <report>.calibration.csv)");
  eval_cmd->add_option("--split", eval->split, "Training fraction (oracle runs only)")
      ->capture_default_str();
  eval_cmd->add_option("--median-oracle", eval->median_oracle,
                       "Family whose analytic medians anchor the MAE");
  eval_cmd->callback([eval, &global] { run_eval(*eval, global); });

  auto compare = std::make_shared<CompareOpts>();
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "Replicated comparison across estimators");
  compare_cmd->fallthrough();
  compare_cmd->add_option("--family", compare->families, "Families to compare (repeatable)")
      ->required()
      ->delimiter(',');
  compare_cmd->add_option("--replications", compare->replications, "Replication count")
      ->capture_default_str();
  compare_cmd->add_option("--split", compare->split, "Training fraction")->capture_default_str();
  compare_cmd->add_option("--n", compare->n, "Sample count (0 = family default)")
      ->capture_default_str();
  compare_cmd->add_option("--methods", compare->methods, "Methods to score")
      ->delimiter(',')
      ->capture_default_str();
  compare_cmd->add_option("--out", compare->out, "Output table path")->capture_default_str();
  add_training_flags(compare_cmd, compare->tc);
  compare_cmd->callback([compare, &global] { run_compare(*compare, global); });

  auto conv = std::make_shared<ConvergenceOpts>();
  CLI::App* conv_cmd =
      app.add_subcommand("convergence", "Goodness of fit versus training-set size");
  conv_cmd->fallthrough();
  conv_cmd->add_option("--family", conv->family, "Data-generating family")
      ->capture_default_str();
  conv_cmd->add_option("--n-grid", conv->n_grid, "Training sizes")
      ->delimiter(',')
      ->capture_default_str();
  conv_cmd->add_option("--variants", conv->variants, "Variants to fit")
      ->delimiter(',')
      ->capture_default_str();
  conv_cmd->add_option("--n-test", conv->n_test, "Held-out rows per cell")
      ->capture_default_str();
  conv_cmd->add_option("--out", conv->out, "Output table path")->capture_default_str();
  add_training_flags(conv_cmd, conv->tc);
  conv_cmd->callback([conv, &global] { run_convergence(*conv, global); });

  auto chain_train = std::make_shared<ChainTrainOpts>();
  CLI::App* chain_train_cmd =
      app.add_subcommand("chain-train", "Fit a chain of models on multi-outcome data");
  chain_train_cmd->fallthrough();
  chain_train_cmd->add_option("--data", chain_train->data, "Dataset path")->required();
  chain_train_cmd->add_option("--model", chain_train->model, "Chain checkpoint path")
      ->capture_default_str();
  chain_train_cmd->add_option("--order", chain_train->order, "Outcome order, e.g. 1,0")
      ->delimiter(',');
  chain_train_cmd->add_option("--sample-count", chain_train->sample_count,
                              "Draws behind each joint CDF value")
      ->capture_default_str();
  chain_train_cmd->add_option("--split", chain_train->split, "Training fraction")
      ->capture_default_str();
  chain_train_cmd->add_option("--variant", chain_train->variant, "cn_full or g_only")
      ->capture_default_str();
  add_training_flags(chain_train_cmd, chain_train->tc);
  chain_train_cmd->callback([chain_train, &global] { run_chain_train(*chain_train, global); });

  auto chain_eval = std::make_shared<ChainEvalOpts>();
  CLI::App* chain_eval_cmd =
      app.add_subcommand("chain-eval", "Query a chain checkpoint at one feature vector");
  chain_eval_cmd->fallthrough();
  chain_eval_cmd->add_option("--model", chain_eval->model, "Chain checkpoint path")->required();
  chain_eval_cmd->add_option("--x", chain_eval->x, "Feature vector, e.g. 0.5,1.0")
      ->required()
      ->delimiter(',');
  chain_eval_cmd->add_option("--samples", chain_eval->samples, "Joint draws to write");
  chain_eval_cmd->add_option("--samples-out", chain_eval->samples_out, "Joint draws path")
      ->capture_default_str();
  chain_eval_cmd->add_option("--grid-points", chain_eval->grid_points,
                             "Joint CDF grid resolution per axis");
  chain_eval_cmd->add_option("--grid-out", chain_eval->grid_out, "Joint CDF table path")
      ->capture_default_str();
  chain_eval_cmd->add_option("--z", chain_eval->z, "Point z1,z2 for one joint CDF value")
      ->delimiter(',');
  chain_eval_cmd->callback([chain_eval, &global] { run_chain_eval(*chain_eval, global); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const cn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cn::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const cn::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const cn::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
