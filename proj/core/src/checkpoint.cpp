#include "cn/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "checkpoint_detail.hpp"
#include "cn/csv.hpp"
#include "cn/errors.hpp"

namespace cn {

namespace {

using nlohmann::json;

json to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    arr.push_back(v(i));
  }
  return arr;
}

json to_json(const Matrix& m) {
  json out;
  out["rows"] = m.rows();
  out["cols"] = m.cols();
  json data = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      data.push_back(m(r, c));
    }
  }
  out["data"] = std::move(data);
  return out;
}

Vector vector_from(const json& arr) {
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return v;
}

Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw IoError("checkpoint: matrix payload size mismatch");
  }
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      m(r, c) = data[k++].get<double>();
    }
  }
  return m;
}

const char* activation_name(Activation a) {
  return a == Activation::elu ? "elu" : "identity";
}

Activation activation_from(const std::string& s) {
  if (s == "elu") return Activation::elu;
  if (s == "identity") return Activation::identity;
  throw IoError("checkpoint: unknown activation '" + s + "'");
}

const char* norm_name(NormKind k) {
  switch (k) {
    case NormKind::none: return "none";
    case NormKind::learnable_affine: return "learnable_affine";
    case NormKind::fixed_affine: return "fixed_affine";
  }
  return "none";
}

NormKind norm_from(const std::string& s) {
  if (s == "none") return NormKind::none;
  if (s == "learnable_affine") return NormKind::learnable_affine;
  if (s == "fixed_affine") return NormKind::fixed_affine;
  throw IoError("checkpoint: unknown normalization '" + s + "'");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::cn_full: return "cn_full";
    case Variant::g_only_fixed_f: return "g_only_fixed_f";
    case Variant::t_g_oracle_f: return "t_g_oracle_f";
  }
  return "cn_full";
}

Variant variant_from(const std::string& s) {
  if (s == "cn_full") return Variant::cn_full;
  if (s == "g_only_fixed_f") return Variant::g_only_fixed_f;
  if (s == "t_g_oracle_f") return Variant::t_g_oracle_f;
  throw IoError("checkpoint: unknown variant '" + s + "'");
}

json network_to_json(const Network& net) {
  json layers = json::array();
  for (const Network::Layer& l : net.layers()) {
    json jl;
    jl["inputs"] = l.spec.inputs;
    jl["outputs"] = l.spec.outputs;
    jl["activation"] = activation_name(l.spec.activation);
    jl["norm"] = norm_name(l.spec.norm);
    jl["fixed_shift"] = l.spec.fixed_shift;
    jl["fixed_scale"] = l.spec.fixed_scale;
    jl["w"] = to_json(l.w);
    jl["b"] = to_json(l.b);
    jl["gamma"] = to_json(l.gamma);
    jl["beta"] = to_json(l.beta);
    jl["run_mean"] = to_json(l.run_mean);
    jl["run_var"] = to_json(l.run_var);
    layers.push_back(std::move(jl));
  }
  return json{{"layers", std::move(layers)}};
}

Network network_from_json(const json& j) {
  std::vector<LayerSpec> specs;
  for (const json& jl : j.at("layers")) {
    LayerSpec s;
    s.inputs = jl.at("inputs").get<int>();
    s.outputs = jl.at("outputs").get<int>();
    s.activation = activation_from(jl.at("activation").get<std::string>());
    s.norm = norm_from(jl.at("norm").get<std::string>());
    s.fixed_shift = jl.at("fixed_shift").get<double>();
    s.fixed_scale = jl.at("fixed_scale").get<double>();
    specs.push_back(s);
  }
  Network net(specs, 0);
  auto& layers = net.layers();
  const json& jl_list = j.at("layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const json& jl = jl_list[i];
    Network::Layer& l = layers[i];
    l.w = matrix_from(jl.at("w"));
    l.b = vector_from(jl.at("b"));
    l.gamma = vector_from(jl.at("gamma"));
    l.beta = vector_from(jl.at("beta"));
    l.run_mean = vector_from(jl.at("run_mean"));
    l.run_var = vector_from(jl.at("run_var"));
    if (l.w.rows() != l.spec.inputs || l.w.cols() != l.spec.outputs ||
        l.b.size() != l.spec.outputs) {
      throw IoError("checkpoint: layer payload does not match its shape");
    }
  }
  net.set_mode(Mode::eval);
  return net;
}

json config_to_json(const TrainingConfig& cfg) {
  json j;
  j["pretrain_iters"] = cfg.pretrain_iters;
  j["joint_iters"] = cfg.joint_iters;
  j["batch_size"] = cfg.batch_size;
  j["g_step_size"] = cfg.g_step_size;
  j["f_step_size"] = cfg.f_step_size;
  j["g_hidden"] = cfg.g_hidden;
  j["f_hidden"] = cfg.f_hidden;
  j["q_dist"] = cfg.q_dist == QDist::uniform ? "uniform" : "beta";
  j["q_beta_a"] = cfg.q_beta_a;
  j["q_beta_b"] = cfg.q_beta_b;
  j["margin_k"] = cfg.margin_k;
  j["ext_lambda"] = cfg.ext_lambda;
  j["variant"] = variant_name(cfg.variant);
  j["seed"] = cfg.seed;
  j["inversion_points"] = cfg.inversion_points;
  return j;
}

TrainingConfig config_from_json(const json& j) {
  TrainingConfig cfg;
  cfg.pretrain_iters = j.at("pretrain_iters").get<int>();
  cfg.joint_iters = j.at("joint_iters").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.g_step_size = j.at("g_step_size").get<double>();
  cfg.f_step_size = j.at("f_step_size").get<double>();
  cfg.g_hidden = j.at("g_hidden").get<std::vector<int>>();
  cfg.f_hidden = j.at("f_hidden").get<std::vector<int>>();
  cfg.q_dist = j.at("q_dist").get<std::string>() == "beta" ? QDist::beta : QDist::uniform;
  cfg.q_beta_a = j.at("q_beta_a").get<double>();
  cfg.q_beta_b = j.at("q_beta_b").get<double>();
  cfg.margin_k = j.at("margin_k").get<double>();
  cfg.ext_lambda = j.at("ext_lambda").get<double>();
  cfg.variant = variant_from(j.at("variant").get<std::string>());
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.inversion_points = j.at("inversion_points").get<int>();
  return cfg;
}

}  // namespace

namespace detail {

json model_to_json(const TrainedCnModel& model) {
  json j;
  j["format"] = "cn-model";
  j["format_version"] = kCheckpointFormatVersion;
  j["variant"] = variant_name(model.variant);
  j["config"] = config_to_json(model.config);
  j["feature_mean"] = to_json(model.feature_mean);
  j["feature_sd"] = to_json(model.feature_sd);
  j["outcome_mean"] = model.outcome_mean;
  j["outcome_sd"] = model.outcome_sd;
  j["train_fraction"] = model.train_fraction;
  j["split_seed"] = model.split_seed;
  j["grid"] = json{{"lo", model.grid.lo}, {"hi", model.grid.hi}, {"points", model.grid.points}};
  j["g_net"] = network_to_json(model.g_net);
  j["f_net"] = model.f_net.has_value() ? network_to_json(*model.f_net) : json();
  if (model.fixed_f.has_value()) {
    const FixedF& ff = *model.fixed_f;
    if (ff.kind == FixedF::Kind::uniform) {
      j["fixed_f"] = json{{"kind", "uniform"}, {"lo", ff.lo}, {"hi", ff.hi}};
    } else {
      if (ff.oracle_name.empty()) {
        throw ConfigError("checkpoint: cannot serialize an unnamed oracle fixed f");
      }
      j["fixed_f"] = json{{"kind", "oracle"}, {"name", ff.oracle_name}};
    }
  } else {
    j["fixed_f"] = json();
  }
  j["trace"] = json{{"pretrain_g_loss", model.trace.pretrain_g_loss},
                    {"joint_g_loss", model.trace.joint_g_loss},
                    {"joint_f_loss", model.trace.joint_f_loss}};
  j["collapse_warning"] = model.collapse_warning;
  return j;
}

TrainedCnModel model_from_json(const json& j, const std::string& context) {
  try {
    if (j.at("format").get<std::string>() != "cn-model") {
      throw IoError("corrupt checkpoint " + context + ": not a model checkpoint");
    }
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw IoError("corrupt checkpoint " + context + ": unsupported format version");
    }
    TrainedCnModel model;
    model.variant = variant_from(j.at("variant").get<std::string>());
    model.config = config_from_json(j.at("config"));
    model.feature_mean = vector_from(j.at("feature_mean"));
    model.feature_sd = vector_from(j.at("feature_sd"));
    model.outcome_mean = j.at("outcome_mean").get<double>();
    model.outcome_sd = j.at("outcome_sd").get<double>();
    model.train_fraction = j.at("train_fraction").get<double>();
    model.split_seed = j.at("split_seed").get<std::uint64_t>();
    model.grid.lo = j.at("grid").at("lo").get<double>();
    model.grid.hi = j.at("grid").at("hi").get<double>();
    model.grid.points = j.at("grid").at("points").get<int>();
    model.g_net = network_from_json(j.at("g_net"));
    if (!j.at("f_net").is_null()) {
      model.f_net = network_from_json(j.at("f_net"));
    }
    if (!j.at("fixed_f").is_null()) {
      const json& ff = j.at("fixed_f");
      if (ff.at("kind").get<std::string>() == "uniform") {
        model.fixed_f =
            FixedF::make_uniform(ff.at("lo").get<double>(), ff.at("hi").get<double>());
      } else {
        FixedF oracle;
        oracle.kind = FixedF::Kind::oracle;
        oracle.oracle_name = ff.at("name").get<std::string>();
        model.fixed_f = std::move(oracle);
      }
    }
    model.trace.pretrain_g_loss = j.at("trace").at("pretrain_g_loss").get<std::vector<double>>();
    model.trace.joint_g_loss = j.at("trace").at("joint_g_loss").get<std::vector<double>>();
    model.trace.joint_f_loss = j.at("trace").at("joint_f_loss").get<std::vector<double>>();
    model.collapse_warning = j.at("collapse_warning").get<bool>();
    return model;
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError("corrupt checkpoint " + context + ": " + e.what());
  }
}

}  // namespace detail

void checkpoint_save(const TrainedCnModel& model, const std::string& path) {
  csv::write_text_atomic(path, detail::model_to_json(model).dump());
}

TrainedCnModel checkpoint_load(const std::string& path) {
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
  return detail::model_from_json(j, path);
}

}  // namespace cn
