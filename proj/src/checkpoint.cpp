#include "lcdr/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

#include "lcdr/errors.hpp"

namespace lcdr {

namespace {

using Json = nlohmann::ordered_json;

const char* act_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

Activation act_from(const std::string& s, const std::string& path) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "identity") return Activation::Identity;
  throw ParseError(path + ": unknown activation '" + s + "'");
}

Json matrix_to_json(const DenseMatrix& m) {
  Json j;
  j["rows"] = m.rows;
  j["cols"] = m.cols;
  j["data"] = m.data;
  return j;
}

DenseMatrix matrix_from_json(const Json& j, const std::string& path) {
  DenseMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.rows * m.cols) {
    throw ParseError(path + ": matrix payload size mismatch");
  }
  m.data = data;
  return m;
}

Json mlp_to_json(const MlpParams& p) {
  Json layers = Json::array();
  for (const auto& l : p.layers) {
    Json jl;
    jl["act"] = act_name(l.act);
    jl["weight"] = matrix_to_json(l.weight);
    jl["bias"] = l.bias;
    layers.push_back(std::move(jl));
  }
  Json j;
  j["layers"] = std::move(layers);
  return j;
}

MlpParams mlp_from_json(const Json& j, const std::string& path) {
  MlpParams p;
  for (const auto& jl : j.at("layers")) {
    MlpLayer l;
    l.act = act_from(jl.at("act").get<std::string>(), path);
    l.weight = matrix_from_json(jl.at("weight"), path);
    l.bias = jl.at("bias").get<std::vector<double>>();
    if (l.bias.size() != l.weight.rows) {
      throw ParseError(path + ": bias width does not match layer output");
    }
    p.layers.push_back(std::move(l));
  }
  return p;
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out.good()) throw ConfigError("write failed: " + path);
}

Json read_json(const std::string& path, const char* expected_kind) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": invalid JSON: " + e.what());
  }
  if (!j.contains("version") || !j["version"].is_number_integer()) {
    throw ParseError(path + ": missing version tag");
  }
  if (j["version"].get<int>() != kCheckpointVersion) {
    throw ParseError(path + ": unsupported checkpoint version " +
                     std::to_string(j["version"].get<int>()));
  }
  if (j.value("kind", std::string()) != expected_kind) {
    throw ParseError(path + ": expected a '" + std::string(expected_kind) +
                     "' checkpoint, found '" + j.value("kind", std::string("?")) + "'");
  }
  return j;
}

}  // namespace

void save_stage_one(const std::string& path, const StageOneCheckpoint& ck) {
  Json j;
  j["version"] = kCheckpointVersion;
  j["kind"] = "stage1";
  j["seed"] = ck.seed;
  j["config_hash"] = ck.config_hash;
  j["mode"] = ck.mode;
  j["latent_dim"] = ck.ivae.latent_dim;
  j["ivae"] = Json{{"prior", mlp_to_json(ck.ivae.prior_net)},
                   {"encoder", mlp_to_json(ck.ivae.encoder_net)},
                   {"decoder", mlp_to_json(ck.ivae.decoder_net)}};
  j["lcvae"] = Json{{"encoder", mlp_to_json(ck.lcvae.encoder_net)},
                    {"decoder", mlp_to_json(ck.lcvae.decoder_net)}};
  j["reps"] = Json{{"z_lc", ck.reps.z_lc}, {"z", ck.reps.z}};
  write_json(path, j);
}

StageOneCheckpoint load_stage_one(const std::string& path) {
  const Json j = read_json(path, "stage1");
  StageOneCheckpoint ck;
  try {
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.config_hash = j.at("config_hash").get<std::uint64_t>();
    ck.mode = j.at("mode").get<std::string>();
    ck.ivae.latent_dim = j.at("latent_dim").get<std::size_t>();
    ck.lcvae.latent_dim = ck.ivae.latent_dim;
    ck.ivae.prior_net = mlp_from_json(j.at("ivae").at("prior"), path);
    ck.ivae.encoder_net = mlp_from_json(j.at("ivae").at("encoder"), path);
    ck.ivae.decoder_net = mlp_from_json(j.at("ivae").at("decoder"), path);
    ck.lcvae.encoder_net = mlp_from_json(j.at("lcvae").at("encoder"), path);
    ck.lcvae.decoder_net = mlp_from_json(j.at("lcvae").at("decoder"), path);
    ck.reps.z_lc = j.at("reps").at("z_lc").get<std::vector<std::vector<double>>>();
    ck.reps.z = j.at("reps").at("z").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": malformed stage-one checkpoint: " + e.what());
  }
  return ck;
}

void save_stage_two(const std::string& path, const StageTwoCheckpoint& ck) {
  Json j;
  j["version"] = kCheckpointVersion;
  j["kind"] = "stage2";
  j["seed"] = ck.seed;
  j["config_hash"] = ck.config_hash;
  j["method"] = ck.method;
  j["has_head"] = ck.has_head;
  j["mf"] = Json{{"P", matrix_to_json(ck.mf.P)},
                 {"Q", matrix_to_json(ck.mf.Q)},
                 {"b_u", ck.mf.b_u},
                 {"b_i", ck.mf.b_i},
                 {"global_bias", ck.mf.global_bias}};
  j["head"] = Json{{"H", matrix_to_json(ck.head.H)}, {"Qc", matrix_to_json(ck.head.Qc)}};
  j["features"] = ck.features;
  write_json(path, j);
}

StageTwoCheckpoint load_stage_two(const std::string& path) {
  const Json j = read_json(path, "stage2");
  StageTwoCheckpoint ck;
  try {
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.config_hash = j.at("config_hash").get<std::uint64_t>();
    ck.method = j.at("method").get<std::string>();
    ck.has_head = j.at("has_head").get<bool>();
    ck.mf.P = matrix_from_json(j.at("mf").at("P"), path);
    ck.mf.Q = matrix_from_json(j.at("mf").at("Q"), path);
    ck.mf.b_u = j.at("mf").at("b_u").get<std::vector<double>>();
    ck.mf.b_i = j.at("mf").at("b_i").get<std::vector<double>>();
    ck.mf.global_bias = j.at("mf").at("global_bias").get<double>();
    ck.head.H = matrix_from_json(j.at("head").at("H"), path);
    ck.head.Qc = matrix_from_json(j.at("head").at("Qc"), path);
    ck.features = j.at("features").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": malformed stage-two checkpoint: " + e.what());
  }
  return ck;
}

}  // namespace lcdr
