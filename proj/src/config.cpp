// SPDX-License-Identifier: Apache-2.0
#include "livlr/config.hpp"

#include <fstream>
#include <set>

#include "livlr/errors.hpp"

namespace livlr {

std::string to_string(RiVariant v) {
  switch (v) {
    case RiVariant::kDavl: return "DAVL";
    case RiVariant::kRiGcn: return "RI_GCN";
    case RiVariant::kRiAt: return "RI_AT";
    case RiVariant::kRiConcat: return "RI_CONCAT";
  }
  return "?";
}

std::string to_string(QuestionSetting s) { return s == QuestionSetting::kOpenEnded ? "OE" : "MC"; }

std::string to_string(Precision p) { return p == Precision::kSingle ? "single" : "double"; }

RiVariant parse_ri_variant(std::string_view s) {
  if (s == "DAVL") return RiVariant::kDavl;
  if (s == "RI_GCN") return RiVariant::kRiGcn;
  if (s == "RI_AT") return RiVariant::kRiAt;
  if (s == "RI_CONCAT") return RiVariant::kRiConcat;
  throw ConfigError("ri_variant must be one of DAVL, RI_GCN, RI_AT, RI_CONCAT; got '" + std::string(s) + "'");
}

QuestionSetting parse_question_setting(std::string_view s) {
  if (s == "OE") return QuestionSetting::kOpenEnded;
  if (s == "MC") return QuestionSetting::kMultiChoice;
  throw ConfigError("question_setting must be OE or MC; got '" + std::string(s) + "'");
}

Precision parse_precision(std::string_view s) {
  if (s == "single") return Precision::kSingle;
  if (s == "double") return Precision::kDouble;
  throw ConfigError("precision must be single or double; got '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be at least 1");
  };
  positive(d, "d");
  positive(d_a, "d_a");
  positive(d_o, "d_o");
  positive(d_c, "d_c");
  positive(d_t, "d_t");
  positive(N_f, "N_f");
  positive(N_o, "N_o");
  positive(N_s, "N_s");
  positive(N_t, "N_t");
  positive(N_r, "N_r");
  positive(N_n, "N_n");
  positive(N_h, "N_h");
  positive(N_k, "N_k");
  positive(classifier_hidden, "classifier_hidden");
  positive(gcn_layers, "gcn_layers");
  positive(batch_size, "batch_size");
  if (d % 2 != 0) throw ConfigError("d must be even (BiLSTM halves), got " + std::to_string(d));
  if (d % N_h != 0) {
    throw ConfigError("N_h (" + std::to_string(N_h) + ") must divide d (" + std::to_string(d) + ")");
  }
  if (N_r < 2) throw ConfigError("N_r must leave room for the predicate role and at least one argument role");
  if (answer_set_size < 2) throw ConfigError("answer_set_size must be at least 2");
  if (question_setting == QuestionSetting::kMultiChoice && N_k < 2) {
    throw ConfigError("multiple-choice needs N_k >= 2");
  }
  if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
}

ModelConfig preset(std::string_view name) {
  ModelConfig c;
  if (name == "desk") {
    c.lr = 1e-3;
    c.weight_decay = 0.0;
    c.batch_size = 16;
    c.epochs = 100;
    return c;
  }
  if (name == "tiny") {
    c.d = 8;
    c.d_a = 8;
    c.d_o = 8;
    c.d_c = 8;
    c.d_t = 8;
    c.N_f = 2;
    c.N_o = 3;
    c.N_s = 2;
    c.N_t = 4;
    c.N_n = 2;
    c.N_h = 2;
    c.N_k = 4;
    c.answer_set_size = 4;
    c.classifier_hidden = 8;
    c.lr = 5e-3;
    c.weight_decay = 0.0;
    c.batch_size = 8;
    c.epochs = 300;
    return c;
  }
  if (name == "paper") {
    c.d = 512;
    c.d_a = 2048;
    c.d_o = 2048;
    c.d_c = 768;
    c.d_t = 768;
    c.N_f = 64;
    c.N_o = 10;
    c.N_s = 12;
    c.N_t = 20;
    c.N_n = 5;
    c.N_h = 16;
    c.N_k = 4;
    c.answer_set_size = 1000;
    c.classifier_hidden = 512;
    c.lr = 8e-5;
    c.weight_decay = 0.01;
    c.batch_size = 256;
    c.epochs = 80;
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected tiny, desk or paper)");
}

nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["d"] = c.d;
  j["d_a"] = c.d_a;
  j["d_o"] = c.d_o;
  j["d_c"] = c.d_c;
  j["d_t"] = c.d_t;
  j["N_f"] = c.N_f;
  j["N_o"] = c.N_o;
  j["N_s"] = c.N_s;
  j["N_t"] = c.N_t;
  j["N_r"] = c.N_r;
  j["N_n"] = c.N_n;
  j["N_h"] = c.N_h;
  j["N_k"] = c.N_k;
  j["answer_set_size"] = c.answer_set_size;
  j["classifier_hidden"] = c.classifier_hidden;
  j["gcn_layers"] = c.gcn_layers;
  j["ri_variant"] = to_string(c.ri_variant);
  j["question_setting"] = to_string(c.question_setting);
  j["precision"] = to_string(c.precision);
  j["head_output_map"] = c.head_output_map;
  j["davl_normalize_messages"] = c.davl_normalize_messages;
  j["davl_attention_gcn"] = c.davl_attention_gcn;
  j["seed"] = c.seed;
  j["lr"] = c.lr;
  j["betas"] = {c.beta1, c.beta2};
  j["eps"] = c.eps;
  j["weight_decay"] = c.weight_decay;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ModelConfig c = preset(j.contains("preset") ? j.at("preset").get<std::string>() : std::string("desk"));
  static const std::set<std::string> known = {
      "preset", "d", "d_a", "d_o", "d_c", "d_t", "N_f", "N_o", "N_s", "N_t", "N_r", "N_n", "N_h", "N_k",
      "answer_set_size", "classifier_hidden", "gcn_layers", "ri_variant", "question_setting", "precision",
      "head_output_map", "davl_normalize_messages", "davl_attention_gcn", "seed", "lr", "betas", "eps",
      "weight_decay", "batch_size", "epochs"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  try {
    auto size = [&](const char* key, std::size_t& field) {
      if (!j.contains(key)) return;
      const auto& v = j.at(key);
      if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError(std::string(key) + " must be a non-negative integer");
      }
      field = v.get<std::size_t>();
    };
    auto real = [&](const char* key, double& field) {
      if (j.contains(key)) field = j.at(key).get<double>();
    };
    auto flag = [&](const char* key, bool& field) {
      if (j.contains(key)) field = j.at(key).get<bool>();
    };
    size("d", c.d);
    size("d_a", c.d_a);
    size("d_o", c.d_o);
    size("d_c", c.d_c);
    size("d_t", c.d_t);
    size("N_f", c.N_f);
    size("N_o", c.N_o);
    size("N_s", c.N_s);
    size("N_t", c.N_t);
    size("N_r", c.N_r);
    size("N_n", c.N_n);
    size("N_h", c.N_h);
    size("N_k", c.N_k);
    size("answer_set_size", c.answer_set_size);
    size("classifier_hidden", c.classifier_hidden);
    size("gcn_layers", c.gcn_layers);
    size("batch_size", c.batch_size);
    size("epochs", c.epochs);
    if (j.contains("ri_variant")) c.ri_variant = parse_ri_variant(j.at("ri_variant").get<std::string>());
    if (j.contains("question_setting")) {
      c.question_setting = parse_question_setting(j.at("question_setting").get<std::string>());
    }
    if (j.contains("precision")) c.precision = parse_precision(j.at("precision").get<std::string>());
    flag("head_output_map", c.head_output_map);
    flag("davl_normalize_messages", c.davl_normalize_messages);
    flag("davl_attention_gcn", c.davl_attention_gcn);
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    real("lr", c.lr);
    real("eps", c.eps);
    real("weight_decay", c.weight_decay);
    if (j.contains("betas")) {
      const auto& b = j.at("betas");
      if (!b.is_array() || b.size() != 2) throw ConfigError("betas must be a two-element array");
      c.beta1 = b[0].get<double>();
      c.beta2 = b[1].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string canonical_json(const ModelConfig& cfg) { return to_json(cfg).dump(); }

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ModelConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file '" + path + "'");
  out << to_json(cfg).dump(2) << '\n';
}

}  // namespace livlr
