// SPDX-License-Identifier: Apache-2.0
#include "livlr/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "livlr/errors.hpp"

namespace livlr::data {
namespace {

constexpr visual::FrameSize kFrame{320.0, 240.0};
constexpr std::size_t kChannels = 4;

using Rng = std::mt19937_64;

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

// Values are stored as float so that files and single-precision runs agree.
double as_float(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<double> normal_values(Rng& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = as_float(scale * dist(rng));
  return out;
}

// base + scale * N(0, 1), elementwise.
std::vector<double> jitter(Rng& rng, const std::vector<double>& base, double scale) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) out[i] = as_float(base[i] + scale * dist(rng));
  return out;
}

Tensor rows_of(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor::matrix(rows, cols, std::move(values));
}

// Class prototypes and fixed templates shared by every sample of a task.
struct Prototypes {
  std::vector<std::vector<double>> appearance;  // per class, [d_a]
  std::vector<std::vector<double>> class_attr;  // per class, [d_c]
  std::vector<std::vector<double>> prefix;      // per class, [prefix_len x d_t]
  std::vector<std::vector<double>> candidate;   // per class, [N_t x d_t]
  std::vector<std::vector<double>> selector;    // per channel, [d_t]
  std::vector<double> question;                 // [N_t x d_t]
  std::vector<double> entity;                   // [d_t]
  std::size_t prefix_len = 1;
};

Prototypes make_prototypes(const SyntheticTaskSpec& spec, const ModelConfig& cfg) {
  auto rng = make_rng(spec.seed, 0x70726f746fULL);
  Prototypes p;
  p.prefix_len = std::max<std::size_t>(1, cfg.N_t / 2);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    p.appearance.push_back(normal_values(rng, cfg.d_a));
    p.class_attr.push_back(normal_values(rng, cfg.d_c));
    p.prefix.push_back(normal_values(rng, p.prefix_len * cfg.d_t));
    p.candidate.push_back(normal_values(rng, cfg.N_t * cfg.d_t));
  }
  for (std::size_t k = 0; k < kChannels; ++k) p.selector.push_back(normal_values(rng, cfg.d_t));
  p.question = normal_values(rng, cfg.N_t * cfg.d_t);
  p.entity = normal_values(rng, cfg.d_t);
  return p;
}

visual::Box random_box(Rng& rng) {
  std::uniform_real_distribution<double> frac(0.1, 0.5), unit(0.0, 1.0);
  visual::Box b;
  b.w = as_float(frac(rng) * kFrame.width);
  b.h = as_float(frac(rng) * kFrame.height);
  b.x = as_float(unit(rng) * (kFrame.width - b.w));
  b.y = as_float(unit(rng) * (kFrame.height - b.h));
  return b;
}

// One predicate on token 0 and up to two arguments covering the rest.
linguistic::SrlParse make_parse(Rng& rng, std::size_t n_tokens, std::size_t n_roles) {
  linguistic::SrlParse p;
  p.n_tokens = n_tokens;
  if (n_tokens < 2) return p;
  std::uniform_int_distribution<int> role(2, static_cast<int>(n_roles));
  p.predicates.push_back({0, 1});
  const std::size_t split = n_tokens == 2 ? 2 : 1 + (n_tokens - 1) / 2;
  p.arguments.push_back({{1, split}, role(rng), 0});
  if (split < n_tokens) p.arguments.push_back({{split, n_tokens}, role(rng), 0});
  return p;
}

void plant_channel(std::size_t channel, std::size_t cls, Sample& s, Rng& rng, const Prototypes& proto,
                   const ModelConfig& cfg, double noise) {
  switch (channel) {
    case 0:
      for (auto& f : s.clip.frames) f.appearance = Tensor::from_data({cfg.d_a}, jitter(rng, proto.appearance[cls], noise));
      break;
    case 1:
      for (auto& f : s.clip.frames) {
        std::vector<double> attrs;
        for (std::size_t o = 0; o < cfg.N_o; ++o) {
          auto row = jitter(rng, proto.class_attr[cls], noise);
          attrs.insert(attrs.end(), row.begin(), row.end());
        }
        f.class_attr = rows_of(cfg.N_o, cfg.d_c, std::move(attrs));
      }
      break;
    case 2: {
      auto& tokens = s.sentences[0].features.tokens;
      auto values = std::vector<double>(tokens.data().begin(), tokens.data().end());
      auto prefix = jitter(rng, proto.prefix[cls], noise);
      std::copy(prefix.begin(), prefix.end(), values.begin());
      tokens = rows_of(cfg.N_t, cfg.d_t, std::move(values));
      break;
    }
    case 3: {
      // The role carries the class; the argument's tokens are a fixed,
      // class-independent entity so the tokens themselves leak nothing.
      auto& sentence = s.sentences[0];
      auto& arg = sentence.parse.arguments.at(0);
      arg.role = 2 + static_cast<int>(cls);
      auto values = std::vector<double>(sentence.features.tokens.data().begin(), sentence.features.tokens.data().end());
      for (std::size_t t = arg.span.lo; t < arg.span.hi; ++t) {
        auto row = jitter(rng, proto.entity, noise);
        std::copy(row.begin(), row.end(), values.begin() + static_cast<std::ptrdiff_t>(t * cfg.d_t));
      }
      sentence.features.tokens = rows_of(cfg.N_t, cfg.d_t, std::move(values));
      break;
    }
  }
}

std::size_t channel_of(SignalSource s) {
  switch (s) {
    case SignalSource::kHolisticVisual: return 0;
    case SignalSource::kFinegrainedVisual: return 1;
    case SignalSource::kHolisticLinguistic: return 2;
    case SignalSource::kFinegrainedLinguistic: return 3;
    case SignalSource::kQuestionDependent: break;
  }
  throw ContractError("question-dependent data has no single channel");
}

void check_spec(const SyntheticTaskSpec& spec, const ModelConfig& cfg) {
  if (spec.n_classes < 2) throw ConfigError("n_classes must be at least 2");
  if (cfg.question_setting == QuestionSetting::kOpenEnded && spec.n_classes > cfg.answer_set_size) {
    throw ConfigError("n_classes (" + std::to_string(spec.n_classes) + ") exceeds answer_set_size (" +
                      std::to_string(cfg.answer_set_size) + ")");
  }
  if (!(spec.noise_scale >= 0.0)) throw ConfigError("noise_scale must be non-negative");
  const bool uses_roles = spec.signal_source == SignalSource::kFinegrainedLinguistic ||
                          spec.signal_source == SignalSource::kQuestionDependent;
  if (uses_roles && (cfg.N_t < 2 || spec.n_classes + 1 > cfg.N_r)) {
    throw ConfigError("role-planted classes need N_t >= 2 and n_classes <= N_r - 1");
  }
  if (cfg.question_setting == QuestionSetting::kMultiChoice && spec.n_classes < cfg.N_k) {
    throw ConfigError("multiple-choice data needs n_classes >= N_k distinct candidates");
  }
}

nlohmann::json matrix_json(const Tensor& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < t.dim(0); ++r) {
    auto d = t.data().subspan(r * t.dim(1), t.dim(1));
    rows.push_back(std::vector<double>(d.begin(), d.end()));
  }
  return rows;
}

Tensor matrix_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw DataError(std::string(what) + " must be a non-empty array of rows");
  const std::size_t cols = j[0].size();
  std::vector<double> values;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols) throw DataError(std::string(what) + " has ragged rows");
    for (const auto& v : row) values.push_back(v.get<double>());
  }
  return Tensor::matrix(j.size(), cols, std::move(values));
}

void require_shape(const Tensor& t, const Shape& expected, const std::string& what) {
  if (t.shape() != expected) {
    throw DataError(what + " has shape " + shape_str(t.shape()) + ", config expects " + shape_str(expected));
  }
}

void require_finite(const Tensor& t, const std::string& what) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw DataError(what + " holds non-finite values");
  }
}

}  // namespace

void validate_sample(const Sample& s, const ModelConfig& cfg) {
  if (s.clip.frames.size() != cfg.N_f) {
    throw DataError("sample has " + std::to_string(s.clip.frames.size()) + " frames, config expects N_f=" +
                    std::to_string(cfg.N_f));
  }
  s.clip.validate();
  for (const auto& f : s.clip.frames) {
    require_shape(f.appearance, {cfg.d_a}, "appearance");
    require_shape(f.objects, {cfg.N_o, cfg.d_o}, "objects");
    require_shape(f.class_attr, {cfg.N_o, cfg.d_c}, "class_attr");
    require_finite(f.appearance, "appearance");
    require_finite(f.objects, "objects");
    require_finite(f.class_attr, "class_attr");
  }
  if (s.sentences.size() != cfg.N_s) {
    throw DataError("sample has " + std::to_string(s.sentences.size()) + " sentences, config expects N_s=" +
                    std::to_string(cfg.N_s));
  }
  for (const auto& sent : s.sentences) {
    if (sent.features.tokens.rank() != 2 || sent.features.tokens.dim(1) != cfg.d_t) {
      throw DataError("sentence tokens must be [n x d_t]");
    }
    if (sent.parse.n_tokens != sent.features.tokens.dim(0)) throw DataError("parse and sentence token counts differ");
    require_finite(sent.features.tokens, "sentence tokens");
    try {
      sent.parse.validate(cfg.N_r);
    } catch (const IntegrityError& e) {
      throw DataError(std::string("invalid parse: ") + e.what());
    }
  }
  if (s.question.rank() != 2 || s.question.dim(1) != cfg.d_t || s.question.dim(0) == 0) {
    throw DataError("question must be [n x d_t], got " + shape_str(s.question.shape()));
  }
  require_finite(s.question, "question");
  if (cfg.question_setting == QuestionSetting::kOpenEnded) {
    if (s.label >= cfg.answer_set_size) {
      throw DataError("label " + std::to_string(s.label) + " outside the answer set of " +
                      std::to_string(cfg.answer_set_size));
    }
  } else {
    if (s.candidates.size() != cfg.N_k) {
      throw DataError("sample has " + std::to_string(s.candidates.size()) + " candidates, config expects N_k=" +
                      std::to_string(cfg.N_k));
    }
    for (const auto& c : s.candidates) {
      if (c.rank() != 2 || c.dim(1) != cfg.d_t || c.dim(0) == 0) throw DataError("candidate must be [n x d_t]");
      require_finite(c, "candidate");
    }
    if (s.label >= cfg.N_k) throw DataError("correct candidate index " + std::to_string(s.label) + " out of range");
  }
}

std::string to_string(SignalSource s) {
  switch (s) {
    case SignalSource::kHolisticVisual: return "holistic_visual";
    case SignalSource::kFinegrainedVisual: return "finegrained_visual";
    case SignalSource::kHolisticLinguistic: return "holistic_linguistic";
    case SignalSource::kFinegrainedLinguistic: return "finegrained_linguistic";
    case SignalSource::kQuestionDependent: return "question_dependent";
  }
  return "?";
}

SignalSource parse_signal_source(std::string_view s) {
  for (auto v : {SignalSource::kHolisticVisual, SignalSource::kFinegrainedVisual, SignalSource::kHolisticLinguistic,
                 SignalSource::kFinegrainedLinguistic, SignalSource::kQuestionDependent}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown signal_source '" + std::string(s) + "'");
}

nlohmann::json to_json(const SyntheticTaskSpec& spec) {
  return {{"n_samples", spec.n_samples},
          {"signal_source", to_string(spec.signal_source)},
          {"noise_scale", spec.noise_scale},
          {"n_classes", spec.n_classes},
          {"seed", spec.seed}};
}

SyntheticTaskSpec task_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("task spec must be a JSON object");
  static const std::set<std::string> known = {"n_samples", "signal_source", "noise_scale", "n_classes", "seed",
                                              "config"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown task spec key '" + key + "'");
  }
  SyntheticTaskSpec spec;
  try {
    if (j.contains("n_samples")) spec.n_samples = j.at("n_samples").get<std::size_t>();
    if (j.contains("signal_source")) spec.signal_source = parse_signal_source(j.at("signal_source").get<std::string>());
    if (j.contains("noise_scale")) spec.noise_scale = j.at("noise_scale").get<double>();
    if (j.contains("n_classes")) spec.n_classes = j.at("n_classes").get<std::size_t>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed task spec: ") + e.what());
  }
  return spec;
}

Dataset gen_synthetic(const SyntheticTaskSpec& spec, const ModelConfig& cfg) {
  check_spec(spec, cfg);
  const auto proto = make_prototypes(spec, cfg);
  const bool multi_choice = cfg.question_setting == QuestionSetting::kMultiChoice;
  Dataset ds;
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    // One stream per sample keeps samples independent of n_samples.
    auto rng = make_rng(spec.seed, i + 1);
    Sample s;
    for (std::size_t f = 0; f < cfg.N_f; ++f) {
      visual::FrameFeatures frame;
      frame.size = kFrame;
      frame.appearance = Tensor::from_data({cfg.d_a}, normal_values(rng, cfg.d_a));
      frame.objects = rows_of(cfg.N_o, cfg.d_o, normal_values(rng, cfg.N_o * cfg.d_o));
      frame.class_attr = rows_of(cfg.N_o, cfg.d_c, normal_values(rng, cfg.N_o * cfg.d_c));
      for (std::size_t o = 0; o < cfg.N_o; ++o) frame.boxes.push_back(random_box(rng));
      s.clip.frames.push_back(std::move(frame));
    }
    for (std::size_t k = 0; k < cfg.N_s; ++k) {
      linguistic::Sentence sent;
      sent.features.tokens = rows_of(cfg.N_t, cfg.d_t, normal_values(rng, cfg.N_t * cfg.d_t));
      sent.parse = make_parse(rng, cfg.N_t, cfg.N_r);
      s.sentences.push_back(std::move(sent));
    }
    auto question = jitter(rng, proto.question, spec.noise_scale);

    std::uniform_int_distribution<std::size_t> pick_class(0, spec.n_classes - 1);
    std::size_t cls = 0;
    if (spec.signal_source == SignalSource::kQuestionDependent) {
      std::array<std::size_t, kChannels> labels{};
      for (std::size_t ch = 0; ch < kChannels; ++ch) {
        labels[ch] = pick_class(rng);
        plant_channel(ch, labels[ch], s, rng, proto, cfg, spec.noise_scale);
      }
      const std::size_t chosen = std::uniform_int_distribution<std::size_t>(0, kChannels - 1)(rng);
      auto selector = jitter(rng, proto.selector[chosen], spec.noise_scale);
      std::copy(selector.begin(), selector.end(), question.begin());
      cls = labels[chosen];
      ds.planted_source.push_back(chosen);
    } else {
      cls = pick_class(rng);
      plant_channel(channel_of(spec.signal_source), cls, s, rng, proto, cfg, spec.noise_scale);
    }
    s.question = rows_of(cfg.N_t, cfg.d_t, std::move(question));

    if (multi_choice) {
      std::vector<std::size_t> others;
      for (std::size_t c = 0; c < spec.n_classes; ++c) {
        if (c != cls) others.push_back(c);
      }
      std::shuffle(others.begin(), others.end(), rng);
      std::vector<std::size_t> shown(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(cfg.N_k - 1));
      shown.push_back(cls);
      std::shuffle(shown.begin(), shown.end(), rng);
      for (std::size_t k = 0; k < shown.size(); ++k) {
        s.candidates.push_back(rows_of(cfg.N_t, cfg.d_t, jitter(rng, proto.candidate[shown[k]], spec.noise_scale)));
        if (shown[k] == cls) s.label = k;
      }
    } else {
      s.label = cls;
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

nlohmann::json sample_to_json(const Sample& s) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : s.clip.frames) {
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : f.boxes) boxes.push_back({b.x, b.y, b.w, b.h});
    auto app = f.appearance.data();
    frames.push_back({{"appearance", std::vector<double>(app.begin(), app.end())},
                      {"objects", matrix_json(f.objects)},
                      {"class_attr", matrix_json(f.class_attr)},
                      {"boxes", boxes},
                      {"size", {f.size.width, f.size.height}}});
  }
  nlohmann::json sentences = nlohmann::json::array();
  for (const auto& sent : s.sentences) {
    sentences.push_back({{"tokens", matrix_json(sent.features.tokens)}, {"parse", linguistic::to_json(sent.parse)}});
  }
  nlohmann::json j = {{"label", s.label}, {"frames", frames}, {"sentences", sentences},
                      {"question", matrix_json(s.question)}};
  if (!s.candidates.empty()) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : s.candidates) cands.push_back(matrix_json(c));
    j["candidates"] = cands;
  }
  return j;
}

Sample sample_from_json(const nlohmann::json& j) {
  Sample s;
  try {
    s.label = j.at("label").get<std::size_t>();
    for (const auto& fj : j.at("frames")) {
      visual::FrameFeatures f;
      auto app = fj.at("appearance").get<std::vector<double>>();
      if (app.empty()) throw DataError("appearance vector is empty");
      const std::size_t n = app.size();
      f.appearance = Tensor::from_data({n}, std::move(app));
      f.objects = matrix_from_json(fj.at("objects"), "objects");
      f.class_attr = matrix_from_json(fj.at("class_attr"), "class_attr");
      for (const auto& bj : fj.at("boxes")) {
        if (bj.size() != 4) throw DataError("box must be [x, y, w, h]");
        f.boxes.push_back({bj[0].get<double>(), bj[1].get<double>(), bj[2].get<double>(), bj[3].get<double>()});
      }
      const auto& size = fj.at("size");
      if (size.size() != 2) throw DataError("frame size must be [width, height]");
      f.size = {size[0].get<double>(), size[1].get<double>()};
      s.clip.frames.push_back(std::move(f));
    }
    for (const auto& sj : j.at("sentences")) {
      linguistic::Sentence sent;
      sent.features.tokens = matrix_from_json(sj.at("tokens"), "sentence tokens");
      sent.parse = linguistic::parse_from_json(sj.at("parse"));
      s.sentences.push_back(std::move(sent));
    }
    s.question = matrix_from_json(j.at("question"), "question");
    if (j.contains("candidates")) {
      for (const auto& cj : j.at("candidates")) s.candidates.push_back(matrix_from_json(cj, "candidate"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed sample: ") + e.what());
  }
  return s;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << nlohmann::json({{"format", "livlr-dataset"}, {"version", 1}, {"samples", ds.samples.size()}}).dump() << '\n';
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    auto j = sample_to_json(ds.samples[i]);
    if (!ds.planted_source.empty()) j["planted_source"] = ds.planted_source[i];
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  Dataset ds;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + " of '" + path + "': " + e.what());
    }
    if (line_no == 1) {
      if (!j.is_object() || j.value("format", "") != "livlr-dataset") {
        throw DataError("'" + path + "' is not a livlr dataset (missing header line)");
      }
      expected = j.value("samples", std::size_t{0});
      continue;
    }
    ds.samples.push_back(sample_from_json(j));
    if (j.contains("planted_source")) ds.planted_source.push_back(j.at("planted_source").get<std::size_t>());
  }
  if (line_no == 0) throw DataError("dataset '" + path + "' is empty");
  if (ds.samples.size() != expected) {
    throw DataError("dataset '" + path + "' declares " + std::to_string(expected) + " samples but holds " +
                    std::to_string(ds.samples.size()));
  }
  if (!ds.planted_source.empty() && ds.planted_source.size() != ds.samples.size()) {
    throw DataError("planted_source present on only some samples");
  }
  return ds;
}

}  // namespace livlr::data
