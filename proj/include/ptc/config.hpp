#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptc/contrast.hpp"
#include "ptc/encoder.hpp"
#include "ptc/error.hpp"
#include "ptc/log.hpp"
#include "ptc/synth.hpp"

namespace ptc {

// Resolved settings for one run. JSON layout mirrors the nesting here:
// {"encoder": {...}, "train": {...}, "synth": {...}, "data": {...}}.
struct RunConfig {
  EncoderConfig encoder;
  TrainConfig train;
  SynthConfig synth;
  std::string train_corpus;
  std::string eval_pairs;
  std::size_t min_count = 1;

  void validate() const {
    EncoderConfig e = encoder;
    if (e.vocab_size == 0) e.vocab_size = 2;  // filled from data later
    e.validate();
    train.validate();
    synth.validate();
  }
};

namespace detail {

inline void check_known_keys(const nlohmann::json& obj,
                             const std::string& section,
                             const std::vector<std::string>& known) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ParameterError("unknown config key '" + section + "." + key + "'");
  }
}

template <class V>
void read_key(const nlohmann::json& obj, const char* key, V& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("bad value for config key '") + key +
                         "': " + e.what());
  }
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParameterError("config root must be an object");
  detail::check_known_keys(
      j, "",
      {"encoder", "train", "synth", "data", "command", "format_versions"});
  RunConfig cfg;
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    detail::check_known_keys(
        e, "encoder",
        {"layers", "heads", "d_model", "d_ff", "max_len", "dropout"});
    detail::read_key(e, "layers", cfg.encoder.layers);
    detail::read_key(e, "heads", cfg.encoder.heads);
    detail::read_key(e, "d_model", cfg.encoder.d_model);
    detail::read_key(e, "d_ff", cfg.encoder.d_ff);
    detail::read_key(e, "max_len", cfg.encoder.max_len);
    detail::read_key(e, "dropout", cfg.encoder.dropout);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::check_known_keys(
        t, "train",
        {"tau", "momentum", "lr", "batch_size", "queue_capacity", "pseudo_len",
         "epochs", "eval_every", "seed", "mode", "mirror_shared"});
    detail::read_key(t, "tau", cfg.train.tau);
    detail::read_key(t, "momentum", cfg.train.momentum);
    detail::read_key(t, "lr", cfg.train.lr);
    detail::read_key(t, "batch_size", cfg.train.batch_size);
    detail::read_key(t, "queue_capacity", cfg.train.queue_capacity);
    detail::read_key(t, "pseudo_len", cfg.train.pseudo_len);
    detail::read_key(t, "epochs", cfg.train.epochs);
    detail::read_key(t, "eval_every", cfg.train.eval_every);
    detail::read_key(t, "seed", cfg.train.seed);
    if (t.contains("mode")) {
      std::string m;
      detail::read_key(t, "mode", m);
      cfg.train.mode = parse_train_mode(m);
    }
    detail::read_key(t, "mirror_shared", cfg.train.mirror_shared);
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    detail::check_known_keys(
        s, "synth",
        {"n_meanings", "realizations", "content_vocab", "filler_vocab",
         "content_min", "content_max", "filler_min", "filler_max", "seed"});
    detail::read_key(s, "n_meanings", cfg.synth.n_meanings);
    detail::read_key(s, "realizations", cfg.synth.realizations);
    detail::read_key(s, "content_vocab", cfg.synth.content_vocab);
    detail::read_key(s, "filler_vocab", cfg.synth.filler_vocab);
    detail::read_key(s, "content_min", cfg.synth.content_min);
    detail::read_key(s, "content_max", cfg.synth.content_max);
    detail::read_key(s, "filler_min", cfg.synth.filler_min);
    detail::read_key(s, "filler_max", cfg.synth.filler_max);
    detail::read_key(s, "seed", cfg.synth.seed);
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::check_known_keys(d, "data",
                             {"train_corpus", "eval_pairs", "min_count"});
    detail::read_key(d, "train_corpus", cfg.train_corpus);
    detail::read_key(d, "eval_pairs", cfg.eval_pairs);
    detail::read_key(d, "min_count", cfg.min_count);
  }
  return cfg;
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["encoder"] = {{"layers", cfg.encoder.layers},
                  {"heads", cfg.encoder.heads},
                  {"d_model", cfg.encoder.d_model},
                  {"d_ff", cfg.encoder.d_ff},
                  {"max_len", cfg.encoder.max_len},
                  {"dropout", cfg.encoder.dropout}};
  j["train"] = {{"tau", cfg.train.tau},
                {"momentum", cfg.train.momentum},
                {"lr", cfg.train.lr},
                {"batch_size", cfg.train.batch_size},
                {"queue_capacity", cfg.train.queue_capacity},
                {"pseudo_len", cfg.train.pseudo_len},
                {"epochs", cfg.train.epochs},
                {"eval_every", cfg.train.eval_every},
                {"seed", cfg.train.seed},
                {"mode", to_string(cfg.train.mode)},
                {"mirror_shared", cfg.train.mirror_shared}};
  j["synth"] = {{"n_meanings", cfg.synth.n_meanings},
                {"realizations", cfg.synth.realizations},
                {"content_vocab", cfg.synth.content_vocab},
                {"filler_vocab", cfg.synth.filler_vocab},
                {"content_min", cfg.synth.content_min},
                {"content_max", cfg.synth.content_max},
                {"filler_min", cfg.synth.filler_min},
                {"filler_max", cfg.synth.filler_max},
                {"seed", cfg.synth.seed}};
  j["data"] = {{"train_corpus", cfg.train_corpus},
               {"eval_pairs", cfg.eval_pairs},
               {"min_count", cfg.min_count}};
  return j;
}

inline nlohmann::json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("config parse failed for " + path + ": " + e.what());
  }
}

// Applies one "dotted.path=value" override in place. The value is parsed as
// JSON when possible and treated as a bare string otherwise. When the key was
// already present the override wins and the conflict is reported.
inline void apply_override(nlohmann::json& j, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ParameterError("override must look like key.path=value, got '" +
                         spec + "'");
  const std::string key_path = spec.substr(0, eq);
  const std::string value_str = spec.substr(eq + 1);

  std::string pointer = "/";
  for (char c : key_path) pointer += (c == '.') ? '/' : c;
  nlohmann::json::json_pointer ptr(pointer);

  nlohmann::json value;
  try {
    value = nlohmann::json::parse(value_str);
  } catch (const nlohmann::json::exception&) {
    value = value_str;
  }
  if (j.contains(ptr)) {
    log_warn("config key '" + key_path + "' set in both file and override; " +
             "override wins (" + j.at(ptr).dump() + " -> " + value.dump() +
             ")");
  }
  j[ptr] = value;
}

inline RunConfig resolve_config(const std::string& path,
                                const std::vector<std::string>& overrides) {
  nlohmann::json j =
      path.empty() ? nlohmann::json::object() : load_config_json(path);
  for (const auto& o : overrides) apply_override(j, o);
  auto cfg = config_from_json(j);
  cfg.validate();
  return cfg;
}

}  // namespace ptc
