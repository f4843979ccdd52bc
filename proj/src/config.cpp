#include "scam/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "scam/errors.hpp"

namespace scam {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int64_t parse_int(const std::string& key, const std::string& v) {
  int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

uint64_t parse_uint(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<int64_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<int64_t> out;
  if (trim(v).empty() || v == "default") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<int64_t>& v) {
  if (v.empty()) return "default";
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> assign;
  std::function<std::string(const RunConfig&)> print;
};

#define SCAM_INT_FIELD(key, member)                                                       \
  {key, Field{[](RunConfig& c, const std::string& v) { c.member = parse_int(key, v); },  \
              [](const RunConfig& c) { return std::to_string(c.member); }}}
#define SCAM_UINT_FIELD(key, member)                                                      \
  {key, Field{[](RunConfig& c, const std::string& v) { c.member = parse_uint(key, v); }, \
              [](const RunConfig& c) { return std::to_string(c.member); }}}
#define SCAM_DOUBLE_FIELD(key, member)                                                      \
  {key, Field{[](RunConfig& c, const std::string& v) { c.member = parse_double(key, v); }, \
              [](const RunConfig& c) { return fmt_double(c.member); }}}
#define SCAM_BOOL_FIELD(key, member)                                                      \
  {key, Field{[](RunConfig& c, const std::string& v) { c.member = parse_bool(key, v); }, \
              [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}}
#define SCAM_LIST_FIELD(key, member)                                                      \
  {key, Field{[](RunConfig& c, const std::string& v) { c.member = parse_list(key, v); }, \
              [](const RunConfig& c) { return fmt_list(c.member); }}}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      SCAM_INT_FIELD("model.image_size", model.image_size),
      SCAM_INT_FIELD("model.num_labels", model.num_labels),
      SCAM_INT_FIELD("model.k", model.k),
      SCAM_INT_FIELD("model.d", model.d),
      SCAM_INT_FIELD("model.attention_dim", model.attention_dim),
      SCAM_INT_FIELD("model.heads", model.heads),
      SCAM_DOUBLE_FIELD("model.tau", model.tau),
      SCAM_BOOL_FIELD("model.spectral_norm", model.spectral_norm),
      {"model.sat_residual",
       Field{[](RunConfig& c, const std::string& v) {
               if (v == "block_input") {
                 c.model.residual = ResidualMode::block_input;
               } else if (v == "intermediate") {
                 c.model.residual = ResidualMode::intermediate;
               } else {
                 throw ConfigError("model.sat_residual: expected block_input|intermediate");
               }
             },
             [](const RunConfig& c) {
               return std::string(c.model.residual == ResidualMode::block_input ? "block_input"
                                                                                 : "intermediate");
             }}},
      SCAM_INT_FIELD("encoder.blocks", model.encoder_blocks),
      SCAM_LIST_FIELD("encoder.channels", model.encoder_channels),
      SCAM_INT_FIELD("encoder.stride", model.encoder_stride),
      SCAM_BOOL_FIELD("encoder.conv", model.encoder_conv),
      SCAM_BOOL_FIELD("encoder.self_attention", model.encoder_self_attention),
      SCAM_INT_FIELD("generator.blocks", model.generator_blocks),
      SCAM_LIST_FIELD("generator.channels", model.generator_channels),
      SCAM_BOOL_FIELD("generator.latent_sat", model.generator_latent_sat),
      SCAM_BOOL_FIELD("generator.noise", model.noise),
      {"generator.upsample",
       Field{[](RunConfig& c, const std::string& v) {
               if (v == "nearest") {
                 c.model.upsample = UpsampleMode::nearest;
               } else if (v == "bilinear") {
                 c.model.upsample = UpsampleMode::bilinear;
               } else {
                 throw ConfigError("generator.upsample: expected nearest|bilinear");
               }
             },
             [](const RunConfig& c) {
               return std::string(c.model.upsample == UpsampleMode::nearest ? "nearest"
                                                                            : "bilinear");
             }}},
      SCAM_INT_FIELD("discriminator.layers", model.discriminator_layers),
      SCAM_INT_FIELD("discriminator.channels", model.discriminator_channels),
      SCAM_BOOL_FIELD("discriminator.gradnorm", model.gradnorm),
      SCAM_DOUBLE_FIELD("loss.lambda_perc", loss.lambda_perc),
      SCAM_DOUBLE_FIELD("loss.lambda_l1", loss.lambda_l1),
      SCAM_DOUBLE_FIELD("loss.lambda_gan", loss.lambda_gan),
      SCAM_INT_FIELD("train.steps", train.steps),
      SCAM_INT_FIELD("train.batch_size", train.batch_size),
      SCAM_DOUBLE_FIELD("train.lr_eg", train.lr_eg),
      SCAM_DOUBLE_FIELD("train.lr_d", train.lr_d),
      SCAM_DOUBLE_FIELD("train.beta1", train.beta1),
      SCAM_DOUBLE_FIELD("train.beta2", train.beta2),
      SCAM_DOUBLE_FIELD("train.weight_decay", train.weight_decay),
      SCAM_UINT_FIELD("train.seed", train.seed),
      SCAM_INT_FIELD("train.checkpoint_every", train.checkpoint_every),
      SCAM_INT_FIELD("train.log_every", train.log_every),
      SCAM_UINT_FIELD("train.perceptual_seed", train.perceptual_seed),
      {"train.device",
       Field{[](RunConfig& c, const std::string& v) {
               if (v != "cpu") throw ConfigError("train.device: only 'cpu' is supported");
               c.train.device = v;
             },
             [](const RunConfig& c) { return c.train.device; }}},
  };
  return table;
}

#undef SCAM_INT_FIELD
#undef SCAM_UINT_FIELD
#undef SCAM_DOUBLE_FIELD
#undef SCAM_BOOL_FIELD
#undef SCAM_LIST_FIELD

}  // namespace

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("train.steps must be non-negative");
  if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (lr_eg < 0 || lr_d < 0) throw ConfigError("learning rates must be non-negative");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
    throw ConfigError("optimizer betas must lie in [0, 1)");
  }
  if (weight_decay < 0) throw ConfigError("train.weight_decay must be non-negative");
  if (checkpoint_every < 0 || log_every < 0) throw ConfigError("intervals must be non-negative");
}

void RunConfig::validate() const {
  model.validate();
  loss.validate();
  train.validate();
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    out.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KeyValueConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw ConfigError("empty config key");
  values_[key] = value;
}

std::string KeyValueConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

RunConfig to_run_config(const KeyValueConfig& kv) {
  RunConfig config;
  const auto& table = fields();
  for (const auto& [key, value] : kv.values()) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.assign(config, value);
  }
  return config;
}

KeyValueConfig to_key_values(const RunConfig& config) {
  KeyValueConfig kv;
  for (const auto& [key, field] : fields()) kv.set(key, field.print(config));
  return kv;
}

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  KeyValueConfig kv = path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
  for (const auto& o : overrides) kv.set(o);
  auto config = to_run_config(kv);
  config.validate();
  return config;
}

}  // namespace scam
