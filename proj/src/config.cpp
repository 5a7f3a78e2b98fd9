#include "hma/config.hpp"

#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace hma {

int HmaConfig::pad_multiple() const { return std::lcm(window, grid_interval); }

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("invalid config: " + msg);
}

}  // namespace

void validate(const HmaConfig& c) {
  require(c.scale >= 2 && c.scale <= 4, "scale must be 2, 3 or 4 (got " + std::to_string(c.scale) + ")");
  require(c.in_channels >= 1, "in_channels must be positive");
  require(c.channels >= 4 && c.channels % 4 == 0, "channels must be a positive multiple of 4");
  require(c.window >= 2, "window must be at least 2");
  require(c.grid_interval >= 1 && c.window % c.grid_interval == 0, "grid_interval must divide window");
  require(c.n_rhtb >= 1 && c.n_fab >= 0, "n_rhtb must be >= 1 and n_fab >= 0");
  require(c.heads_fab >= 1 && c.channels % c.heads_fab == 0, "channels not divisible by heads_fab");
  require(c.heads_gab_grid >= 1 && (c.channels / 2) % c.heads_gab_grid == 0,
          "channels/2 = " + std::to_string(c.channels / 2) + " not divisible by heads_gab_grid");
  require(c.heads_gab_win >= 1 && (c.channels / 4) % c.heads_gab_win == 0,
          "channels/4 = " + std::to_string(c.channels / 4) + " not divisible by heads_gab_win");
  require(c.expansion_rate >= 1, "expansion_rate must be positive");
  require(c.shrink_rate >= 1 && c.expanded_channels() % c.shrink_rate == 0,
          "expanded channels not divisible by shrink_rate");
  require(c.mlp_ratio > 0.0 && c.mlp_hidden() >= 1, "mlp_ratio must give a positive hidden width");
  require(c.img_size >= c.window && c.img_size % c.window == 0, "img_size must be a positive multiple of window");
}

HmaConfig paper_config(int scale) {
  HmaConfig c;
  c.scale = scale;
  return c;
}

HmaConfig toy_config(int scale) {
  HmaConfig c;
  c.scale = scale;
  c.channels = 32;
  c.window = 8;
  c.grid_interval = 2;
  c.n_rhtb = 2;
  c.n_fab = 2;
  c.heads_fab = 2;
  c.heads_gab_grid = 2;
  c.heads_gab_win = 2;
  c.img_size = 64;
  return c;
}

HmaConfig tiny_config(int scale) {
  HmaConfig c;
  c.scale = scale;
  c.channels = 8;
  c.window = 4;
  c.grid_interval = 2;
  c.n_rhtb = 1;
  c.n_fab = 1;
  c.heads_fab = 2;
  c.heads_gab_grid = 2;
  c.heads_gab_win = 1;
  c.expansion_rate = 2;
  c.img_size = 16;
  return c;
}

std::string config_to_json(const HmaConfig& c) {
  nlohmann::ordered_json j;
  j["scale"] = c.scale;
  j["in_channels"] = c.in_channels;
  j["channels"] = c.channels;
  j["window"] = c.window;
  j["grid_interval"] = c.grid_interval;
  j["n_rhtb"] = c.n_rhtb;
  j["n_fab"] = c.n_fab;
  j["heads_fab"] = c.heads_fab;
  j["heads_gab_grid"] = c.heads_gab_grid;
  j["heads_gab_win"] = c.heads_gab_win;
  j["expansion_rate"] = c.expansion_rate;
  j["shrink_rate"] = c.shrink_rate;
  j["mlp_ratio"] = c.mlp_ratio;
  j["img_size"] = c.img_size;
  j["legacy_grid_scale"] = c.legacy_grid_scale;
  j["conv_padding"] = c.conv_padding == Padding::kReflect ? "reflect" : "zero";
  return j.dump(2);
}

HmaConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  HmaConfig c;
  auto get_int = [&](const char* key, int& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) throw ConfigError(std::string("config key '") + key + "' must be an integer");
    out = j[key].get<int>();
  };
  get_int("scale", c.scale);
  get_int("in_channels", c.in_channels);
  get_int("channels", c.channels);
  get_int("window", c.window);
  get_int("grid_interval", c.grid_interval);
  get_int("n_rhtb", c.n_rhtb);
  get_int("n_fab", c.n_fab);
  get_int("heads_fab", c.heads_fab);
  get_int("heads_gab_grid", c.heads_gab_grid);
  get_int("heads_gab_win", c.heads_gab_win);
  get_int("expansion_rate", c.expansion_rate);
  get_int("shrink_rate", c.shrink_rate);
  get_int("img_size", c.img_size);
  if (j.contains("mlp_ratio")) {
    if (!j["mlp_ratio"].is_number()) throw ConfigError("config key 'mlp_ratio' must be a number");
    c.mlp_ratio = j["mlp_ratio"].get<double>();
  }
  if (j.contains("legacy_grid_scale")) {
    if (!j["legacy_grid_scale"].is_boolean()) throw ConfigError("config key 'legacy_grid_scale' must be a boolean");
    c.legacy_grid_scale = j["legacy_grid_scale"].get<bool>();
  }
  if (j.contains("conv_padding")) {
    const auto& v = j["conv_padding"];
    if (v == "zero") {
      c.conv_padding = Padding::kZero;
    } else if (v == "reflect") {
      c.conv_padding = Padding::kReflect;
    } else {
      throw ConfigError("config key 'conv_padding' must be \"zero\" or \"reflect\"");
    }
  }
  static const std::set<std::string> known{"scale",        "in_channels",   "channels",       "window",
                                           "grid_interval", "n_rhtb",        "n_fab",          "heads_fab",
                                           "heads_gab_grid", "heads_gab_win", "expansion_rate", "shrink_rate",
                                           "mlp_ratio",    "img_size",      "legacy_grid_scale", "conv_padding"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  validate(c);
  return c;
}

HmaConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

}  // namespace hma
