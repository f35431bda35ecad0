#include "hpgn/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "hpgn/errors.hpp"
#include "hpgn/io_util.hpp"

namespace hpgn {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(out)) {
    throw ConfigError("config: key '" + key + "' expects a finite number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true or false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

QfMode QfMode::parse(std::string_view text) {
  const std::string s(text);
  auto bad = [&] { return ConfigError("qf mode must be fixed:Q or random:LO:HI, got '" + s + "'"); };
  QfMode mode;
  if (s.rfind("fixed:", 0) == 0) {
    mode = fixed(0);
    try {
      mode = fixed(parse_int<int>("qf_mode", s.substr(6)));
    } catch (const ConfigError&) {
      throw bad();
    }
  } else if (s.rfind("random:", 0) == 0) {
    const auto rest = s.substr(7);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw bad();
    try {
      mode = random(parse_int<int>("qf_mode", rest.substr(0, colon)), parse_int<int>("qf_mode", rest.substr(colon + 1)));
    } catch (const ConfigError&) {
      throw bad();
    }
  } else {
    throw bad();
  }
  mode.validate();
  return mode;
}

std::string QfMode::str() const {
  if (kind == Kind::fixed) return "fixed:" + std::to_string(qf);
  return "random:" + std::to_string(lo) + ":" + std::to_string(hi);
}

void QfMode::validate() const {
  if (kind == Kind::fixed) {
    if (qf < 1 || qf > 100) throw ConfigError("fixed QF must be in [1, 100], got " + std::to_string(qf));
  } else if (lo < 1 || hi > 100 || lo > hi) {
    throw ConfigError("random QF range needs 1 <= lo <= hi <= 100, got " + std::to_string(lo) + ".." +
                      std::to_string(hi));
  }
}

void TrainConfig::validate() const {
  qf_mode.validate();
  model.validate();
  loss.validate();
  if (crop == 0 || crop % 4 != 0) throw ConfigError("crop must be a positive multiple of 4, got " + std::to_string(crop));
  if (crop < 16 && loss.mode != PerceptualMode::off && loss.lambda_per != 0.0) {
    throw ConfigError("crop must be at least 16 when the perceptual term is enabled");
  }
  if (batch == 0) throw ConfigError("batch must be positive");
  if (!(adam.lr > 0) || !(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1) ||
      !(adam.eps > 0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
}

std::string TrainConfig::serialize() const {
  std::ostringstream os;
  os << "seed = " << seed << '\n'
     << "qf_mode = " << qf_mode.str() << '\n'
     << "crop = " << crop << '\n'
     << "batch = " << batch << '\n'
     << "steps = " << steps << '\n'
     << "lr = " << fmt_double(adam.lr) << '\n'
     << "beta1 = " << fmt_double(adam.beta1) << '\n'
     << "beta2 = " << fmt_double(adam.beta2) << '\n'
     << "eps = " << fmt_double(adam.eps) << '\n'
     << "width = " << model.enhancer.width << '\n'
     << "num_rmrb = " << model.enhancer.num_rmrb << '\n'
     << "num_mrb = " << model.enhancer.num_mrb_per_rmrb << '\n'
     << "trunk_input = " << (model.enhancer.trunk_input == TrunkInput::light_up ? "light_up" : "comp") << '\n'
     << "variant = " << to_string(model.variant) << '\n'
     << "lambda_per = " << fmt_double(loss.lambda_per) << '\n'
     << "perceptual = " << (loss.mode == PerceptualMode::off ? "off" : "random_features") << '\n'
     << "perceptual_seed = " << loss.extractor_seed << '\n'
     << "checkpoint_every = " << checkpoint_every << '\n'
     << "log_every = " << log_every << '\n'
     << "flip = " << (flip ? "true" : "false") << '\n';
  return os.str();
}

TrainConfig TrainConfig::parse(std::string_view text) {
  TrainConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"seed", [&](auto& k, auto& v) { c.seed = parse_int<std::uint64_t>(k, v); }},
      {"qf_mode", [&](auto&, auto& v) { c.qf_mode = QfMode::parse(v); }},
      {"crop", [&](auto& k, auto& v) { c.crop = parse_int<std::size_t>(k, v); }},
      {"batch", [&](auto& k, auto& v) { c.batch = parse_int<std::size_t>(k, v); }},
      {"steps", [&](auto& k, auto& v) { c.steps = parse_int<std::size_t>(k, v); }},
      {"lr", [&](auto& k, auto& v) { c.adam.lr = parse_double(k, v); }},
      {"beta1", [&](auto& k, auto& v) { c.adam.beta1 = parse_double(k, v); }},
      {"beta2", [&](auto& k, auto& v) { c.adam.beta2 = parse_double(k, v); }},
      {"eps", [&](auto& k, auto& v) { c.adam.eps = parse_double(k, v); }},
      {"width", [&](auto& k, auto& v) { c.model.enhancer.width = parse_int<std::size_t>(k, v); }},
      {"num_rmrb", [&](auto& k, auto& v) { c.model.enhancer.num_rmrb = parse_int<std::size_t>(k, v); }},
      {"num_mrb", [&](auto& k, auto& v) { c.model.enhancer.num_mrb_per_rmrb = parse_int<std::size_t>(k, v); }},
      {"trunk_input",
       [&](auto&, auto& v) {
         if (v == "light_up") c.model.enhancer.trunk_input = TrunkInput::light_up;
         else if (v == "comp") c.model.enhancer.trunk_input = TrunkInput::comp;
         else throw ConfigError("config: trunk_input must be light_up or comp, got '" + v + "'");
       }},
      {"variant", [&](auto&, auto& v) { c.model.variant = parse_variant(v); }},
      {"lambda_per", [&](auto& k, auto& v) { c.loss.lambda_per = parse_double(k, v); }},
      {"perceptual",
       [&](auto&, auto& v) {
         if (v == "off") c.loss.mode = PerceptualMode::off;
         else if (v == "random_features") c.loss.mode = PerceptualMode::fixed_random_features;
         else throw ConfigError("config: perceptual must be random_features or off, got '" + v + "'");
       }},
      {"perceptual_seed", [&](auto& k, auto& v) { c.loss.extractor_seed = parse_int<std::uint64_t>(k, v); }},
      {"checkpoint_every", [&](auto& k, auto& v) { c.checkpoint_every = parse_int<std::size_t>(k, v); }},
      {"log_every", [&](auto& k, auto& v) { c.log_every = parse_int<std::size_t>(k, v); }},
      {"flip", [&](auto& k, auto& v) { c.flip = parse_bool(k, v); }},
  };
  std::set<std::string> seen;
  std::istringstream is{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    it->second(key, value);
  }
  c.validate();
  return c;
}

std::uint64_t TrainConfig::hash() const { return fnv1a64(serialize()); }

}  // namespace hpgn
