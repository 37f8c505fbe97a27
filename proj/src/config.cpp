#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "uavcov/harness.hpp"

namespace uavcov {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': not a non-negative integer: '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': not a boolean: '" + v + "'");
}

template <typename T, typename F>
std::vector<T> list_of(const std::string& key, const std::string& v, F conv) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(static_cast<T>(conv(key, item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += num(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

}  // namespace

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::maddpg: return "maddpg";
    case Algorithm::dqn: return "dqn";
    case Algorithm::equal: return "equal";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "maddpg") return Algorithm::maddpg;
  if (s == "dqn") return Algorithm::dqn;
  if (s == "equal") return Algorithm::equal;
  throw ConfigError("unknown algorithm '" + s + "' (expected maddpg, dqn or equal)");
}

const char* to_string(FadingMode m) { return m == FadingMode::sampled ? "sampled" : "expected"; }

FadingMode parse_fading(const std::string& s) {
  if (s == "sampled") return FadingMode::sampled;
  if (s == "expected") return FadingMode::expected;
  throw ConfigError("unknown fading mode '" + s + "' (expected sampled or expected)");
}

void apply_config_value(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  auto d = [&] { return to_double(key, v); };
  auto u = [&] { return static_cast<std::size_t>(to_uint(key, v)); };
  // Field and channel
  if (key == "L") c.side_lengths = list_of<double>(key, v, to_double);
  else if (key == "grid") c.field.grid_dim = u();
  else if (key == "h") c.field.uav_height = d();
  else if (key == "N") c.field.num_ues = u();
  else if (key == "P_t") c.field.power_budget = d();
  else if (key == "B") c.channel.bandwidth = d();
  else if (key == "R_th") c.rate_thresholds = list_of<double>(key, v, to_double);
  else if (key == "N_o") c.channel.noise_power = d();
  else if (key == "alpha_LoS") c.channel.alpha_los = d();
  else if (key == "alpha_NLoS") c.channel.alpha_nlos = d();
  else if (key == "c") c.channel.c_env = d();
  else if (key == "b") c.channel.b_env = d();
  else if (key == "rice_K") c.channel.rice_k = d();
  else if (key == "mu") c.channel.mu_gain = d();
  // Training
  else if (key == "B_s") c.train.buffer = u();
  else if (key == "W") c.train.batch = u();
  else if (key == "alpha_a") c.train.actor_lr = d();
  else if (key == "alpha_c") { c.train.critic_lr = d(); c.dqn.learning_rate = d(); }
  else if (key == "gamma") c.train.gamma = d();
  else if (key == "tau") c.train.tau = d();
  else if (key == "sigma_noise") c.train.noise_sigma = d();
  else if (key == "H") c.train.hidden = list_of<std::size_t>(key, v, to_uint);
  // Experiment
  else if (key == "K") c.clusters = list_of<std::size_t>(key, v, to_uint);
  else if (key == "M") c.train.episodes = u();
  else if (key == "T") c.train.steps_per_episode = u();
  else if (key == "algorithm") c.algorithm = parse_algorithm(v);
  else if (key == "seeds") c.seeds = list_of<std::uint64_t>(key, v, to_uint);
  else if (key == "fading") c.fading = parse_fading(v);
  else if (key == "eval_steps") c.eval_steps = u();
  else if (key == "jobs") c.jobs = u();
  else if (key == "pad_width") c.train.pad_width = u();
  else if (key == "delta_max_fraction") c.train.delta_max_fraction = d();
  else if (key == "power_penalty") c.train.power_penalty = d();
  else if (key == "oversupply_penalty") c.train.oversupply_penalty = d();
  else if (key == "preact_penalty") c.train.preact_penalty = d();
  else if (key == "reward_scale") c.train.reward_scale = d();
  else if (key == "per_agent_reward") c.train.per_agent_reward = to_bool(key, v);
  else if (key == "reward_form") {
    if (v == "capped") c.train.reward_form = RewardForm::capped;
    else if (v == "literal") c.train.reward_form = RewardForm::literal;
    else throw ConfigError("reward_form must be capped or literal");
  } else if (key == "interference") {
    if (v == "current_mean") c.interference = InterferencePower::current_mean;
    else if (v == "static_budget") c.interference = InterferencePower::static_budget;
    else throw ConfigError("interference must be current_mean or static_budget");
  }
  else if (key == "epsilon_start") c.dqn.epsilon_start = d();
  else if (key == "epsilon_end") c.dqn.epsilon_end = d();
  else if (key == "epsilon_decay_fraction") c.dqn.decay_fraction = d();
  else throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(ExperimentConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(base, ss.str());
  return base;
}

std::string render_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "# field and channel\n"
    << "L = " << join(c.side_lengths) << "\n"
    << "grid = " << c.field.grid_dim << "\n"
    << "h = " << num(c.field.uav_height) << "\n"
    << "N = " << c.field.num_ues << "\n"
    << "P_t = " << num(c.field.power_budget) << "\n"
    << "B = " << num(c.channel.bandwidth) << "\n"
    << "R_th = " << join(c.rate_thresholds) << "\n"
    << "N_o = " << num(c.channel.noise_power) << "\n"
    << "alpha_LoS = " << num(c.channel.alpha_los) << "\n"
    << "alpha_NLoS = " << num(c.channel.alpha_nlos) << "\n"
    << "c = " << num(c.channel.c_env) << "\n"
    << "b = " << num(c.channel.b_env) << "\n"
    << "rice_K = " << num(c.channel.rice_k) << "\n"
    << "mu = " << num(c.channel.mu_gain) << "\n"
    << "# training\n"
    << "B_s = " << c.train.buffer << "\n"
    << "W = " << c.train.batch << "\n"
    << "alpha_a = " << num(c.train.actor_lr) << "\n"
    << "alpha_c = " << num(c.train.critic_lr) << "\n"
    << "gamma = " << num(c.train.gamma) << "\n"
    << "tau = " << num(c.train.tau) << "\n"
    << "sigma_noise = " << num(c.train.noise_sigma) << "\n"
    << "H = " << join(c.train.hidden) << "\n"
    << "# experiment\n"
    << "algorithm = " << to_string(c.algorithm) << "\n"
    << "K = " << join(c.clusters) << "\n"
    << "M = " << c.train.episodes << "\n"
    << "T = " << c.train.steps_per_episode << "\n"
    << "seeds = " << join(c.seeds) << "\n"
    << "fading = " << to_string(c.fading) << "\n"
    << "interference = " << (c.interference == InterferencePower::current_mean ? "current_mean" : "static_budget") << "\n"
    << "eval_steps = " << c.eval_steps << "\n"
    << "pad_width = " << c.train.pad_width << "\n"
    << "delta_max_fraction = " << num(c.train.delta_max_fraction) << "\n"
    << "power_penalty = " << num(c.train.power_penalty) << "\n"
    << "oversupply_penalty = " << num(c.train.oversupply_penalty) << "\n"
    << "preact_penalty = " << num(c.train.preact_penalty) << "\n"
    << "reward_scale = " << num(c.train.reward_scale) << "\n"
    << "reward_form = " << (c.train.reward_form == RewardForm::capped ? "capped" : "literal") << "\n"
    << "per_agent_reward = " << (c.train.per_agent_reward ? "true" : "false") << "\n"
    << "epsilon_start = " << num(c.dqn.epsilon_start) << "\n"
    << "epsilon_end = " << num(c.dqn.epsilon_end) << "\n"
    << "epsilon_decay_fraction = " << num(c.dqn.decay_fraction) << "\n";
  return o.str();
}

}  // namespace uavcov
