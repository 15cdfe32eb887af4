#include "hammer/config.hpp"

#include <cctype>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace hammer {

using nlohmann::json;

// ------------------------------------------------------------------ TOML subset

namespace {

struct TomlParser {
  std::string_view s;
  std::size_t i = 0;
  int line = 1;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("config line " + std::to_string(line) + ": " + msg);
  }

  bool eof() const { return i >= s.size(); }
  char peek() const { return eof() ? '\0' : s[i]; }

  // Skips blanks and comments; newlines only when `newlines` is set.
  void skip(bool newlines) {
    while (!eof()) {
      const char c = s[i];
      if (c == ' ' || c == '\t' || c == '\r') {
        ++i;
      } else if (c == '#') {
        while (!eof() && s[i] != '\n') ++i;
      } else if (c == '\n' && newlines) {
        ++line;
        ++i;
      } else {
        break;
      }
    }
  }

  void end_of_line() {
    skip(false);
    if (eof()) return;
    if (s[i] != '\n') fail("unexpected trailing characters");
    ++i;
    ++line;
  }

  static bool bare(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

  std::string key() {
    skip(false);
    if (peek() == '"') return string();
    const std::size_t b = i;
    while (!eof() && bare(s[i])) ++i;
    if (i == b) fail("expected a key");
    return std::string(s.substr(b, i - b));
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{key()};
    skip(false);
    while (peek() == '.') {
      ++i;
      parts.push_back(key());
      skip(false);
    }
    return parts;
  }

  std::string string() {
    ++i;  // opening quote
    std::string out;
    while (true) {
      if (eof() || s[i] == '\n') fail("unterminated string");
      const char c = s[i++];
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated string");
      const char e = s[i++];
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
    return out;
  }

  json number() {
    const std::size_t b = i;
    while (!eof() && (bare(s[i]) || s[i] == '.' || s[i] == '+')) ++i;
    std::string tok;
    for (char c : s.substr(b, i - b))
      if (c != '_') tok += c;
    if (tok.empty()) fail("expected a value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" || tok == "+inf" ||
                          tok == "-inf" || tok == "nan";
    std::size_t used = 0;
    try {
      if (is_float) {
        const double v = std::stod(tok, &used);
        if (used == tok.size()) return v;
      } else {
        const long long v = std::stoll(tok, &used);
        if (used == tok.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("invalid value '" + tok + "'");
  }

  json value() {
    skip(false);
    const char c = peek();
    if (c == '"') return string();
    if (c == '[') {
      ++i;
      json arr = json::array();
      while (true) {
        skip(true);
        if (peek() == ']') {
          ++i;
          break;
        }
        arr.push_back(value());
        skip(true);
        if (peek() == ',') {
          ++i;
        } else if (peek() == ']') {
          ++i;
          break;
        } else {
          fail("expected ',' or ']' in array");
        }
      }
      return arr;
    }
    if (s.substr(i, 4) == "true" && (i + 4 >= s.size() || !bare(s[i + 4]))) {
      i += 4;
      return true;
    }
    if (s.substr(i, 5) == "false" && (i + 5 >= s.size() || !bare(s[i + 5]))) {
      i += 5;
      return false;
    }
    return number();
  }

  json* table(json& root, const std::vector<std::string>& path) {
    json* t = &root;
    for (const auto& p : path) {
      json& next = (*t)[p];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) fail("'" + p + "' is not a table");
      t = &next;
    }
    return t;
  }

  json parse() {
    json root = json::object();
    json* current = &root;
    std::set<std::string> seen_tables;
    while (true) {
      skip(true);
      if (eof()) break;
      if (peek() == '[') {
        ++i;
        const auto path = dotted_key();
        if (peek() != ']') fail("expected ']'");
        ++i;
        std::string name;
        for (const auto& p : path) name += (name.empty() ? "" : ".") + p;
        if (!seen_tables.insert(name).second) fail("duplicate table [" + name + "]");
        current = table(root, path);
        end_of_line();
        continue;
      }
      auto path = dotted_key();
      skip(false);
      if (peek() != '=') fail("expected '='");
      ++i;
      const std::string last = path.back();
      path.pop_back();
      json* t = table(*current, path);
      if (t->contains(last)) fail("duplicate key '" + last + "'");
      (*t)[last] = value();
      end_of_line();
    }
    return root;
  }
};

}  // namespace

json parse_toml(std::string_view text) { return TomlParser{text}.parse(); }

// ------------------------------------------------------------------ field table

namespace {

template <class T>
T get_as(const json& v, const std::string& where);

[[noreturn]] void bad_type(const std::string& where, const char* expected) {
  throw ValidationError("config " + where + ": expected " + expected);
}

template <>
double get_as<double>(const json& v, const std::string& where) {
  if (!v.is_number()) bad_type(where, "a number");
  return v.get<double>();
}
template <>
long get_as<long>(const json& v, const std::string& where) {
  if (!v.is_number_integer()) bad_type(where, "an integer");
  return v.get<long>();
}
template <>
int get_as<int>(const json& v, const std::string& where) {
  const long x = get_as<long>(v, where);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) bad_type(where, "a 32-bit integer");
  return int(x);
}
template <>
std::uint64_t get_as<std::uint64_t>(const json& v, const std::string& where) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
    bad_type(where, "a non-negative integer");
  return v.get<std::uint64_t>();
}
template <>
bool get_as<bool>(const json& v, const std::string& where) {
  if (!v.is_boolean()) bad_type(where, "true or false");
  return v.get<bool>();
}
template <>
std::string get_as<std::string>(const json& v, const std::string& where) {
  if (!v.is_string()) bad_type(where, "a string");
  return v.get<std::string>();
}

template <class T>
std::vector<T> get_list(const json& v, const std::string& where) {
  if (!v.is_array()) bad_type(where, "an array");
  std::vector<T> out;
  for (const auto& x : v) out.push_back(get_as<T>(x, where));
  return out;
}

// Reads or writes every setting through one list of (section, key, field).
struct Binder {
  const json* in = nullptr;  // load mode
  json* out = nullptr;       // dump mode
  std::set<std::string> used;

  const json* find(const std::string& sec, const std::string& key) {
    used.insert(sec + "." + key);
    if (!in->contains(sec)) return nullptr;
    const json& t = (*in)[sec];
    if (!t.contains(key)) return nullptr;
    return &t[key];
  }

  template <class T>
  void scalar(const std::string& sec, const std::string& key, T& field) {
    if (out) {
      (*out)[sec][key] = field;
    } else if (const json* v = find(sec, key)) {
      field = get_as<T>(*v, sec + "." + key);
    }
  }
  void operator()(const std::string& sec, const std::string& key, double& f) { scalar(sec, key, f); }
  void operator()(const std::string& sec, const std::string& key, int& f) { scalar(sec, key, f); }
  void operator()(const std::string& sec, const std::string& key, long& f) { scalar(sec, key, f); }
  void operator()(const std::string& sec, const std::string& key, std::uint64_t& f) { scalar(sec, key, f); }
  void operator()(const std::string& sec, const std::string& key, bool& f) { scalar(sec, key, f); }

  template <class T>
  void operator()(const std::string& sec, const std::string& key, std::vector<T>& f) {
    if (out) {
      (*out)[sec][key] = f;
    } else if (const json* v = find(sec, key)) {
      f = get_list<T>(*v, sec + "." + key);
    }
  }

  template <class T, std::size_t N>
  void operator()(const std::string& sec, const std::string& key, std::array<T, N>& f) {
    if (out) {
      (*out)[sec][key] = f;
    } else if (const json* v = find(sec, key)) {
      const auto l = get_list<T>(*v, sec + "." + key);
      if (l.size() != N) throw ValidationError("config " + sec + "." + key + ": expected " + std::to_string(N) + " values");
      std::copy(l.begin(), l.end(), f.begin());
    }
  }

  void operator()(const std::string& sec, const std::string& key, JointVec& f) {
    std::array<double, kJoints> a{f[0], f[1], f[2], f[3]};
    (*this)(sec, key, a);
    f = JointVec(a[0], a[1], a[2], a[3]);
  }

  // Fields stored as strings in the file (enums, flag sets).
  void text(const std::string& sec, const std::string& key, const std::function<std::string()>& get,
            const std::function<void(const std::string&)>& set) {
    if (out) {
      (*out)[sec][key] = get();
    } else if (const json* v = find(sec, key)) {
      set(get_as<std::string>(*v, sec + "." + key));
    }
  }
};

void bind(Binder& b, HammerConfig& c) {
  b("run", "seed", c.seed);

  auto& ch = c.env.chain;
  b("kinematics", "base_height", ch.base_height);
  b("kinematics", "links", ch.links);
  b("kinematics", "hammer_offset", ch.hammer_offset);
  b("kinematics", "q_min", ch.q_min);
  b("kinematics", "q_max", ch.q_max);

  auto& ws = c.env.ws;
  b("workspace", "r_min", ws.r_min);
  b("workspace", "r_max", ws.r_max);
  b("workspace", "yaw_min", ws.yaw_min);
  b("workspace", "yaw_max", ws.yaw_max);
  b("workspace", "z_min", ws.z_min);
  b("workspace", "z_max", ws.z_max);
  b("workspace", "pitch_max", ws.pitch_max);
  b("workspace", "pitch_ts", ws.pitch_ts);
  b("workspace", "z_ts_min", ws.z_ts_min);
  b("workspace", "z_ts_max", ws.z_ts_max);

  b("plant", "rate", c.plant.rate);
  b("plant", "tau", c.plant.tau);
  b("plant", "delay_steps", c.plant.delay_steps);
  b("plant", "coupling", c.plant.coupling);
  b("plant", "noise_std", c.plant.noise_std);

  b("excite", "dwell_min", c.excite.dwell_min);
  b("excite", "dwell_max", c.excite.dwell_max);
  b("excite", "lookahead_ticks", c.excite.lookahead_ticks);
  b("excite", "grid_r", c.excite.grid_r);
  b("excite", "grid_yaw", c.excite.grid_yaw);
  b("excite", "grid_z", c.excite.grid_z);
  b("excite", "reachable_samples", c.excite.reachable_samples);

  b("data", "session_minutes", c.data.session_minutes);
  b("data", "holdout_minutes", c.data.holdout_minutes);

  b("observer", "kp", c.env.tracker.kp);
  b("observer", "ki", c.env.tracker.ki);

  auto& m = c.model;
  b.text("dynmodel", "prediction", [&] { return to_string(m.prediction); },
         [&](const std::string& s) { m.prediction = parse_prediction(s); });
  b.text("dynmodel", "arch", [&] { return to_string(m.arch); }, [&](const std::string& s) { m.arch = parse_arch(s); });
  b("dynmodel", "hidden", m.hidden);
  b("dynmodel", "kan_degree", m.kan_degree);
  b("dynmodel", "lags", m.lags);
  b("dynmodel", "horizon", m.horizon);
  b("dynmodel", "lr", m.lr);
  b("dynmodel", "batch", m.batch);
  b("dynmodel", "max_epochs", c.train.max_epochs);
  b("dynmodel", "batches_per_epoch", c.train.batches_per_epoch);
  b("dynmodel", "patience", c.train.patience);
  b("dynmodel", "eval_trajectories", c.train.eval_trajectories);
  b("dynmodel", "eval_horizon", c.train.eval_horizon);
  b("dynmodel", "search_budget", c.search_budget);

  b("env", "t_reset", c.env.t_reset);
  b("env", "action_repeat", c.env.action_repeat);

  auto& r = c.env.reward;
  b.text("reward", "terms", [&] { return r.flags.to_string(); },
         [&](const std::string& s) { r.flags = RewardFlags::parse(s); });
  b("reward", "lambda_p", r.lambda_p);
  b("reward", "lambda_r", r.lambda_r);
  b("reward", "lambda_q", r.lambda_q);
  b("reward", "lambda_a", r.lambda_a);
  b("reward", "lambda_w", r.lambda_w);
  b("reward", "eps_p", r.eps_p);
  b("reward", "eps_r", r.eps_r);
  b("reward", "eps_p_fine", r.eps_p2);
  b("reward", "eps_r_fine", r.eps_r2);
  b("reward", "eps_alpha", r.eps_alpha);
  b("reward", "eps_q", r.eps_q);
  b("reward", "w_x", r.w_x);
  b("reward", "w_alpha", r.w_alpha);
  b("reward", "w_q", r.w_q);

  auto& p = c.ppo;
  b("ppo", "total_steps", p.total_steps);
  b("ppo", "lr", p.lr);
  b("ppo", "entropy_cost", p.entropy_cost);
  b("ppo", "gamma", p.gamma);
  b("ppo", "gae_lambda", p.gae_lambda);
  b("ppo", "clip", p.clip);
  b("ppo", "value_cost", p.value_cost);
  b("ppo", "unroll", p.unroll);
  b("ppo", "batch", p.batch);
  b("ppo", "minibatches", p.minibatches);
  b("ppo", "num_envs", p.num_envs);
  b("ppo", "updates_per_batch", p.updates_per_batch);
  b("ppo", "actor_hidden", p.actor_hidden);
  b("ppo", "critic_hidden", p.critic_hidden);
  b("ppo", "init_log_std", p.init_log_std);

  auto& ic = c.icem;
  b("icem", "horizon", ic.horizon);
  b("icem", "population", ic.population);
  b("icem", "elites", ic.elites);
  b("icem", "sigma0", ic.sigma0);
  b("icem", "alpha", ic.alpha);
  b("icem", "iterations", ic.iterations);
  b("icem", "beta", ic.beta);
  b("icem", "elite_fraction", ic.elite_fraction);
  b("icem", "action_repeat", ic.action_repeat);
  b("icem", "gamma", ic.gamma);
  b.text("icem", "terms", [&] { return ic.flags.to_string(); },
         [&](const std::string& s) { ic.flags = RewardFlags::parse(s); });
  b("icem", "reset_sigma", ic.reset_sigma);
  b("icem", "add_mean", ic.add_mean);

  auto& e = c.eval;
  b("eval", "episodes", e.episodes);
  b("eval", "episode_seed", e.episode_seed);
  b("eval", "lockstep", e.lockstep);
  b.text("eval", "protocol", [&] { return to_string(e.protocol); },
         [&](const std::string& s) { e.protocol = parse_protocol(s); });
  b("eval", "sequential_targets", e.sequential_targets);
}

}  // namespace

HammerConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("config: expected a table at the top level");
  HammerConfig cfg;
  Binder b;
  b.in = &doc;
  bind(b, cfg);
  for (const auto& [sec, table] : doc.items()) {
    if (!table.is_object()) throw ValidationError("config: top-level key '" + sec + "' must be a [section]");
    for (const auto& [key, v] : table.items()) {
      (void)v;
      if (!b.used.count(sec + "." + key)) throw ValidationError("config: unknown setting " + sec + "." + key);
    }
  }
  cfg.validate();
  return cfg;
}

HammerConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return config_from_json(parse_toml(ss.str()));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

json config_to_json(const HammerConfig& cfg) {
  HammerConfig copy = cfg;
  json out = json::object();
  Binder b;
  b.out = &out;
  bind(b, copy);
  return out;
}

void HammerConfig::validate() const {
  env.chain.validate();
  env.validate();
  plant.validate();
  excite.validate();
  require(!data.session_minutes.empty(), "data: session_minutes must not be empty");
  for (double m : data.session_minutes) require(m > 0.0, "data: session minutes must be > 0");
  require(data.holdout_minutes >= 0.0 && data.holdout_minutes < data.session_minutes.back(),
          "data: holdout_minutes must be in [0, last session length)");
  model.validate();
  train.validate();
  require(search_budget >= 1, "dynmodel: search_budget must be >= 1");
  ppo.validate();
  icem.validate();
  require(icem.action_repeat == env.action_repeat, "icem.action_repeat must equal env.action_repeat");
  require(eval.episodes >= 1, "eval: episodes must be >= 1");
  require(eval.lockstep >= 1, "eval: lockstep must be >= 1");
  require(eval.sequential_targets >= 1, "eval: sequential_targets must be >= 1");
}

}  // namespace hammer
