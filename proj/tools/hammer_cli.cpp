#include "hammer/config.hpp"
#include "hammer/manifest.hpp"
#include "hammer/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <malloc.h>
#include <fstream>
#include <iostream>
#include <optional>

using namespace hammer;
using nlohmann::json;

namespace {

struct Globals {
  std::string config_path;
  bool json_out = false;
  bool quiet = false;
  std::vector<std::string> argv;
};

Globals g;

HammerConfig load_cfg() { return g.config_path.empty() ? HammerConfig{} : load_config(g.config_path); }

void note(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void note(const char* fmt, ...) {
  if (g.quiet) return;
  va_list ap;
  va_start(ap, fmt);
  std::vfprintf(stderr, fmt, ap);
  va_end(ap);
  std::fputc('\n', stderr);
}

RunManifest start_manifest(const std::string& command, const HammerConfig& cfg) {
  RunManifest m;
  m.command = command;
  m.argv = g.argv;
  m.config = config_to_json(cfg);
  m.started_at = utc_timestamp();
  if (!g.config_path.empty()) m.add_input(g.config_path);
  return m;
}

void emit(const json& result, const std::string& text) {
  if (g.json_out)
    std::cout << result.dump() << std::endl;
  else
    std::cout << text << std::flush;
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void require_file(const std::string& p, const char* what) {
  if (!std::filesystem::exists(p)) throw ValidationError(std::string(what) + " not found: " + p);
}

Dataset load_dataset(const std::vector<std::string>& paths, const HammerConfig& cfg, RunManifest& m) {
  Dataset d;
  for (const auto& p : paths) {
    require_file(p, "dataset");
    d.trajectories.push_back(read_trajectory_csv(p));
    m.add_input(p);
  }
  reconstruct_velocities(d, cfg.env.tracker);
  return d;
}

std::string dataset_hash(const RunManifest& m) {
  std::string all;
  for (const auto& [p, h] : m.inputs)
    if (p != g.config_path) all += h;
  return sha256_hex(all);
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError("expected a comma-separated integer list, got '" + s + "'");
    }
  }
  if (out.empty()) throw ValidationError("empty integer list");
  return out;
}

// ------------------------------------------------------------------ generate-data

struct GenerateOpts {
  double minutes = -1.0;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_generate(const GenerateOpts& o) {
  HammerConfig cfg = load_cfg();
  require(o.minutes > 0.0, "--minutes must be > 0");
  const std::uint64_t seed = o.seed.value_or(cfg.seed);
  auto m = start_manifest("generate-data", cfg);
  m.seeds["seed"] = seed;

  const Plant plant(cfg.plant, cfg.env.chain);
  const auto res = record_session(plant, cfg.env.ws, cfg.excite, o.minutes, seed);
  const std::filesystem::path out(o.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  write_trajectory_csv(out, res.trajectory);
  m.add_output(out);
  m.extra["coverage"] = {{"reachable_cells", res.coverage.reachable_cells},
                         {"visited_cells", res.coverage.visited_cells},
                         {"fraction", res.coverage.fraction()},
                         {"corrected_ticks", res.corrected_ticks}};
  write_manifests(m);

  json r = {{"out", o.out},
            {"rows", res.trajectory.size()},
            {"coverage", res.coverage.fraction()},
            {"visited_cells", res.coverage.visited_cells},
            {"reachable_cells", res.coverage.reachable_cells},
            {"corrected_ticks", res.corrected_ticks},
            {"sha256", m.outputs[0].second}};
  emit(r, fmt("wrote %zu rows to %s\ncoverage %.3f (%d/%d cells), %ld corrected ticks\n", res.trajectory.size(),
              o.out.c_str(), res.coverage.fraction(), res.coverage.visited_cells, res.coverage.reachable_cells,
              res.corrected_ticks));
  return 0;
}

// ------------------------------------------------------------------ train-dynmodel

struct ModelOpts {
  std::vector<std::string> datasets, holdout;
  std::string variant, arch, hidden;
  std::optional<int> lags, horizon, batch, max_epochs;
  std::optional<double> lr, holdout_minutes;
  std::optional<std::uint64_t> seed;
  std::string out;
  int budget = 1;
};

void apply_model_overrides(const ModelOpts& o, HammerConfig& cfg) {
  if (!o.variant.empty()) cfg.model.prediction = parse_prediction(o.variant);
  if (!o.arch.empty()) cfg.model.arch = parse_arch(o.arch);
  if (!o.hidden.empty()) cfg.model.hidden = parse_int_list(o.hidden);
  if (o.lags) cfg.model.lags = *o.lags;
  if (o.horizon) cfg.model.horizon = *o.horizon;
  if (o.batch) cfg.model.batch = *o.batch;
  if (o.lr) cfg.model.lr = *o.lr;
  if (o.max_epochs) cfg.train.max_epochs = *o.max_epochs;
  if (o.seed) cfg.seed = *o.seed;
  cfg.train.seed = cfg.seed;
  cfg.validate();
}

int cmd_train_dynmodel(const ModelOpts& o) {
  HammerConfig cfg = load_cfg();
  apply_model_overrides(o, cfg);
  auto m = start_manifest("train-dynmodel", cfg);
  m.seeds["seed"] = cfg.seed;
  Dataset data = load_dataset(o.datasets, cfg, m);
  std::optional<Dataset> held;
  if (!o.holdout.empty()) held = load_dataset(o.holdout, cfg, m);
  if (o.holdout_minutes) {
    require(!held, "--holdout and --holdout-minutes are exclusive");
    auto [rest, tail] = holdout_tail(data, *o.holdout_minutes);
    data = std::move(rest);
    held = std::move(tail);
  }

  auto [fit, val] = split_dataset(data, 0.9);
  const NormBounds bounds = norm_bounds_from_data(fit, cfg.env.chain);
  note("training %s %s on %zu samples (%zu validation)", to_string(cfg.model.arch).c_str(),
       to_string(cfg.model.prediction).c_str(), fit.total_samples(), val.total_samples());
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult res = train(cfg.model, fit, val, bounds, cfg.train);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.model.dataset_hash = dataset_hash(m);

  const std::filesystem::path out(o.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  save_model(res.model, out);
  const std::filesystem::path hist = out.string() + ".history.csv";
  {
    std::ofstream f(hist);
    f << "epoch,train_loss,val_metric\n";
    for (std::size_t e = 0; e < res.history.train_loss.size(); ++e)
      f << fmt("%zu,%.10g,%.10g\n", e, res.history.train_loss[e], res.history.val_metric[e]);
  }
  m.add_output(out);
  m.add_output(hist);

  const int h = cfg.train.eval_horizon, n = cfg.train.eval_trajectories;
  const double train_metric = eval_metric(res.model, fit, n, h, cfg.seed);
  const double val_metric = res.history.best_val;
  json r = {{"out", o.out},
            {"epochs", res.history.train_loss.size()},
            {"best_epoch", res.history.best_epoch},
            {"early_stopped", res.history.early_stopped},
            {"n_params", res.model.num_params()},
            {"train_metric", train_metric},
            {"val_metric", val_metric},
            {"seconds", secs}};
  std::string text = fmt("model %s: %ld params, %zu epochs (best %d)\nL|H=%d train %.4e  validation %.4e\n",
                         o.out.c_str(), long(res.model.num_params()), res.history.train_loss.size(),
                         res.history.best_epoch, h, train_metric, val_metric);
  if (held) {
    const double hm = eval_metric(res.model, *held, n, h, cfg.seed);
    const JointVec rms = open_loop_rms(res.model, *held, n, h, cfg.seed);
    r["holdout_metric"] = hm;
    r["holdout_rms"] = {rms[0], rms[1], rms[2], rms[3]};
    text += fmt("L|H=%d held-out %.4e  open-loop RMS [%.4f %.4f %.4f %.4f] rad\n", h, hm, rms[0], rms[1], rms[2],
                rms[3]);
  }
  m.extra = r;
  write_manifests(m);
  emit(r, text);
  return 0;
}

int cmd_search_dynmodel(const ModelOpts& o) {
  HammerConfig cfg = load_cfg();
  apply_model_overrides(o, cfg);
  require(o.budget >= 1, "--budget must be >= 1");
  auto m = start_manifest("search-dynmodel", cfg);
  m.seeds["seed"] = cfg.seed;
  const Dataset data = load_dataset(o.datasets, cfg, m);
  auto [fit, val] = split_dataset(data, 0.9);
  const NormBounds bounds = norm_bounds_from_data(fit, cfg.env.chain);
  SearchSpace space = SearchSpace::defaults(cfg.model.arch, cfg.model.prediction);
  space.kan_degree = cfg.model.kan_degree;
  Rng rng = make_rng(cfg.seed, 0x5EA7);
  const auto trials = search_hyperparameters(space, fit, val, bounds, o.budget, cfg.train, rng);

  const std::filesystem::path out(o.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  json rows = json::array();
  std::string text = "rank,trial,score,n_params,hidden,lags,horizon,lr,batch\n";
  {
    std::ofstream f(out);
    f << text;
    int rank = 0;
    for (const auto& t : trials) {
      std::string hidden;
      for (int w : t.spec.hidden) hidden += (hidden.empty() ? "" : ";") + std::to_string(w);
      const std::string line = fmt("%d,%d,%.6e,%ld,%s,%d,%d,%g,%d\n", ++rank, t.trial, t.score, long(t.n_params),
                                   hidden.c_str(), t.spec.lags, t.spec.horizon, t.spec.lr, t.spec.batch);
      f << line;
      text += line;
      rows.push_back({{"rank", rank},
                      {"trial", t.trial},
                      {"score", t.score},
                      {"n_params", t.n_params},
                      {"hidden", t.spec.hidden},
                      {"lags", t.spec.lags},
                      {"horizon", t.spec.horizon},
                      {"lr", t.spec.lr},
                      {"batch", t.spec.batch}});
    }
  }
  m.add_output(out);
  write_manifests(m);
  emit({{"out", o.out}, {"trials", rows}}, text);
  return 0;
}

// ------------------------------------------------------------------ train-ppo

struct PpoOpts {
  std::string model, out, curve;
  std::optional<long> steps;
  std::optional<std::uint64_t> seed;
  long curve_every = 200'000;
  int curve_episodes = 20;
};

std::vector<EpisodeSpec> shared_episodes(const HammerConfig& cfg, int n) {
  return make_episode_list(cfg.env, n, cfg.eval.episode_seed);
}

int cmd_train_ppo(const PpoOpts& o) {
  HammerConfig cfg = load_cfg();
  if (o.steps) cfg.ppo.total_steps = *o.steps;
  if (o.seed) cfg.seed = *o.seed;
  require(o.curve_every >= 1 && o.curve_episodes >= 1, "--curve-every and --curve-episodes must be >= 1");
  cfg.validate();
  require_file(o.model, "model");
  auto m = start_manifest("train-ppo", cfg);
  m.seeds["seed"] = cfg.seed;
  m.seeds["episode_seed"] = cfg.eval.episode_seed;
  m.add_input(o.model);
  const DynModel model = load_model(o.model);
  const Env env(cfg.env, model);

  const auto curve_eps = shared_episodes(cfg, o.curve_episodes);
  const std::filesystem::path curve_path = o.curve.empty() ? o.out + ".curve.csv" : o.curve;
  const std::filesystem::path out(o.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  std::ofstream curve(curve_path);
  curve << "step,avg_return,sr_0.04_0.04,sr_0.02_0.02\n";
  long next = o.curve_every;
  auto t0 = std::chrono::steady_clock::now();
  auto log_point = [&](long step, const Policy& p) {
    PpoController ctl(p);
    const auto rep = run_study(env, ctl, curve_eps, cfg.eval.study());
    curve << fmt("%ld,%.6f,%.4f,%.4f\n", step, rep.avg_return, rep.sr_at(0.04, 0.04), rep.sr_at(0.02, 0.02));
    curve.flush();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    note("step %ld  return %.1f  SR(0.04,0.04) %.2f  [%.0fs]", step, rep.avg_return, rep.sr_at(0.04, 0.04), secs);
  };
  const PpoResult res = train_ppo(env, cfg.ppo, cfg.seed, [&](long step, const Policy& p) {
    if (step >= next) {
      log_point(step, p);
      while (next <= step) next += o.curve_every;
    }
  });
  const long final_step = res.stats.empty() ? 0 : res.stats.back().step;
  if (final_step + o.curve_every > next) log_point(final_step, res.policy);
  curve.close();

  save_policy(res.policy, out, cfg.seed, sha256_file(o.model));
  m.add_output(out);
  m.add_output(curve_path);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json r = {{"out", o.out}, {"curve", curve_path.string()}, {"steps", final_step}, {"seconds", secs}};
  m.extra = r;
  write_manifests(m);
  emit(r, fmt("policy %s after %ld steps (%.0f s); curve in %s\n", o.out.c_str(), final_step, secs,
              curve_path.string().c_str()));
  return 0;
}

// ------------------------------------------------------------------ eval

struct EvalOpts {
  std::string controller = "ppo", backend = "model", protocol, model, policy, out, diagnostics, episode_list;
  std::optional<int> episodes, lockstep;
  std::optional<std::uint64_t> seed, episode_seed;
};

json report_summary(const MetricsReport& r) { return json::parse(report_json(r)); }

std::string report_text(const MetricsReport& r) {
  std::string s = fmt("%s on %s (%s, %d episodes): return %.2f  SR(0.02,0.02) %.2f  SR(0.04,0.04) %.2f  "
                      "SR(0.12,0.08) %.2f  OOW %.2f  OOZ %.2f  min z %.3f  EEF-PL %.3f",
                      r.controller.c_str(), r.backend.c_str(), r.protocol.c_str(), r.episodes, r.avg_return,
                      r.sr_at(0.02, 0.02), r.sr_at(0.04, 0.04), r.sr_at(0.12, 0.08), r.oow, r.ooz, r.min_z, r.eef_pl);
  if (r.plan_calls) s += fmt("  plan %.1f ms/call", r.mean_plan_ms);
  return s + "\n";
}

int cmd_eval(const EvalOpts& o) {
  HammerConfig cfg = load_cfg();
  if (o.episodes) cfg.eval.episodes = *o.episodes;
  if (o.lockstep) cfg.eval.lockstep = *o.lockstep;
  if (o.episode_seed) cfg.eval.episode_seed = *o.episode_seed;
  if (!o.protocol.empty()) cfg.eval.protocol = parse_protocol(o.protocol);
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  const bool both = o.backend == "both";
  if (!both) parse_backend(o.backend);
  if (o.controller != "ppo" && o.controller != "icem" && o.controller != "null" && o.controller != "oracle")
    throw ValidationError("unknown controller '" + o.controller + "' (expected ppo, icem, null or oracle)");

  auto m = start_manifest("eval", cfg);
  m.seeds["seed"] = cfg.seed;
  m.seeds["episode_seed"] = cfg.eval.episode_seed;

  // The model defines the observation layout; null and oracle runs on the plant may go without one.
  std::optional<DynModel> model;
  if (!o.model.empty()) {
    require_file(o.model, "model");
    model = load_model(o.model);
    m.add_input(o.model);
  } else if (o.controller == "ppo" || o.controller == "icem" || o.backend != "plant") {
    throw ValidationError("--model is required for this controller / backend");
  } else {
    model.emplace(cfg.model, NormBounds{});
  }
  std::optional<Policy> policy;
  if (o.controller == "ppo") {
    require(!o.policy.empty(), "--policy is required for the ppo controller");
    require_file(o.policy, "policy");
    policy = load_policy(o.policy);
    m.add_input(o.policy);
  }

  std::vector<EpisodeSpec> episodes;
  if (!o.episode_list.empty()) {
    require_file(o.episode_list, "episode list");
    episodes = load_episode_list(o.episode_list);
    m.add_input(o.episode_list);
    if (o.episodes) {
      require(std::size_t(*o.episodes) <= episodes.size(), "--episodes exceeds the episode list");
      episodes.resize(std::size_t(*o.episodes));
    }
  } else {
    episodes = shared_episodes(cfg, cfg.eval.episodes);
  }

  const Plant plant(cfg.plant, cfg.env.chain);
  std::ofstream diag;
  if (!o.diagnostics.empty()) {
    diag.open(o.diagnostics);
    if (!diag) throw RuntimeFailure("cannot write " + o.diagnostics);
  }
  auto run = [&](Backend b) {
    const Env env(cfg.env, *model, b == Backend::Plant ? &plant : nullptr);
    std::unique_ptr<Controller> ctl;
    if (o.controller == "ppo") {
      require(policy->obs_dim() == env.obs_dim(), "policy observation size does not match the model");
      ctl = std::make_unique<PpoController>(*policy);
    } else if (o.controller == "icem") {
      auto ic = std::make_unique<IcemController>(*model, cfg.env, cfg.icem, cfg.seed);
      if (diag.is_open()) ic->set_diagnostics(&diag);
      ctl = std::move(ic);
    } else if (o.controller == "null") {
      ctl = std::make_unique<NullController>();
    } else {
      ctl = std::make_unique<OracleController>();
    }
    note("evaluating %s on %s over %zu episodes", o.controller.c_str(), to_string(b).c_str(), episodes.size());
    return run_study(env, *ctl, episodes, cfg.eval.study());
  };

  const std::filesystem::path out(o.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  const std::filesystem::path ep_path = o.out + "_episode_list.json";
  save_episode_list(episodes, ep_path);
  m.add_output(ep_path);

  auto write = [&](const MetricsReport& rep, const std::string& prefix) {
    write_report(rep, prefix);
    for (const char* suffix : {".json", "_sr.csv", "_episodes.csv"}) m.add_output(prefix + suffix);
  };

  json r;
  std::string text;
  if (both) {
    const auto rm = run(Backend::Model);
    const auto rp = run(Backend::Plant);
    write(rm, o.out + "_model");
    write(rp, o.out + "_plant");
    const std::string gap_path = o.out + "_gap.csv";
    {
      std::ofstream f(gap_path);
      f << sr_csv(sr_gap(rm, rp));
    }
    m.add_output(gap_path);
    r = {{"model", report_summary(rm)}, {"plant", report_summary(rp)}, {"gap", gap_path}};
    text = report_text(rm) + report_text(rp) +
           fmt("gap SR(0.04,0.04) %+.2f  SR(0.12,0.08) %+.2f\n", rp.sr_at(0.04, 0.04) - rm.sr_at(0.04, 0.04),
               rp.sr_at(0.12, 0.08) - rm.sr_at(0.12, 0.08));
  } else {
    const auto rep = run(parse_backend(o.backend));
    write(rep, o.out);
    r = report_summary(rep);
    text = report_text(rep);
  }
  if (diag.is_open()) {
    diag.close();
    m.add_output(o.diagnostics);
  }
  write_manifests(m);
  emit(r, text);
  return 0;
}

// ------------------------------------------------------------------ ablate-reward

struct AblateOpts {
  std::string model, out;
  std::vector<std::string> flags;
  int seeds = 5;
  std::optional<long> steps;
  std::optional<int> episodes;
  std::optional<std::uint64_t> seed;
};

int cmd_ablate(const AblateOpts& o) {
  HammerConfig cfg = load_cfg();
  if (o.steps) cfg.ppo.total_steps = *o.steps;
  if (o.episodes) cfg.eval.episodes = *o.episodes;
  if (o.seed) cfg.seed = *o.seed;
  require(o.seeds >= 1, "--seeds must be >= 1");
  cfg.validate();
  std::vector<RewardFlags> sets;
  for (const auto& f : o.flags) sets.push_back(RewardFlags::parse(f));
  if (sets.empty()) sets = ablation_flag_sets();

  require_file(o.model, "model");
  auto m = start_manifest("ablate-reward", cfg);
  m.add_input(o.model);
  const DynModel model = load_model(o.model);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < o.seeds; ++i) seeds.push_back(cfg.seed + std::uint64_t(i));
  m.seeds["seeds"] = seeds;
  m.seeds["episode_seed"] = cfg.eval.episode_seed;

  const auto rows = run_ablation(cfg.env, model, cfg.ppo, sets, seeds, shared_episodes(cfg, cfg.eval.episodes),
                                 cfg.eval.study(), [](const AblationRun& run) {
                                   note("%-14s seed %llu: SR(0.02,0.02) %.2f  return %.1f",
                                        run.flags.to_string().c_str(), static_cast<unsigned long long>(run.seed),
                                        run.report.sr_at(0.02, 0.02), run.report.avg_return);
                                 });
  const std::filesystem::path out(o.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  const std::string table = ablation_csv(rows);
  {
    std::ofstream f(out);
    f << table;
  }
  m.add_output(out);
  write_manifests(m);
  json jr = json::array();
  for (const auto& row : rows) {
    json e = {{"reward", row.flags.to_string()}};
    for (const auto& a : row.metrics) e[a.metric] = {{"mean", a.mean}, {"std", a.std}};
    jr.push_back(e);
  }
  emit({{"out", o.out}, {"rows", jr}}, table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // batch matrices are a few hundred KB; keep them off mmap
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  for (int i = 0; i < argc; ++i) g.argv.emplace_back(argv[i]);
  CLI::App app{"Learned-model reaching control toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", g.config_path, "TOML config (defaults built in)");
  app.add_flag("--json", g.json_out, "Machine-readable stdout");
  app.add_flag("-q,--quiet", g.quiet, "No progress output on stderr");

  GenerateOpts gen;
  auto* c_gen = app.add_subcommand("generate-data", "Record a scripted excitation session on the plant");
  c_gen->add_option("--minutes", gen.minutes, "Session length")->required();
  c_gen->add_option("--seed", gen.seed);
  c_gen->add_option("--out", gen.out, "CSV path")->required();

  ModelOpts mo;
  auto add_model_opts = [&](CLI::App* c) {
    c->add_option("--dataset", mo.datasets, "Trajectory CSV (repeatable)")->required();
    c->add_option("--variant", mo.variant, "dq | dqdot");
    c->add_option("--arch", mo.arch, "mlp | kan");
    c->add_option("--lags", mo.lags);
    c->add_option("--horizon", mo.horizon);
    c->add_option("--batch", mo.batch);
    c->add_option("--lr", mo.lr);
    c->add_option("--max-epochs", mo.max_epochs);
    c->add_option("--seed", mo.seed);
    c->add_option("--out", mo.out)->required();
  };
  auto* c_train = app.add_subcommand("train-dynmodel", "Train a residual dynamics model");
  add_model_opts(c_train);
  c_train->add_option("--holdout", mo.holdout, "Held-out trajectory CSV (repeatable)");
  c_train->add_option("--holdout-minutes", mo.holdout_minutes, "Hold out the end of the last dataset");
  c_train->add_option("--hidden", mo.hidden, "Hidden widths, e.g. 512,128");
  auto* c_search = app.add_subcommand("search-dynmodel", "Random hyperparameter search");
  add_model_opts(c_search);
  c_search->add_option("--budget", mo.budget, "Number of trials");

  PpoOpts po;
  auto* c_ppo = app.add_subcommand("train-ppo", "Train a PPO policy on a learned model");
  c_ppo->add_option("--model", po.model)->required();
  c_ppo->add_option("--steps", po.steps);
  c_ppo->add_option("--seed", po.seed);
  c_ppo->add_option("--out", po.out)->required();
  c_ppo->add_option("--curve", po.curve, "Learning-curve CSV (default <out>.curve.csv)");
  c_ppo->add_option("--curve-every", po.curve_every, "Environment steps between curve points");
  c_ppo->add_option("--curve-episodes", po.curve_episodes, "Shared episodes per curve point");

  EvalOpts eo;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a controller on the shared episode list");
  c_eval->add_option("--controller", eo.controller, "ppo | icem | null | oracle");
  c_eval->add_option("--backend", eo.backend, "model | plant | both");
  c_eval->add_option("--episodes", eo.episodes);
  c_eval->add_option("--protocol", eo.protocol, "fixed | sequential");
  c_eval->add_option("--model", eo.model);
  c_eval->add_option("--policy", eo.policy);
  c_eval->add_option("--seed", eo.seed, "Controller seed");
  c_eval->add_option("--episode-seed", eo.episode_seed);
  c_eval->add_option("--episode-list", eo.episode_list, "JSON episode list instead of the seeded one");
  c_eval->add_option("--lockstep", eo.lockstep);
  c_eval->add_option("--diagnostics", eo.diagnostics, "iCEM per-iteration CSV");
  c_eval->add_option("--out", eo.out, "Report prefix")->required();

  AblateOpts ao;
  auto* c_abl = app.add_subcommand("ablate-reward", "PPO under reward-term subsets");
  c_abl->add_option("--model", ao.model)->required();
  c_abl->add_option("--flags", ao.flags, "Comma-separated subset of X,q,eps,a,W (repeatable)");
  c_abl->add_option("--seeds", ao.seeds);
  c_abl->add_option("--steps", ao.steps);
  c_abl->add_option("--episodes", ao.episodes);
  c_abl->add_option("--seed", ao.seed, "First seed");
  c_abl->add_option("--out", ao.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*c_gen) return cmd_generate(gen);
    if (*c_train) return cmd_train_dynmodel(mo);
    if (*c_search) return cmd_search_dynmodel(mo);
    if (*c_ppo) return cmd_train_ppo(po);
    if (*c_eval) return cmd_eval(eo);
    if (*c_abl) return cmd_ablate(ao);
  } catch (const ValidationError& e) {
    if (g.json_out) std::cout << json{{"error", e.what()}, {"kind", "validation"}}.dump() << std::endl;
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    if (g.json_out) std::cout << json{{"error", e.what()}, {"kind", "runtime"}}.dump() << std::endl;
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
