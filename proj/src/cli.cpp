// SPDX-License-Identifier: Apache-2.0
#include "antlab/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "antlab/checkpoint.hpp"
#include "antlab/evaluation.hpp"
#include "antlab/io.hpp"
#include "antlab/spectral.hpp"

namespace antlab {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, seed, out_dir, corpus, checkpoint, corpus_size, T, no_sta,
                                                sta_sigma, iterations, batch_size, lr, lr_schedule, cond_dropout,
                                                weight_decay, grad_clip, val_every, resume, omega_max, omega_min,
                                                lambda, skip_frac, static_cfg, literal_skip, steps, sampler, prompts,
                                                n_samples, eval_reps, eval_prompts, draws, bench_reps, bench_warmup,
                                                bench_batch, bench_max_ratio, grid_omega_min, grid_omega_max,
                                                grid_reps, grid_prompts, attention_prompts)

std::string RunConfig::corpus_path() const {
  return corpus.empty() ? (std::filesystem::path(out_dir) / "corpus.jsonl").string() : corpus;
}

std::string RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? (std::filesystem::path(out_dir) / "model.ck").string() : checkpoint;
}

GuidancePolicy RunConfig::policy() const {
  GuidancePolicy p;
  p.omega_max = omega_max;
  p.omega_min = omega_min;
  p.lambda = lambda;
  p.skip_fraction = skip_frac;
  p.mode = static_cfg ? GuidanceMode::kStatic : GuidanceMode::kDynamic;
  p.skip_rule = literal_skip ? SkipRule::kLiteralTime : SkipRule::kElapsedFraction;
  p.validate();
  return p;
}

ModelOptions RunConfig::model_options() const {
  ModelOptions o;
  o.T = T;
  o.conditioner.kind = no_sta ? ConditionerKind::kStatic : ConditionerKind::kSta;
  if (sta_sigma == "statistic") {
    o.conditioner.sigma_mode = SigmaMode::kStatistic;
  } else if (sta_sigma == "learned") {
    o.conditioner.sigma_mode = SigmaMode::kLearned;
  } else {
    throw std::invalid_argument("sta_sigma must be 'statistic' or 'learned', got '" + sta_sigma + "'");
  }
  return o;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.batch_size = batch_size;
  c.lr = lr;
  c.iterations = iterations;
  c.cond_dropout = cond_dropout;
  c.seed = derive_seed(seed, "train");
  c.weight_decay = weight_decay;
  c.grad_clip = grad_clip;
  c.val_every = val_every;
  if (lr_schedule == "cosine") {
    c.lr_schedule = LrSchedule::kCosine;
  } else if (lr_schedule == "constant") {
    c.lr_schedule = LrSchedule::kConstant;
  } else {
    throw std::invalid_argument("lr_schedule must be 'cosine' or 'constant', got '" + lr_schedule + "'");
  }
  c.validate();
  return c;
}

SamplerMethod RunConfig::sampler_method() const {
  if (sampler == "2m") return SamplerMethod::kSecondOrderMultistep;
  if (sampler == "first-order") return SamplerMethod::kFirstOrder;
  throw std::invalid_argument("sampler must be '2m' or 'first-order', got '" + sampler + "'");
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  to_json(j, cfg);
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  const nlohmann::json known = to_json(RunConfig{});
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");
    const auto& want = known.at(key);
    const bool ok = (want.is_boolean() && value.is_boolean()) || (want.is_string() && value.is_string()) ||
                    (want.is_array() && value.is_array()) ||
                    (want.is_number_float() && value.is_number()) ||
                    (want.is_number_unsigned() && value.is_number_unsigned()) ||
                    (want.is_number_integer() && !want.is_number_unsigned() && value.is_number_integer());
    if (!ok) throw std::invalid_argument("config key '" + key + "' has the wrong type: " + value.dump());
  }
  try {
    return j.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string flag_name(const std::string& key) {
  std::string f = key;
  for (char& c : f)
    if (c == '_') c = '-';
  return "--" + f;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Typed JSON value for a flag, shaped like the default it overrides.
nlohmann::json flag_value(const std::string& key, const nlohmann::json& want, const std::vector<std::string>& raw) {
  try {
    if (want.is_array()) {
      nlohmann::json arr = nlohmann::json::array();
      if (key == "prompts") {
        for (const auto& r : raw) arr.push_back(r);
      } else {
        for (const auto& r : raw)
          for (const auto& item : split_list(r)) arr.push_back(std::stod(item));
      }
      return arr;
    }
    const std::string& v = raw.back();
    std::size_t used = 0;
    nlohmann::json out;
    if (want.is_number_unsigned()) {
      if (v.find('-') != std::string::npos) throw std::invalid_argument("negative");
      out = static_cast<std::uint64_t>(std::stoull(v, &used));
    } else if (want.is_number_integer()) {
      out = static_cast<std::int64_t>(std::stoll(v, &used));
    } else if (want.is_number_float()) {
      out = std::stod(v, &used);
    } else {
      return v;
    }
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw UsageError("invalid value for " + flag_name(key) + ": '" + raw.back() + "'");
  }
}

std::vector<Prompt> parse_prompts(const std::vector<std::string>& texts) {
  std::vector<Prompt> out;
  for (const auto& t : texts) {
    Prompt p;
    std::istringstream ss(t);
    std::string tok;
    while (ss >> tok) p.tokens.push_back(tok);
    validate_prompt(p);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Pair> load_corpus(const RunConfig& cfg) {
  const std::string path = cfg.corpus_path();
  std::ifstream is(path);
  if (!is) throw std::runtime_error("corpus '" + path + "' not found; run `antlab corpus` first");
  try {
    return read_corpus_jsonl(is);
  } catch (const std::exception& e) {
    throw std::runtime_error("corpus '" + path + "': " + e.what());
  }
}

struct LoadedModel {
  Model model;
  nlohmann::json train_config;
};

LoadedModel load_model(const RunConfig& cfg) {
  const std::string path = cfg.checkpoint_path();
  if (!std::filesystem::exists(path)) throw std::runtime_error("checkpoint '" + path + "' not found; run `antlab train` first");
  const Checkpoint ckpt = load_checkpoint(path);
  const auto manifest = nlohmann::json::parse(ckpt.manifest_json);
  // The architecture comes from the configuration the checkpoint was trained with.
  const RunConfig trained = config_from_json(manifest.at("config"));
  Model m = make_model(0, trained.model_options());
  const std::string want = manifest.value("architecture_hash", std::string());
  if (hash_hex(architecture_hash(m)) != want)
    throw std::runtime_error("checkpoint '" + path + "' architecture hash " + want + " does not match this build");
  restore_model(m, ckpt);
  return {std::move(m), manifest.at("config")};
}

class Outputs {
 public:
  Outputs(const RunConfig& cfg, std::ostream& out) : dir_(cfg.out_dir), out_(out) {}
  void write(const std::string& name, const std::string& content) {
    const std::string path = (dir_ / name).string();
    write_file_atomic(path, content);
    out_ << "wrote " << path << "\n";
  }

 private:
  std::filesystem::path dir_;
  std::ostream& out_;
};

std::string motions_jsonl(const Tensor& motions, const std::vector<const Prompt*>& prompts) {
  const std::size_t n = motions.dim(1), d = motions.dim(2);
  std::string out;
  for (std::size_t b = 0; b < prompts.size(); ++b) {
    nlohmann::json rec;
    rec["index"] = b;
    rec["tokens"] = prompts[b]->tokens;
    auto frames = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) {
      auto row = nlohmann::json::array();
      for (std::size_t c = 0; c < d; ++c) row.push_back(motions[(b * n + i) * d + c]);
      frames.push_back(std::move(row));
    }
    rec["frames"] = std::move(frames);
    out += rec.dump() + "\n";
  }
  return out;
}

std::vector<const Prompt*> pick_prompts(const std::vector<Prompt>& explicit_prompts, const std::vector<Pair>& pool,
                                        std::size_t n) {
  std::vector<const Prompt*> out;
  if (!explicit_prompts.empty()) {
    for (const auto& p : explicit_prompts) out.push_back(&p);
    return out;
  }
  if (pool.empty()) throw std::runtime_error("no prompts given and the validation split is empty");
  for (std::size_t i = 0; i < n; ++i) out.push_back(&pool[i % pool.size()].prompt);
  return out;
}

int cmd_corpus(const RunConfig& cfg, Outputs& outputs, std::ostream& out) {
  auto corpus = generate_corpus(cfg.corpus_size, derive_seed(cfg.seed, "corpus"));
  std::ostringstream os;
  write_corpus_jsonl(corpus, os);
  write_file_atomic(cfg.corpus_path(), os.str());
  out << "wrote " << cfg.corpus_path() << "\n";
  const CorpusSplit split = split_corpus(std::move(corpus));
  nlohmann::json manifest;
  manifest["size"] = cfg.corpus_size;
  manifest["train"] = {0, split.train.size()};
  manifest["val"] = {split.train.size(), split.train.size() + split.val.size()};
  manifest["test"] = {split.train.size() + split.val.size(), cfg.corpus_size};
  outputs.write("split.json", manifest.dump(2) + "\n");
  return 0;
}

int cmd_train(const RunConfig& cfg, const nlohmann::json& echo, Outputs& outputs, std::ostream& out) {
  const CorpusSplit split = split_corpus(load_corpus(cfg));
  const TrainConfig tc = cfg.train_config();
  TrainState state{make_model(derive_seed(cfg.seed, "model"), cfg.model_options()), {}, {}};
  if (cfg.resume && std::filesystem::exists(cfg.checkpoint_path())) {
    resume_training(state, load_checkpoint(cfg.checkpoint_path()));
    out << "resumed at step " << state.opt.step << "\n";
  }
  train(state, split.train, split.val, tc, tc.iterations, [&out](const TrainLogRow& r) {
    if (r.has_val) out << "step " << r.step << " val_loss " << fmt_real(r.val_loss) << "\n";
  });
  save_checkpoint(cfg.checkpoint_path(), make_training_checkpoint(state, echo.dump()));
  out << "wrote " << cfg.checkpoint_path() << "\n";
  outputs.write("train_log.csv", train_log_csv(state.log));
  return 0;
}

int cmd_sample(const RunConfig& cfg, Outputs& outputs, std::ostream& out) {
  LoadedModel lm = load_model(cfg);
  const CorpusSplit split = split_corpus(load_corpus(cfg));
  const auto explicit_prompts = parse_prompts(cfg.prompts);
  const auto prompts = pick_prompts(explicit_prompts, split.val, cfg.n_samples);
  const GuidancePolicy policy = cfg.policy();
  const SamplerPlan plan = make_plan(lm.model.options.T, cfg.steps, cfg.sampler_method());
  const NoiseSchedule sched = make_cosine_schedule(lm.model.options.T);

  Rng noise(derive_seed(cfg.seed, "sample"));
  const Tensor x_T = randn({prompts.size(), lm.model.options.frames, kMotionDim}, noise);
  SampleOptions so;
  so.record_x0 = true;
  const SampleResult res = guided_sample(lm.model, x_T, prompts, plan, policy, sched, so);
  outputs.write("motions.jsonl", motions_jsonl(res.motions, prompts));

  // Per-trajectory counts; wall time is reported on stdout only so the file stays reproducible.
  const double b = static_cast<double>(prompts.size());
  CsvTable cost({"trajectories", "cond_evals", "uncond_evals", "total_evals"});
  cost.row({std::to_string(prompts.size()), fmt_real(res.cost.cond_evals / b), fmt_real(res.cost.uncond_evals / b),
            fmt_real(res.cost.total() / b)});
  outputs.write("cost.csv", cost.str());
  out << "sampling wall time " << fmt_real(res.cost.wall_seconds) << " s\n";

  const BandCurves bands = band_recovery_curves(res.x0_track, res.motions, BandSplit{});
  outputs.write("band_curves.csv", bands.csv());
  out << "band entry steps: low " << bands.low_enter << ", high " << bands.high_enter << "\n";

  if (cfg.eval_reps > 0) {
    EvalConfig ec;
    ec.reps = cfg.eval_reps;
    ec.prompts_per_rep = cfg.eval_prompts;
    ec.steps = cfg.steps;
    ec.method = cfg.sampler_method();
    ec.policy = policy;
    ec.seed = derive_seed(cfg.seed, "eval");
    const MetricReport rep = evaluate_model(lm.model, split.val, fit_scaler(split.train), ec);
    outputs.write("metrics.csv", rep.csv());
  }
  return 0;
}

int cmd_spectrum(const RunConfig& cfg, Outputs& outputs, std::ostream& out) {
  std::vector<CheckReport> reports;
  const std::size_t n = 64;
  const std::uint64_t s = derive_seed(cfg.seed, "spectrum");
  {
    std::vector<double> tone(n), law_signal = power_law_signal(n, SpectralLaw{}, derive_seed(s, "signal"));
    for (std::size_t i = 0; i < n; ++i) tone[i] = std::cos(2.0 * std::numbers::pi * 3.0 * static_cast<double>(i) / n);
    reports.push_back(verify_psd_theorem(tone, 1.0, 2.0, cfg.draws, derive_seed(s, "psd", 0)));
    reports.push_back(verify_psd_theorem(law_signal, 0.5, 1.0, cfg.draws, derive_seed(s, "psd", 1)));
    reports.push_back(verify_psd_theorem(std::vector<double>(n, 0.0), 1.3, 0.7, cfg.draws, derive_seed(s, "psd", 2)));
  }
  reports.push_back(verify_crossing_empirically(SpectralLaw{}, CrossingOptions{}, std::max<std::size_t>(cfg.draws / 5, 200),
                                                derive_seed(s, "crossing")));
  for (std::size_t i = 0; i < reports.size(); ++i) {
    reports[i].name += "-" + std::to_string(i + 1);
    outputs.write("spectrum_" + reports[i].name + ".csv", reports[i].csv());
  }

  const DependencyReport corr = verify_low_high_dependency(cfg.draws, 0.8, 1.0, derive_seed(s, "dependency"));
  const DependencyReport indep = verify_low_high_dependency(cfg.draws, 0.0, 1.0, derive_seed(s, "independent"));
  CsvTable dep({"rho", "lhs", "rhs", "margin", "stderr", "regularized"});
  for (const auto& [rho, r] : {std::pair{0.8, corr}, std::pair{0.0, indep}})
    dep.row({fmt_real(rho), fmt_real(r.lhs), fmt_real(r.rhs), fmt_real(r.margin), fmt_real(r.stderr_margin),
             r.regularized ? "1" : "0"});
  outputs.write("spectrum_dependency.csv", dep.str());

  bool ok = true;
  CsvTable summary({"check", "status"});
  for (const auto& r : reports) {
    out << r.line() << "\n";
    ok = ok && r.passed;
    summary.row({r.name, r.passed ? "pass" : r.inconclusive ? "inconclusive" : "fail"});
  }
  const bool corr_ok = corr.margin > 5.0 * corr.stderr_margin;
  const bool indep_ok = std::abs(indep.margin) < 3.0 * indep.stderr_margin;
  out << (corr_ok ? "PASS" : "FAIL") << " dependency-correlated: margin " << fmt_real(corr.margin) << " = "
      << fmt_real(corr.margin / corr.stderr_margin) << " SE\n";
  out << (indep_ok ? "PASS" : "FAIL") << " dependency-independent: margin " << fmt_real(indep.margin) << " = "
      << fmt_real(indep.margin / indep.stderr_margin) << " SE\n";
  summary.row({"dependency-correlated", corr_ok ? "pass" : "fail"});
  summary.row({"dependency-independent", indep_ok ? "pass" : "fail"});
  outputs.write("spectrum_summary.csv", summary.str());
  return ok && corr_ok && indep_ok ? 0 : 1;
}

int cmd_attention(const RunConfig& cfg, Outputs& outputs, std::ostream& out) {
  LoadedModel lm = load_model(cfg);
  const CorpusSplit split = split_corpus(load_corpus(cfg));
  const auto explicit_prompts = parse_prompts(cfg.prompts);
  const auto prompts = pick_prompts(explicit_prompts, split.val, std::min(cfg.attention_prompts, split.val.size()));
  const auto profile = capture_attention_profile(lm.model, prompts, make_plan(lm.model.options.T, cfg.steps, cfg.sampler_method()),
                                                 cfg.policy(), derive_seed(cfg.seed, "attention"));
  outputs.write("attention.csv", attention_csv(profile));
  const AttentionTrend tr = attention_trend(profile);
  out << (tr.concentrates() ? "PASS" : "FAIL") << " attention-trend: first-3 variance " << fmt_real(tr.first)
      << ", last-3 variance " << fmt_real(tr.last) << "\n";
  return tr.concentrates() ? 0 : 1;
}

int cmd_bench(const RunConfig& cfg, Outputs& outputs, std::ostream& out) {
  LoadedModel lm = load_model(cfg);
  const CorpusSplit split = split_corpus(load_corpus(cfg));
  const auto explicit_prompts = parse_prompts(cfg.prompts);
  const auto prompts = pick_prompts(explicit_prompts, split.val, cfg.bench_batch);
  const GuidancePolicy dcfg = cfg.policy();
  GuidancePolicy plain = dcfg;
  plain.mode = GuidanceMode::kStatic;
  plain.skip_fraction = 1.0;
  const SamplerPlan plan = make_plan(lm.model.options.T, cfg.steps, cfg.sampler_method());
  const auto rows = bench_sampling(lm.model, prompts, {{"no-dcfg", plain}, {"dcfg", dcfg}}, plan, cfg.bench_reps,
                                   cfg.bench_warmup, derive_seed(cfg.seed, "bench"));
  outputs.write("bench.csv", bench_csv(rows));

  std::size_t kept = 0;
  for (int t : plan.step_times) kept += skips_conditional(t, lm.model.options.T, dcfg) ? 0 : 1;
  const double steps = static_cast<double>(plan.size());
  const bool counts_ok = rows[0].cond_evals + rows[0].uncond_evals == 2.0 * steps &&
                         rows[1].cond_evals + rows[1].uncond_evals == steps + static_cast<double>(kept);
  const double ratio = rows[1].median_seconds / rows[0].median_seconds;
  const bool time_ok = ratio <= cfg.bench_max_ratio;
  out << (counts_ok ? "PASS" : "FAIL") << " bench-counts: " << fmt_real(rows[1].cond_evals + rows[1].uncond_evals)
      << " vs " << fmt_real(rows[0].cond_evals + rows[0].uncond_evals) << " evaluations per trajectory\n";
  out << (time_ok ? "PASS" : "FAIL") << " bench-time: ratio " << fmt_real(ratio) << " (bound "
      << fmt_real(cfg.bench_max_ratio) << ")" << (rows[0].flagged || rows[1].flagged ? ", multiplier raised" : "")
      << "\n";
  return counts_ok && time_ok ? 0 : 1;
}

int cmd_grid(const RunConfig& cfg, Outputs& outputs, std::ostream& out) {
  LoadedModel lm = load_model(cfg);
  const CorpusSplit split = split_corpus(load_corpus(cfg));
  const FeatureScaler scaler = fit_scaler(split.train);
  const auto metric = [&](const GuidancePolicy& p, std::size_t rep) {
    EvalConfig ec;
    ec.reps = 1;
    ec.prompts_per_rep = cfg.grid_prompts;
    ec.mm_prompts = 0;
    ec.steps = cfg.steps;
    ec.method = cfg.sampler_method();
    ec.policy = p;
    ec.seed = derive_seed(cfg.seed, "grid", rep);
    return evaluate_model(lm.model, split.val, scaler, ec).top1.mean;
  };
  const GridResult g = grid_search(cfg.grid_omega_min, cfg.grid_omega_max, cfg.policy(), cfg.grid_reps, metric);
  outputs.write("grid_table.csv", g.table_csv());
  outputs.write("grid_cells.csv", g.cells_csv());
  if (!g.any_ok) {
    out << "FAIL grid: no cell evaluated successfully\n";
    return 1;
  }
  const auto& best = g.cells[g.best];
  out << "PASS grid: best top1 " << fmt_real(best.mean) << " at omega_min " << fmt_real(best.omega_min)
      << ", omega_max " << fmt_real(best.omega_max) << "\n";
  return 0;
}

const std::vector<std::string> kCommands{"corpus", "train", "sample", "spectrum", "attention", "bench", "grid"};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const nlohmann::json defaults = to_json(RunConfig{});
  std::string command;
  RunConfig cfg;
  nlohmann::json echo;
  try {
    if (args.empty() || std::find(kCommands.begin(), kCommands.end(), args[0]) == kCommands.end()) {
      if (!args.empty() && (args[0] == "--help" || args[0] == "-h")) {
        out << "usage: antlab {corpus|train|sample|spectrum|attention|bench|grid} [--config file.json] [flags]\n"
               "run `antlab <command> --help` for the flags\n";
        return 0;
      }
      throw UsageError("expected a command: corpus, train, sample, spectrum, attention, bench or grid");
    }
    command = args[0];

    CLI::App app("antlab " + command);
    std::string config_file;
    app.add_option("--config", config_file, "JSON config file; flags override its values");
    std::map<std::string, std::vector<std::string>> raw;
    std::map<std::string, bool> flags;
    std::map<std::string, CLI::Option*> opts;
    for (const auto& [key, value] : defaults.items()) {
      if (value.is_boolean()) {
        flags[key] = false;
        opts[key] = app.add_flag(flag_name(key), flags[key]);
      } else {
        opts[key] = app.add_option(flag_name(key), raw[key]);
        if (!value.is_array()) opts[key]->expected(1);
      }
    }
    std::vector<std::string> rest(args.begin() + 1, args.end());
    std::reverse(rest.begin(), rest.end());  // CLI11 consumes from the back
    try {
      app.parse(rest);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::ParseError& e) {
      throw UsageError(e.what());
    }

    nlohmann::json merged = defaults;
    if (!config_file.empty()) {
      nlohmann::json file;
      try {
        file = nlohmann::json::parse(read_file(config_file));
      } catch (const nlohmann::json::exception& e) {
        throw UsageError("config '" + config_file + "': " + e.what());
      }
      // A config echo nests the settings under "config".
      if (file.is_object() && file.contains("config") && file.contains("command")) file = file.at("config");
      config_from_json(file);  // rejects unknown keys and wrong types
      merged.merge_patch(file);
    }
    for (const auto& [key, opt] : opts) {
      if (opt->count() == 0) continue;
      merged[key] = defaults.at(key).is_boolean() ? nlohmann::json(true) : flag_value(key, defaults.at(key), raw.at(key));
    }
    cfg = config_from_json(merged);
    echo = {{"command", command}, {"config", to_json(cfg)}};
  } catch (const std::exception& e) {
    err << "antlab: " << e.what() << "\n";
    return 2;
  }

  try {
    Outputs outputs(cfg, out);
    outputs.write("config_echo_" + command + ".json", echo.dump(2) + "\n");
    if (command == "corpus") return cmd_corpus(cfg, outputs, out);
    if (command == "train") return cmd_train(cfg, echo.at("config"), outputs, out);
    if (command == "sample") return cmd_sample(cfg, outputs, out);
    if (command == "spectrum") return cmd_spectrum(cfg, outputs, out);
    if (command == "attention") return cmd_attention(cfg, outputs, out);
    if (command == "bench") return cmd_bench(cfg, outputs, out);
    return cmd_grid(cfg, outputs, out);
  } catch (const std::exception& e) {
    err << "antlab " << command << ": " << e.what() << "\n";
    return 2;
  }
}

}  // namespace antlab
