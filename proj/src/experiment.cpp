#include "factr/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "factr/dataset.hpp"
#include "factr/ntk.hpp"
#include "factr/rng.hpp"

namespace factr::harness {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) raise(ErrorKind::io, "cannot open for writing: " + tmp);
    os << content;
    if (!os) raise(ErrorKind::io, "short write to " + tmp);
  }
  fs::rename(tmp, path);
}

struct VariantSpec {
  std::string name;
  bool vision_only = false;
  bool use_curriculum = false;
};

VariantSpec variant_spec(const std::string& name) {
  if (name == "vision_only") return {name, true, false};
  if (name == "vision_force") return {name, false, false};
  if (name == "curriculum") return {name, false, true};
  raise(ErrorKind::config, "unknown variant '" + name + "'");
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string train_log_csv(const std::vector<policy::TrainLogRow>& log) {
  std::ostringstream os;
  os << "step,sigma,loss,lr,force_mass\n";
  for (const auto& row : log) {
    os << row.step << ',' << fmt(row.sigma) << ',' << fmt(row.loss) << ',' << fmt(row.lr) << ','
       << fmt(row.force_mass) << '\n';
  }
  return os.str();
}

std::string trace_csv(const policy::TrialResult& trial) {
  std::ostringstream os;
  os << "t,layer,vision_mass,force_mass,contact\n";
  for (const auto& s : trial.trace) {
    os << s.t << ',' << s.layer << ',' << fmt(s.vision_mass) << ',' << fmt(s.force_mass) << ','
       << (s.contact ? 1 : 0) << '\n';
  }
  return os.str();
}

std::vector<int> split_textures(const std::string& split) {
  if (split == "train") return {std::begin(sim::kTrainTextures), std::end(sim::kTrainTextures)};
  if (split == "test") return {std::begin(sim::kTestTextures), std::end(sim::kTestTextures)};
  raise(ErrorKind::config, "unknown split '" + split + "' (use train or test)");
}

policy::EvalConfig eval_config(const Config& cfg, const std::string& split, bool recovery,
                               std::uint64_t seed) {
  policy::EvalConfig ec;
  ec.task = cfg.str("data.task");
  ec.texture_pool = split_textures(split);
  ec.trials_per_texture = static_cast<int>(cfg.integer("eval.trials_per_texture"));
  ec.recovery_mode = recovery;
  ec.seed = seed;
  ec.episode = episode_from(cfg);
  return ec;
}

std::uint64_t eval_seed_for(long train_seed, const std::string& split, bool recovery) {
  std::string tag = split + (recovery ? "+recovery" : "");
  std::uint64_t h = fnv1a64(tag.data(), tag.size());
  return h ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(train_seed + 7));
}

struct CellPaths {
  fs::path dir;
  fs::path checkpoint;
};

CellPaths cell_paths(const std::string& out_dir, const std::string& variant, long seed) {
  CellPaths p;
  p.dir = fs::path(out_dir) / (variant + "_s" + std::to_string(seed));
  p.checkpoint = p.dir / "checkpoint.ckpt";
  return p;
}

policy::Net train_cell(const Config& cfg, const std::vector<EpisodeRecord>& dataset,
                       const VariantSpec& variant, long seed, const fs::path& dir) {
  fs::create_directories(dir);
  auto mc = model_from(cfg);
  mc.vision_only = variant.vision_only;
  auto tc = train_from(cfg);
  tc.seed = static_cast<std::uint64_t>(seed);

  policy::Net net(mc, static_cast<std::uint64_t>(seed));
  curriculum::CurriculumConfig curr;
  const curriculum::CurriculumConfig* curr_ptr = nullptr;
  if (variant.use_curriculum) {
    curr = curriculum_from(cfg, tc.total_steps);
    curr_ptr = &curr;
  }
  const auto result = policy::train_policy(net, dataset, curr_ptr, tc);
  write_text_atomic((dir / "trainlog.csv").string(), train_log_csv(result.log));
  policy::save_checkpoint(net, (dir / "checkpoint.ckpt").string(), cfg.hash());
  return net;
}

struct SplitMetrics {
  double success = 0.0;
  double recovery = 0.0;
  int faults = 0;
  double contact_mass = 0.0;
  double precontact_mass = 0.0;
};

SplitMetrics eval_cell(const Config& cfg, const policy::Net& net, const std::string& split,
                       long seed, const fs::path& dir) {
  const auto model = chain_from(cfg);
  const auto params = follower_from(cfg);

  const auto ec = eval_config(cfg, split, false, eval_seed_for(seed, split, false));
  const auto res = policy::evaluate_policy(net, ec, model, params);

  SplitMetrics m;
  m.success = res.success_rate;
  m.faults = res.total_faults;
  m.contact_mass = res.mean_contact_force_mass;
  m.precontact_mass = res.mean_precontact_force_mass;

  const auto traces_dir = dir / ("traces_" + split);
  fs::create_directories(traces_dir);
  std::ostringstream trials;
  trials << "episode,task,texture_id,success,faults,crushed,scene_seed\n";
  for (std::size_t i = 0; i < res.trials.size(); ++i) {
    char name[48];
    std::snprintf(name, sizeof(name), "trial_%03zu.csv", i);
    write_text_atomic((traces_dir / name).string(), trace_csv(res.trials[i]));
    const auto& t = res.trials[i];
    trials << i << ',' << cfg.str("data.task") << ',' << t.texture_id << ','
           << (t.success ? 1 : 0) << ',' << t.fault_count << ',' << (t.crushed ? 1 : 0) << ','
           << t.scene_seed << '\n';
  }
  write_text_atomic((dir / ("trials_" + split + ".csv")).string(), trials.str());

  if (cfg.boolean("eval.recovery")) {
    const auto rc = eval_config(cfg, split, true, eval_seed_for(seed, split, true));
    const auto rres = policy::evaluate_policy(net, rc, model, params);
    m.recovery = rres.recovery_rate;
  }
  return m;
}

std::string summary_csv(const std::vector<CellOutcome>& cells) {
  std::ostringstream os;
  os << "variant,seed,split,success,faults,recovery,contact_force_mass,precontact_force_mass\n";
  for (const auto& c : cells) {
    if (c.failed) continue;
    os << c.variant << ',' << c.seed << ",train," << fmt(c.train_success) << ',' << c.train_faults
       << ",," << ',' << '\n';
    os << c.variant << ',' << c.seed << ",test," << fmt(c.test_success) << ',' << c.test_faults
       << ',' << fmt(c.test_recovery) << ',' << fmt(c.test_contact_force_mass) << ','
       << fmt(c.test_precontact_force_mass) << '\n';
  }
  return os.str();
}

}  // namespace

void run_train(const Config& cfg, const std::string& dataset_dir, const std::string& out_dir,
               const std::string& variant) {
  const auto dataset = load_dataset(dataset_dir);
  const auto spec = variant_spec(variant);
  train_cell(cfg, dataset, spec, cfg.integer("seed"), fs::path(out_dir));
}

void run_eval(const Config& cfg, const std::string& checkpoint, const std::string& split,
              const std::string& out_dir) {
  fs::create_directories(out_dir);
  const policy::Net net = policy::load_checkpoint(checkpoint);
  const long seed = cfg.integer("seed");
  const auto m = eval_cell(cfg, net, split, seed, fs::path(out_dir));
  std::ostringstream os;
  os << "split,success,faults,recovery,contact_force_mass,precontact_force_mass\n";
  os << split << ',' << fmt(m.success) << ',' << m.faults << ',' << fmt(m.recovery) << ','
     << fmt(m.contact_mass) << ',' << fmt(m.precontact_mass) << '\n';
  write_text_atomic((fs::path(out_dir) / "metrics.csv").string(), os.str());
}

ExperimentReport run_experiment(const Config& cfg, const std::string& dataset_dir,
                                const std::string& out_dir) {
  fs::create_directories(out_dir);
  const auto dataset = load_dataset(dataset_dir);
  const auto seeds = cfg.integers("experiment.seeds");
  const auto variants = split_commas(cfg.str("experiment.variants"));
  if (seeds.empty() || variants.empty()) raise(ErrorKind::config, "experiment needs seeds and variants");

  struct Cell {
    VariantSpec spec;
    long seed;
  };
  std::vector<Cell> cells;
  for (const auto& v : variants) {
    for (long s : seeds) cells.push_back(Cell{variant_spec(v), s});
  }

  ExperimentReport report;
  report.cells.resize(cells.size());

  std::mutex queue_mutex;
  std::size_t next = 0;
  const int workers = std::max(1, static_cast<int>(cfg.integer("experiment.workers")));

  auto work = [&]() {
    while (true) {
      std::size_t index;
      {
        std::lock_guard<std::mutex> lock(queue_mutex);
        if (next >= cells.size()) return;
        index = next++;
      }
      const auto& cell = cells[index];
      CellOutcome out;
      out.variant = cell.spec.name;
      out.seed = cell.seed;
      try {
        const auto paths = cell_paths(out_dir, cell.spec.name, cell.seed);
        const auto net = train_cell(cfg, dataset, cell.spec, cell.seed, paths.dir);
        // Evaluate what was persisted, not the in-memory weights.
        const auto loaded = policy::load_checkpoint(paths.checkpoint.string());
        const auto train_m = eval_cell(cfg, loaded, "train", cell.seed, paths.dir);
        const auto test_m = eval_cell(cfg, loaded, "test", cell.seed, paths.dir);
        out.train_success = train_m.success;
        out.train_faults = train_m.faults;
        out.test_success = test_m.success;
        out.test_faults = test_m.faults;
        out.test_recovery = test_m.recovery;
        out.test_contact_force_mass = test_m.contact_mass;
        out.test_precontact_force_mass = test_m.precontact_mass;
      } catch (const std::exception& e) {
        out.failed = true;
        out.error = e.what();
      }
      report.cells[index] = std::move(out);
    }
  };

  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();

  write_text_atomic((fs::path(out_dir) / "summary.csv").string(), summary_csv(report.cells));

  if (cfg.boolean("experiment.ablation")) run_ablation(cfg, dataset_dir, out_dir);

  std::string failures;
  for (const auto& c : report.cells) {
    if (c.failed) failures += c.variant + "_s" + std::to_string(c.seed) + ": " + c.error + "; ";
  }
  if (!failures.empty()) {
    raise(ErrorKind::fault, "experiment cells failed (partial results kept): " + failures);
  }
  return report;
}

void run_ablation(const Config& cfg, const std::string& dataset_dir, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const auto dataset = load_dataset(dataset_dir);
  const long seed = cfg.integer("seed");
  const auto model = chain_from(cfg);
  const auto params = follower_from(cfg);

  // Grid mirrors the scheduler x operator x space comparison plus the
  // fixed-scale row.
  const char* spaces[] = {"pixel", "latent"};
  const char* operators[] = {"gaussian_blur", "downsample"};
  const char* schedulers[] = {"constant", "linear", "cosine", "exponential", "step"};

  std::ostringstream os;
  os << "scheduler,space,operator,test_success\n";
  for (const char* sched : schedulers) {
    for (const char* space : spaces) {
      for (const char* op : operators) {
        Config cell_cfg = cfg;
        cell_cfg.set("curriculum.scheduler", sched);
        cell_cfg.set("curriculum.space", space);
        cell_cfg.set("curriculum.operator", op);
        cell_cfg.set("train.steps", std::to_string(cfg.integer("experiment.ablation_steps")));
        cell_cfg.set("curriculum.warmup_steps",
                     std::to_string(cfg.integer("experiment.ablation_steps") / 10));

        auto mc = model_from(cell_cfg);
        auto tc = train_from(cell_cfg);
        tc.seed = static_cast<std::uint64_t>(seed);
        policy::Net net(mc, static_cast<std::uint64_t>(seed));
        const auto curr = curriculum_from(cell_cfg, tc.total_steps);
        policy::train_policy(net, dataset, &curr, tc);

        const auto ec = eval_config(cell_cfg, "test", false, eval_seed_for(seed, "test", false));
        const auto res = policy::evaluate_policy(net, ec, model, params);
        os << sched << ',' << space << ',' << op << ',' << fmt(res.success_rate) << '\n';
      }
    }
  }
  write_text_atomic((fs::path(out_dir) / "ablation.csv").string(), os.str());
}

void run_teleop_suite(const Config& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  std::ostringstream os;
  os << "scenario,feedback,faults,contact_retention,completed,max_penetration\n";
  int faults_on = 0, faults_off = 0;
  double ret_on = 0.0, ret_off = 0.0;
  const auto scenarios = sim::teleop_scenarios();
  for (const auto& sc : scenarios) {
    for (bool feedback : {true, false}) {
      std::string telemetry;
      const auto m = sim::run_teleop_episode(sc, feedback, seed, &telemetry);
      char tname[64];
      std::snprintf(tname, sizeof(tname), "telemetry_%02d_%s.csv", sc.id, feedback ? "on" : "off");
      write_text_atomic((fs::path(out_dir) / tname).string(), telemetry);
      os << sc.id << ',' << (feedback ? 1 : 0) << ',' << m.fault_count << ','
         << fmt(m.contact_retention) << ',' << (m.completed ? 1 : 0) << ','
         << fmt(m.max_penetration) << '\n';
      if (feedback) {
        faults_on += m.fault_count;
        ret_on += m.contact_retention / scenarios.size();
      } else {
        faults_off += m.fault_count;
        ret_off += m.contact_retention / scenarios.size();
      }
    }
  }
  std::ostringstream agg;
  agg << "feedback,total_faults,mean_contact_retention\n";
  agg << "1," << faults_on << ',' << fmt(ret_on) << '\n';
  agg << "0," << faults_off << ',' << fmt(ret_off) << '\n';
  write_text_atomic((fs::path(out_dir) / "teleop.csv").string(), os.str());
  write_text_atomic((fs::path(out_dir) / "teleop_aggregate.csv").string(), agg.str());
}

void run_ntk_verify(const Config& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const auto rep = ntk::verify(cfg.real("ntk.sigma"), cfg.real("ntk.eta"));
  std::ostringstream dev;
  dev << "sigma,rank1_deviation\n";
  for (std::size_t i = 0; i < rep.sigma_grid.size(); ++i) {
    dev << fmt(rep.sigma_grid[i]) << ',' << fmt(rep.deviations[i]) << '\n';
  }
  std::ostringstream res;
  res << "t,residual_theory,residual_sim\n";
  for (std::size_t i = 0; i < rep.times.size(); ++i) {
    res << fmt(rep.times[i]) << ',' << fmt(rep.theory_norms[i]) << ',' << fmt(rep.sim_norms[i]) << '\n';
  }
  write_text_atomic((fs::path(out_dir) / "rank1_deviation.csv").string(), dev.str());
  write_text_atomic((fs::path(out_dir) / "residual_match.csv").string(), res.str());
}

void run_dump_schedule(const Config& cfg, const std::string& out_path) {
  const long n_total = cfg.integer("schedule.n");
  Config dump_cfg = cfg;
  dump_cfg.set("curriculum.warmup_steps", cfg.str("schedule.warmup"));
  const auto curr = curriculum_from(dump_cfg, n_total);
  std::ostringstream os;
  os << "n,sigma\n";
  for (long n = 0; n <= n_total; ++n) {
    os << n << ',' << fmt(curriculum::scheduler_sigma(n, curr)) << '\n';
  }
  write_text_atomic(out_path, os.str());
}

std::string inspect_path(const std::string& path) {
  if (fs::path(path).filename() == "manifest.json") {
    const auto mf = read_manifest(fs::path(path).parent_path().string());
    std::ostringstream os;
    os << "manifest: " << path << "\n";
    os << "task: " << mf.task << "\n";
    os << "episodes: " << mf.episode_count << " (from " << mf.attempts << " attempts)\n";
    os << "image: " << mf.image_h << "x" << mf.image_w << "x" << mf.channels << "\n";
    os << "n_joints: " << mf.n_joints << " action_dim: " << mf.action_dim << "\n";
    os << "generator_seed: " << mf.generator_seed << "\n";
    os << "config_hash: " << mf.config_hash << "\n";
    return os.str();
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorKind::io, "cannot open: " + path);
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  is.close();
  if (std::memcmp(magic, "FCTR", 4) == 0) return inspect_episode(path);
  if (std::memcmp(magic, "FCKP", 4) == 0) return policy::inspect_checkpoint(path);
  raise(ErrorKind::io, "unrecognized file type: " + path);
}

}  // namespace factr::harness
