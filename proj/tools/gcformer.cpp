// gcformer: synthetic data generation, preprocessing, mode clustering,
// training, evaluation and attention export from one JSON config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gcf/data/archive.hpp"
#include "gcf/data/synthetic.hpp"
#include "gcf/errors.hpp"
#include "gcf/eval/field.hpp"
#include "gcf/eval/metrics.hpp"
#include "gcf/eval/trace.hpp"
#include "gcf/model/model.hpp"
#include "gcf/numerics/kernels.hpp"

namespace fs = std::filesystem;
using namespace gcf;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// Thrown for bad command-line values that CLI11 cannot catch itself.
struct UsageError : Error {
  using Error::Error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 1;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help) {
  cmd->add_option("--config", c.config, "JSON run config (defaults when omitted)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "run seed; also seeds the generator");
  cmd->add_option("--out", c.out, out_help)->required();
  cmd->add_option("--threads", c.threads, "OpenMP threads for scene-level loops")->check(CLI::PositiveNumber);
  cmd->add_option("--set", c.sets, "config override key.path=value (repeatable)");
}

model::RunConfig resolve_config(const Common& c) {
  json j = json::object();
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw ConfigError("cannot open config '" + c.config + "'");
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config '" + c.config + "': " + e.what());
    }
  }
  for (const auto& s : c.sets) model::apply_override(j, s);
  if (c.seed) {
    j["seed"] = *c.seed;
    if (!j.contains("generator")) j["generator"] = json::object();
    j["generator"]["seed"] = *c.seed;
  }
  model::RunConfig cfg = model::config_from_json(j);
  model::validate(cfg);
  num::kernels::set_threads(c.threads);
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::vector<data::RawRecord> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open records '" + path + "'");
  return data::parse_records(in);
}

int cmd_gen(const Common& c) {
  const auto cfg = resolve_config(c);
  const auto d = data::generate_synthetic(cfg.generator, cfg.generator.seed);
  std::ofstream out(c.out, std::ios::binary);
  if (!out) throw IoError("cannot open '" + c.out + "' for writing");
  data::write_records(out, d.records);
  if (!out) throw IoError("write failed for '" + c.out + "'");
  std::printf("gen: %zu scenes, %zu records -> %s\n", d.scenes.size(), d.records.size(), c.out.c_str());
  return 0;
}

int cmd_preprocess(const Common& c, const std::string& records) {
  const auto cfg = resolve_config(c);
  const auto recs = read_records(records);
  if (recs.empty()) throw DataError("no records in '" + records + "'");
  auto scenes = data::scenes_from_records(recs, cfg.horizons, cfg.delta);
  if (scenes.empty()) throw DataError("no complete prediction window in '" + records + "'");
  const auto split = data::temporal_split(std::move(scenes), cfg.split_ratio);
  ensure_dir(c.out);
  data::write_archive_file((fs::path(c.out) / "train.jsonl").string(), split.train, cfg.horizons);
  data::write_archive_file((fs::path(c.out) / "test.jsonl").string(), split.test, cfg.horizons);
  std::printf("preprocess: %zu train, %zu test scenes -> %s\n", split.train.size(), split.test.size(), c.out.c_str());
  return 0;
}

int cmd_cluster(const Common& c, const std::string& train_path) {
  const auto cfg = resolve_config(c);
  const auto train = data::read_archive_file(train_path, cfg.horizons);
  if (train.size() < cfg.model.k) {
    throw ConfigError("only " + std::to_string(train.size()) + " training scenes for K = " +
                      std::to_string(cfg.model.k) + "; lower model.k (e.g. --set model.k=" +
                      std::to_string(std::max<std::size_t>(1, train.size() / 4)) + ")");
  }
  const auto bank = modes::modes_from_training(train, cfg.model.k, cfg.seed, cfg.clustering);
  modes::save_bank(bank, c.out);
  std::printf("cluster: K = %zu, objective %.6g -> %s\n", bank.k, bank.objective, c.out.c_str());
  return 0;
}

int cmd_train(const Common& c, const std::string& train_path, const std::string& bank_path, std::string log_path) {
  const auto cfg = resolve_config(c);
  auto train = data::read_archive_file(train_path, cfg.horizons);
  const auto bank = modes::load_bank(bank_path);
  if (log_path.empty()) log_path = c.out + ".log.jsonl";
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw IoError("cannot open '" + log_path + "' for writing");
  model::TrainResult r;
  try {
    r = model::train(cfg, train, bank, [&](const model::EpochLog& e) {
      log << json{{"epoch", e.epoch}, {"steps", e.steps}, {"total", e.mean.total}, {"reg", e.mean.reg}, {"cls", e.mean.cls}}
                 .dump()
          << '\n'
          << std::flush;
    });
  } catch (const NumericError& e) {
    log << json{{"error", e.what()}}.dump() << '\n';
    throw;
  }
  model::save_checkpoint({cfg, r.params, r.steps}, c.out);
  std::printf("train: %d steps, final loss %.6g -> %s\n", r.steps, r.log.empty() ? 0.0 : r.log.back().mean.total,
              c.out.c_str());
  return 0;
}

model::Checkpoint checkpoint_for(const model::RunConfig& cfg, const std::string& path,
                                 const modes::MotionModeBank& bank) {
  auto ck = model::load_checkpoint(path);
  model::check_params(ck.params, cfg.model, cfg.horizons);
  if (bank.k != cfg.model.k) {
    throw ConfigError("mode bank has K = " + std::to_string(bank.k) + ", config has K = " +
                      std::to_string(cfg.model.k));
  }
  if (bank.t_pre != cfg.horizons.t_pre) throw ConfigError("mode bank horizon differs from the config");
  return ck;
}

int cmd_eval(const Common& c, const std::string& ck_path, const std::string& test_path, const std::string& bank_path) {
  const auto cfg = resolve_config(c);
  const auto bank = modes::load_bank(bank_path);
  const auto ck = checkpoint_for(cfg, ck_path, bank);
  const auto test = data::read_archive_file(test_path, cfg.horizons);
  const auto report = eval::evaluate(ck.params, cfg.model, test, bank, cfg.model.k_top, cfg.eval);

  std::vector<double> ades, fdes;
  std::vector<data::Point> obs_ends, gt_ends;
  for (const auto& s : report.per_sample) {
    ades.push_back(s.min_ade);
    fdes.push_back(s.min_fde);
    obs_ends.push_back(s.obs_end);
    gt_ends.push_back(s.gt_end);
  }
  const auto& e = cfg.eval;
  const auto ade_field =
      eval::spatial_error_field(ades, obs_ends, eval::grid_around(obs_ends, e.field_cell, e.field_margin), e.field_sigma);
  const auto fde_field =
      eval::spatial_error_field(fdes, gt_ends, eval::grid_around(gt_ends, e.field_cell, e.field_margin), e.field_sigma);

  ensure_dir(c.out);
  write_text((fs::path(c.out) / "metrics.json").string(), eval::report_to_json(report).dump(2) + "\n");
  write_text((fs::path(c.out) / "field_min_ade.json").string(), eval::field_to_json(ade_field).dump() + "\n");
  write_text((fs::path(c.out) / "field_min_fde.json").string(), eval::field_to_json(fde_field).dump() + "\n");
  std::printf("eval: %zu scenes  minADE %.4f  minFDE %.4f", report.n_samples, report.min_ade, report.min_fde);
  for (const auto& [t, v] : report.mr) std::printf("  MR-%g %.4f", t, v);
  std::printf("  CVaR %.4f -> %s\n", report.cvar, c.out.c_str());
  return 0;
}

int cmd_explain(const Common& c, const std::string& ck_path, const std::string& scenes_path,
                const std::string& bank_path, std::size_t index) {
  const auto cfg = resolve_config(c);
  const auto bank = modes::load_bank(bank_path);
  const auto ck = checkpoint_for(cfg, ck_path, bank);
  const auto scenes = data::read_archive_file(scenes_path, cfg.horizons);
  if (index >= scenes.size()) {
    throw UsageError("scene index " + std::to_string(index) + " out of range (archive holds " +
                     std::to_string(scenes.size()) + " scenes)");
  }
  eval::export_attention_trace(ck.params, cfg.model, scenes[index], bank, cfg.model.k_top, c.out);
  std::printf("explain: scene %zu -> %s\n", index, c.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gcformer: mode-anchored trajectory prediction pipeline"};
  app.require_subcommand(1);

  Common gen_c, pre_c, clu_c, tr_c, ev_c, ex_c;
  std::string records, train_path, bank_path, log_path, ck_path, test_path, scenes_path;
  std::size_t index = 0;

  auto* gen = app.add_subcommand("gen", "generate synthetic records");
  add_common(gen, gen_c, "record file (CSV)");

  auto* pre = app.add_subcommand("preprocess", "windows, normalization, masking and temporal split");
  add_common(pre, pre_c, "output directory for train.jsonl and test.jsonl");
  pre->add_option("--records", records, "record file")->required()->check(CLI::ExistingFile);

  auto* clu = app.add_subcommand("cluster", "k-means motion modes from the training archive");
  add_common(clu, clu_c, "mode-bank file");
  clu->add_option("--train", train_path, "training archive")->required()->check(CLI::ExistingFile);

  auto* tr = app.add_subcommand("train", "train the model");
  add_common(tr, tr_c, "checkpoint file");
  tr->add_option("--train", train_path, "training archive")->required()->check(CLI::ExistingFile);
  tr->add_option("--bank", bank_path, "mode-bank file")->required()->check(CLI::ExistingFile);
  tr->add_option("--log", log_path, "loss log (default <out>.log.jsonl)");

  auto* ev = app.add_subcommand("eval", "metrics and spatial error fields on a test archive");
  add_common(ev, ev_c, "output directory");
  ev->add_option("--checkpoint", ck_path, "checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--test", test_path, "test archive")->required()->check(CLI::ExistingFile);
  ev->add_option("--bank", bank_path, "mode-bank file")->required()->check(CLI::ExistingFile);

  auto* ex = app.add_subcommand("explain", "attention trace of one scene");
  add_common(ex, ex_c, "trace file (JSON)");
  ex->add_option("--checkpoint", ck_path, "checkpoint file")->required()->check(CLI::ExistingFile);
  ex->add_option("--scenes", scenes_path, "scene archive")->required()->check(CLI::ExistingFile);
  ex->add_option("--bank", bank_path, "mode-bank file")->required()->check(CLI::ExistingFile);
  ex->add_option("--index", index, "scene index in the archive")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(gen_c);
    if (*pre) return cmd_preprocess(pre_c, records);
    if (*clu) return cmd_cluster(clu_c, train_path);
    if (*tr) return cmd_train(tr_c, train_path, bank_path, log_path);
    if (*ev) return cmd_eval(ev_c, ck_path, test_path, bank_path);
    if (*ex) return cmd_explain(ex_c, ck_path, scenes_path, bank_path, index);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
