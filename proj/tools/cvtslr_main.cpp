// Command-line driver: gen-data, pretrain-vae, train-slr, evaluate, ablate,
// dump-alignment. Every config key is also a --dashed-flag that overrides
// the --config file.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "cvtslr/checkpoint.hpp"
#include "cvtslr/config.hpp"
#include "cvtslr/corpus.hpp"
#include "cvtslr/error.hpp"
#include "cvtslr/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cvtslr;

namespace {

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

struct FlagValues {
  std::string config_file;
  std::map<std::string, std::string> text;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> options;
};

void register_flags(CLI::App& app, FlagValues& values) {
  app.add_option("--config", values.config_file, "flat key = value config file, applied before flags");
  for (const ConfigKey& key : config_keys()) {
    const std::string name = "--" + dashed(key.name);
    if (key.is_bool) {
      values.options[key.name] = app.add_flag(name + ",!--no-" + dashed(key.name), values.flags[key.name], key.help);
    } else {
      values.options[key.name] = app.add_option(name, values.text[key.name], key.help);
    }
  }
}

TrainConfig resolve_config(const FlagValues& values) {
  TrainConfig cfg;
  if (!values.config_file.empty()) apply_config_file(cfg, values.config_file);
  for (const ConfigKey& key : config_keys()) {
    if (values.options.at(key.name)->count() == 0) continue;
    const std::string v = key.is_bool ? (values.flags.at(key.name) ? "true" : "false") : values.text.at(key.name);
    set_config_value(cfg, key.name, v);
  }
  cfg.validate();
  return cfg;
}

fs::path or_default(const std::string& given, const fs::path& fallback) { return given.empty() ? fallback : fs::path(given); }

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

void print_report(const std::string& label, const WerReport& r) {
  std::printf("%s WER %.4f (del %zu, ins %zu, sub %zu, ref %zu)\n", label.c_str(), r.wer, r.totals.del, r.totals.ins,
              r.totals.sub, r.totals.ref_len);
}

void run_gen_data(const TrainConfig& cfg) {
  const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
  save_corpus(cfg.corpus, corpus);
  std::printf("wrote %zu samples (%zu glosses) to %s\n", corpus.samples.size(), corpus.vocab.size(),
              cfg.corpus.c_str());
}

void run_pretrain(const TrainConfig& cfg) {
  const Corpus corpus = load_corpus(cfg.corpus, false);
  const PretrainResult result = pretrain_vae(cfg, corpus);
  const fs::path out = cfg.out;
  const fs::path ckpt = or_default(cfg.vae_checkpoint, out / "vae.ckpt");
  write_checkpoint(ckpt, result.checkpoint);
  write_pretrain_curve(out / "pretrain_loss.csv", result.history);
  write_text(out / "pretrain_config.txt", config_to_text(cfg));
  const PretrainEpoch& last = result.history.empty() ? PretrainEpoch{} : result.history.back();
  std::printf("epochs %zu: kl %.6f ce %.6f total %.6f; dev loss %.6f\n", last.epoch, last.kl, last.ce, last.total,
              result.dev_loss);
  std::printf("checkpoint %s\n", ckpt.string().c_str());
}

void run_train(const TrainConfig& cfg) {
  const Corpus corpus = load_corpus(cfg.corpus, true);
  const fs::path out = cfg.out;
  Checkpoint vae;
  const Checkpoint* vae_ptr = nullptr;
  if (cfg.use_pretrained_vae) {
    vae = read_checkpoint(or_default(cfg.vae_checkpoint, out / "vae.ckpt"));
    vae_ptr = &vae;
  }
  const SlrResult result = train_slr(cfg, corpus, vae_ptr);
  const fs::path ckpt = or_default(cfg.checkpoint, out / "slr.ckpt");
  write_checkpoint(ckpt, result.checkpoint);
  write_slr_curve(out / "slr_loss.csv", result.history);
  write_text(out / "slr_config.txt", config_to_text(cfg));
  std::printf("best dev WER %.4f at epoch %zu of %zu\n", result.best_dev_wer, result.best_epoch,
              result.history.size());
  std::printf("checkpoint %s\n", ckpt.string().c_str());
}

void run_evaluate(const TrainConfig& cfg) {
  const Corpus corpus = load_corpus(cfg.corpus, true);
  const Split split = parse_split(cfg.split);
  const Checkpoint ckpt = read_checkpoint(or_default(cfg.checkpoint, fs::path(cfg.out) / "slr.ckpt"));
  const EvalResult result = evaluate(ckpt, corpus, split, cfg.beam_width);
  const fs::path report = fs::path(cfg.out) / ("eval_" + std::string(split_name(split)) + ".csv");
  write_eval_report(report, result, corpus.vocab);
  print_report(std::string(split_name(split)), result.report);
  std::printf("del rate %.4f ins rate %.4f\nreport %s\n", result.report.del_rate(), result.report.ins_rate(),
              report.string().c_str());
}

void run_ablate(const TrainConfig& cfg) {
  const Corpus corpus = load_corpus(cfg.corpus, true);
  const AblationReport report = run_ablation(cfg, corpus);
  const fs::path out = cfg.out;
  write_ablation_report(out / "ablation.csv", report);
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    const AblationRow& row = report.rows[r];
    const std::string tag = "ours" + std::to_string(r + 1);
    write_text(out / "configs" / (tag + ".txt"), row.config_text);
    for (std::size_t k = 0; k < row.curves.size(); ++k) {
      write_slr_curve(out / "curves" / (tag + "_seed" + std::to_string(cfg.seed + k) + ".csv"), row.curves[k]);
    }
  }
  std::printf("%-24s %8s %8s %6s %6s\n", "run", "dev WER", "test WER", "del", "ins");
  for (const AblationRow& row : report.rows) {
    std::printf("%-24s %8.4f %8.4f %6zu %6zu\n", row.name.c_str(), row.dev_wer, row.test_wer, row.dev_totals.del,
                row.dev_totals.ins);
  }
  std::printf("advisory: Ours4 dev WER <= Ours1 dev WER: %s\n", report.trend_holds ? "yes" : "no");
}

void run_dump(const TrainConfig& cfg) {
  const Corpus corpus = load_corpus(cfg.corpus, true);
  const Checkpoint ckpt = read_checkpoint(or_default(cfg.checkpoint, fs::path(cfg.out) / "slr.ckpt"));
  std::string id = cfg.sample_id;
  if (id.empty()) {
    const auto dev = corpus.split(Split::kDev);
    if (dev.empty()) fail(ErrorCode::kSampleMissing, "no sample_id given and the dev split is empty");
    id = dev.front()->id;
  }
  const CvtSlrModel model = CvtSlrModel::from_checkpoint(ckpt);
  const fs::path dir = fs::path(cfg.out) / "alignment";
  const AlignmentDump dump = dump_alignment(model, corpus, id, dir, cfg.beam_width);
  std::printf("sample %s: %zu x %zu matrix\nreference:  %s\nhypothesis: %s\nwritten to %s\n", id.c_str(),
              dump.matrix.rows, dump.matrix.cols, join_glosses(dump.reference, corpus.vocab).c_str(),
              join_glosses(dump.hypothesis, corpus.vocab).c_str(), dir.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive visual-textual sign language recognition toolkit"};
  app.require_subcommand(1);
  FlagValues values;
  register_flags(app, values);

  struct Command {
    const char* name;
    const char* help;
    void (*run)(const TrainConfig&);
  };
  const Command commands[] = {
      {"gen-data", "generate the synthetic corpus", run_gen_data},
      {"pretrain-vae", "step 1: gloss-to-gloss VAE pretraining", run_pretrain},
      {"train-slr", "step 2: recognition training", run_train},
      {"evaluate", "beam-decode a split and report WER", run_evaluate},
      {"ablate", "run the VAE x contrastive ablation grid", run_ablate},
      {"dump-alignment", "write the visual/textual alignment matrix of one sample", run_dump},
  };
  for (const Command& c : commands) app.add_subcommand(c.name, c.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const TrainConfig cfg = resolve_config(values);
    for (const Command& c : commands) {
      if (app.got_subcommand(c.name)) c.run(cfg);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
