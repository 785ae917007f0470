// Command-line entry point: synth-data | train | eval | ablate | frontalize |
// grad-check. Configuration precedence: defaults < --config file < CPGAN_*
// environment variables < flags. Logs go to stderr; machine-readable output
// goes to files. Exit codes: 0 success, 2 configuration error, 1 runtime
// failure.

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cpgan/baselines.hpp"
#include "cpgan/config.hpp"
#include "cpgan/evaluation.hpp"
#include "cpgan/frontalizer.hpp"
#include "cpgan/grad_check.hpp"
#include "cpgan/png_io.hpp"
#include "cpgan/report_io.hpp"
#include "cpgan/synthetic.hpp"
#include "cpgan/trainer.hpp"
#include "cpgan/version.hpp"

namespace fs = std::filesystem;
using namespace cpgan;

namespace {

void write_effective_config(const std::string& dir, const RunConfig& cfg) {
  fs::create_directories(dir);
  nlohmann::json j = {{"version", version_string()}, {"config", cfg.echo()}};
  std::ofstream f(fs::path(dir) / "effective_config.json");
  if (!f) throw std::runtime_error("cannot write effective_config.json under " + dir);
  f << j.dump(2) << "\n";
}

LoadedDataset load_data(const std::string& manifest_path) {
  if (manifest_path.empty()) throw std::invalid_argument("--manifest is required");
  DatasetManifest m = load_manifest(manifest_path);
  return LoadedDataset::load(m);
}

// Network geometry must match the data; the manifest is authoritative.
void adopt_geometry(RunConfig& cfg, const DatasetManifest& m) {
  if (m.height != m.width)
    throw std::invalid_argument("training expects square images; manifest says " +
                                std::to_string(m.height) + "x" + std::to_string(m.width));
  cfg.train.net.image_size = m.height;
  cfg.train.net.channels = m.channels;
}

std::vector<int> all_folds(const DatasetManifest& m) {
  std::vector<int> folds(m.num_folds);
  for (int f = 0; f < m.num_folds; ++f) folds[f] = f;
  return folds;
}

int cmd_synth(RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw std::invalid_argument("--out is required");
  cfg.synth.validate();
  write_effective_config(cfg.out_dir, cfg);
  DatasetManifest m = generate_synthetic(cfg.synth, cfg.out_dir);
  std::cerr << "[synth-data] wrote " << m.entries.size() << " images for " << m.num_identities
            << " identities (" << m.num_folds << " folds) under " << cfg.out_dir << "\n";
  return 0;
}

int cmd_train(RunConfig& cfg, bool stage_given, bool ablation_given) {
  if (cfg.out_dir.empty()) throw std::invalid_argument("--out is required");
  if (cfg.model != "cpgan" && cfg.model != "cpcnn" && cfg.model != "adda")
    throw std::invalid_argument("--model must be one of: cpgan, cpcnn, adda (got \"" + cfg.model + "\")");
  if (stage_given && cfg.model != "adda")
    throw std::invalid_argument("--stage only applies with --model adda");
  if (ablation_given && cfg.model != "cpgan")
    throw std::invalid_argument("--ablation only applies with --model cpgan");

  LoadedDataset data = load_data(cfg.manifest_path);
  adopt_geometry(cfg, data.manifest);
  cfg.sync_shared();
  write_effective_config(cfg.out_dir, cfg);

  if (cfg.model == "adda") {
    AddaStage stage = parse_adda_stage(cfg.stage);
    cfg.adda.checkpoint_dir = cfg.out_dir;
    cfg.adda.log_path = (fs::path(cfg.out_dir) / "train_log.csv").string();
    cfg.adda.validate();
    AddaResult r = train_adda(data, cfg.adda, stage, cfg.checkpoint_path);
    if (stage != AddaStage::kStage2)
      std::cerr << "[train] pretrain accuracy " << r.stage1_accuracy << " over training frontals\n";
    if (stage != AddaStage::kStage1)
      std::cerr << "[train] adaptation done; discriminator means real " << r.mean_disc_real << " / fake "
                << r.mean_disc_fake << "\n";
    std::cerr << "[train] checkpoint: " << r.last_checkpoint << "\n";
    return 0;
  }

  cfg.train.checkpoint_dir = cfg.out_dir;
  cfg.train.log_path = (fs::path(cfg.out_dir) / "train_log.csv").string();
  if (!cfg.ablation_variant.empty()) {
    bool found = false;
    for (const AblationVariant& v : ablation_variants(cfg.train.weights))
      if (v.name == cfg.ablation_variant) {
        cfg.train.weights = v.weights;
        found = true;
      }
    if (!found)
      throw std::invalid_argument("--ablation must be one of: cpl+l2, cpl+l2+gan, full (got \"" +
                                  cfg.ablation_variant + "\")");
  }
  cfg.train.validate();

  if (cfg.model == "cpcnn") {
    TrainResult r = train_cpcnn(data, cfg.train);
    std::cerr << "[train] coupled-encoder baseline: " << r.steps_run << " steps, final coupling "
              << r.final_losses.coupling << ", checkpoint " << r.last_checkpoint << "\n";
    return 0;
  }

  auto progress = [](int epoch, const LossBreakdown& b, CpganTrainer&) {
    std::cerr << "[train] epoch " << epoch << " total " << b.total << " (coupling " << b.coupling
              << ", gan " << b.gan << ", perceptual " << b.perceptual << ", l2 " << b.l2 << ", disc "
              << b.disc << ")\n";
  };
  TrainResult r;
  if (!cfg.checkpoint_path.empty()) {
    LoadedCheckpoint ck = load_checkpoint(cfg.checkpoint_path);
    CpganTrainer trainer(data, ck);
    trainer.redirect_outputs(cfg.train.checkpoint_dir, cfg.train.log_path);
    r = trainer.train(cfg.train.epochs, progress);
  } else {
    CpganTrainer trainer(data, cfg.train);
    r = trainer.train(cfg.train.epochs, progress);
  }
  std::cerr << "[train] " << r.steps_run << " steps in " << r.seconds << " s; checkpoint "
            << r.last_checkpoint << "\n";
  return 0;
}

int cmd_eval(RunConfig& cfg) {
  if (cfg.checkpoint_path.empty()) throw std::invalid_argument("--checkpoint is required");
  if (cfg.report_out.empty()) throw std::invalid_argument("--report-out is required");
  LoadedDataset data = load_data(cfg.manifest_path);
  LoadedCheckpoint ck = load_checkpoint(cfg.checkpoint_path);
  LoadedModel model = load_model_for_eval(ck);
  std::vector<int> folds = cfg.eval_folds.empty() ? all_folds(data.manifest) : cfg.eval_folds;

  MetricsReport report = evaluate_encoders(model.profile_encoder(), model.frontal_encoder(), data, folds,
                                           cfg.eval_batch);
  fs::create_directories(cfg.report_out);
  write_effective_config(cfg.report_out, cfg);
  write_metrics_json((fs::path(cfg.report_out) / "report.json").string(), report, cfg.echo());
  write_roc_csv((fs::path(cfg.report_out) / "roc.csv").string(), report);
  write_cmc_csv((fs::path(cfg.report_out) / "cmc.csv").string(), report);
  write_roc_svg((fs::path(cfg.report_out) / "roc.svg").string(), {{model.kind, &report}},
                "verification on held-out folds");
  std::cerr << "[eval] " << model.kind << ": auc " << report.auc << ", eer " << report.eer << ", rank-1 "
            << (report.cmc.empty() ? 0.0 : report.cmc.front()) << " -> " << cfg.report_out << "\n";
  return 0;
}

int cmd_ablate(RunConfig& cfg, std::vector<std::uint64_t> seeds, std::vector<int> test_folds) {
  if (cfg.out_dir.empty()) throw std::invalid_argument("--out is required");
  LoadedDataset data = load_data(cfg.manifest_path);
  adopt_geometry(cfg, data.manifest);
  if (cfg.train.train_folds.empty() || test_folds.empty())
    throw std::invalid_argument("--folds (training) and --test-folds are both required for ablation");
  if (seeds.empty())
    seeds = {cfg.train.seed, cfg.train.seed + 1, cfg.train.seed + 2};
  cfg.sync_shared();
  cfg.train.validate();
  write_effective_config(cfg.out_dir, cfg);

  AblationReport report = run_ablation(data, cfg.train, test_folds, seeds, cfg.out_dir, &std::cerr);

  NamedCurves curves;
  for (const AblationVariant& v : ablation_variants(cfg.train.weights)) {
    const AblationRun* run = report.median_run(v.name);
    if (run) curves.emplace_back(v.name, &run->report);
  }
  write_roc_svg((fs::path(cfg.out_dir) / "roc_variants.svg").string(), curves, "ablation ROC (median seed)");
  write_comparison_csv((fs::path(cfg.out_dir) / "variant_comparison.csv").string(), curves);
  for (const AblationVariant& v : ablation_variants(cfg.train.weights))
    std::cerr << "[ablate] median auc " << v.name << ": " << report.median_auc(v.name) << "\n";
  return 0;
}

int cmd_frontalize(RunConfig& cfg, int pairs, int columns) {
  if (cfg.checkpoint_path.empty()) throw std::invalid_argument("--checkpoint is required");
  if (cfg.input_path.empty()) throw std::invalid_argument("--input is required");
  if (cfg.grid_out.empty()) throw std::invalid_argument("--grid-out is required");
  if (cfg.direction != "p2f" && cfg.direction != "f2p")
    throw std::invalid_argument("--direction must be p2f or f2p (got \"" + cfg.direction + "\")");

  LoadedCheckpoint ck = load_checkpoint(cfg.checkpoint_path);
  if (ck.meta.kind != "cpgan")
    throw std::invalid_argument("frontalize needs a generator checkpoint; kind \"" + ck.meta.kind +
                                "\" has no decoders");
  LoadedModel model = load_model_for_eval(ck);
  const bool to_frontal = cfg.direction == "p2f";

  std::vector<Tensor<float>> inputs;
  if (cfg.input_path.size() > 4 && cfg.input_path.substr(cfg.input_path.size() - 4) == ".png") {
    inputs.push_back(read_png(cfg.input_path));
  } else {
    DatasetManifest m = load_manifest(cfg.input_path);
    LoadedDataset data = LoadedDataset::load(m);
    std::vector<int> folds = cfg.eval_folds.empty() ? all_folds(m) : cfg.eval_folds;
    const Domain source = to_frontal ? Domain::kProfile : Domain::kFrontal;
    for (int idx : data.entries_in_folds(folds, source)) {
      if (static_cast<int>(inputs.size()) >= pairs) break;
      inputs.push_back(data.images[idx]);
    }
  }
  if (inputs.empty()) throw std::invalid_argument("frontalize: no input images selected");

  std::vector<Tensor<float>> sheet;
  for (const Tensor<float>& img : inputs) {
    Tensor<float> batch({1, img.dim(0), img.dim(1), img.dim(2)});
    std::copy(img.data(), img.data() + img.numel(), batch.data());
    Tensor<float> out = to_frontal ? frontalize(*model.cpgan, batch, cfg.train.zero_skips)
                                   : profilize(*model.cpgan, batch, cfg.train.zero_skips);
    Tensor<float> out_chw(std::vector<int>{out.dim(1), out.dim(2), out.dim(3)});
    std::copy(out.data(), out.data() + out.numel(), out_chw.data());
    sheet.push_back(img);
    sheet.push_back(std::move(out_chw));
  }
  PngText text = {{"cpgan_version", version_string()}, {"cpgan_config", cfg.echo().dump()}};
  emit_grid(sheet, columns, cfg.grid_out, text);
  std::cerr << "[frontalize] wrote " << inputs.size() << " " << cfg.direction << " pairs to "
            << cfg.grid_out << "\n";
  return 0;
}

int cmd_grad_check(std::uint64_t seed) {
  GradCheckSettings settings;
  auto results = run_gradient_suite(seed, settings, &std::cerr);
  bool ok = true;
  for (const auto& r : results) ok = ok && r.passed(settings);
  std::cerr << "[grad-check] " << (ok ? "all checks passed" : "FAILURES present") << "\n";
  if (!ok) throw std::runtime_error("gradient checks failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;

  // The config file must apply before flags so flags win; find it up front.
  try {
    for (int i = 1; i + 1 < argc; ++i)
      if (std::strcmp(argv[i], "--config") == 0) apply_config_file(cfg, argv[i + 1]);
    apply_env_overrides(cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{std::string("coupled-GAN cross-domain face matching toolkit (") + version_string() + ")"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "sectioned key=value config file (applied before flags)");

  auto* synth = app.add_subcommand("synth-data", "generate the paired synthetic dataset");
  synth->add_option("--identities", cfg.synth.num_identities, "number of identities");
  synth->add_option("--views", cfg.synth.views_per_domain, "views per identity per domain");
  synth->add_option("--size", cfg.synth.image_size, "square image size");
  synth->add_option("--warp", cfg.synth.warp_magnitude, "profile yaw magnitude in [0,1]");
  synth->add_option("--illumination", cfg.synth.illumination_jitter, "per-view illumination spread");
  synth->add_option("--folds", cfg.synth.num_folds, "number of identity-disjoint folds");
  synth->add_option("--seed", cfg.synth.seed, "dataset seed");
  synth->add_option("--out", cfg.out_dir, "output directory");

  auto* train = app.add_subcommand("train", "train a model on a manifest");
  train->add_option("--manifest", cfg.manifest_path, "dataset manifest");
  train->add_option("--model", cfg.model, "cpgan | cpcnn | adda");
  auto* stage_opt = train->add_option("--stage", cfg.stage, "adda stage: 1 | 2 | both");
  train->add_option("--epochs", cfg.train.epochs, "training epochs");
  train->add_option("--batch", cfg.train.batch_size, "pair batch size (even)");
  train->add_option("--lr", cfg.train.learning_rate, "Adam learning rate");
  train->add_option("--beta1", cfg.train.adam_beta1, "Adam beta1");
  train->add_option("--beta2", cfg.train.adam_beta2, "Adam beta2");
  train->add_option("--lambda1", cfg.train.weights.lambda_gan, "adversarial term weight");
  train->add_option("--lambda2", cfg.train.weights.lambda_perceptual, "perceptual term weight");
  train->add_option("--lambda3", cfg.train.weights.lambda_l2, "reconstruction term weight");
  train->add_option("--margin", cfg.train.weights.margin, "contrastive margin");
  train->add_option("--seed", cfg.train.seed, "training seed");
  train->add_option("--folds", cfg.train.train_folds, "training folds")->delimiter(',');
  train->add_option("--steps-per-epoch", cfg.train.steps_per_epoch, "override steps per epoch");
  train->add_option("--d-steps", cfg.train.d_steps_per_g_step, "discriminator steps per generator step");
  train->add_flag("--zero-skips", cfg.train.zero_skips, "decode from the bottleneck only");
  train->add_option("--checkpoint-every", cfg.train.checkpoint_every, "epochs between checkpoints");
  train->add_flag("--keep-epoch-checkpoints", cfg.train.keep_epoch_checkpoints,
                  "retain per-epoch checkpoint files");
  auto* ablation_opt =
      train->add_option("--ablation", cfg.ablation_variant, "loss variant: cpl+l2 | cpl+l2+gan | full");
  train->add_option("--checkpoint", cfg.checkpoint_path,
                    "resume checkpoint (cpgan) or pretrain checkpoint (adda stage 2)");
  train->add_option("--stage1-epochs", cfg.adda.stage1_epochs, "adda pretrain epochs");
  train->add_option("--stage2-epochs", cfg.adda.stage2_epochs, "adda adaptation epochs");
  train->add_option("--stage1-lr", cfg.adda.stage1_lr, "adda pretrain learning rate");
  train->add_option("--stage2-lr", cfg.adda.stage2_lr, "adda adaptation learning rate");
  train->add_option("--contrastive-weight", cfg.adda.contrastive_weight,
                    "adda contrastive pull strength");
  train->add_option("--out", cfg.out_dir, "output directory (checkpoints, logs)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on held-out folds");
  eval->add_option("--checkpoint", cfg.checkpoint_path, "model checkpoint");
  eval->add_option("--manifest", cfg.manifest_path, "dataset manifest");
  eval->add_option("--folds", cfg.eval_folds, "evaluation folds (default: all)")->delimiter(',');
  eval->add_option("--batch", cfg.eval_batch, "embedding batch size");
  eval->add_option("--report-out", cfg.report_out, "report output directory");

  auto* ablate = app.add_subcommand("ablate", "train and compare the loss-variant ladder");
  std::vector<std::uint64_t> seeds;
  std::vector<int> test_folds;
  ablate->add_option("--manifest", cfg.manifest_path, "dataset manifest");
  ablate->add_option("--folds", cfg.train.train_folds, "training folds")->delimiter(',');
  ablate->add_option("--test-folds", test_folds, "held-out folds")->delimiter(',');
  ablate->add_option("--seeds", seeds, "seeds (default: seed, seed+1, seed+2)")->delimiter(',');
  ablate->add_option("--epochs", cfg.train.epochs, "training epochs per run");
  ablate->add_option("--batch", cfg.train.batch_size, "pair batch size");
  ablate->add_option("--lr", cfg.train.learning_rate, "Adam learning rate");
  ablate->add_option("--seed", cfg.train.seed, "base seed");
  ablate->add_option("--steps-per-epoch", cfg.train.steps_per_epoch, "override steps per epoch");
  ablate->add_option("--out", cfg.out_dir, "output directory");

  auto* frontalize_cmd = app.add_subcommand("frontalize", "cross-decode images through a checkpoint");
  int pairs = 8, columns = 4;
  frontalize_cmd->add_option("--checkpoint", cfg.checkpoint_path, "generator checkpoint");
  frontalize_cmd->add_option("--input", cfg.input_path, "a PNG file or a dataset manifest");
  frontalize_cmd->add_option("--folds", cfg.eval_folds, "folds when --input is a manifest")->delimiter(',');
  frontalize_cmd->add_option("--direction", cfg.direction, "p2f | f2p");
  frontalize_cmd->add_flag("--zero-skips", cfg.train.zero_skips, "decode from the bottleneck only");
  frontalize_cmd->add_option("--pairs", pairs, "max input/output pairs in the grid");
  frontalize_cmd->add_option("--columns", columns, "image cells per grid row");
  frontalize_cmd->add_option("--grid-out", cfg.grid_out, "output grid PNG path");

  auto* gradcheck = app.add_subcommand("grad-check", "finite-difference gradient verification");
  std::uint64_t gc_seed = 20240901;
  gradcheck->add_option("--seed", gc_seed, "suite seed");

  // The file was already applied by the prescan; registering the flag here
  // only teaches the parser to accept it in any position.
  for (CLI::App* sub : {synth, train, eval, ablate, frontalize_cmd, gradcheck})
    sub->add_option("--config", config_path, "sectioned key=value config file (applied before flags)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // flag errors are configuration errors
  }

  try {
    if (synth->parsed()) return cmd_synth(cfg);
    if (train->parsed()) return cmd_train(cfg, stage_opt->count() > 0, ablation_opt->count() > 0);
    if (eval->parsed()) return cmd_eval(cfg);
    if (ablate->parsed()) return cmd_ablate(cfg, seeds, test_folds);
    if (frontalize_cmd->parsed()) return cmd_frontalize(cfg, pairs, columns);
    if (gradcheck->parsed()) return cmd_grad_check(gc_seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
