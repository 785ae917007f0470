#include "cpgan/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>

#include "cpgan/report_io.hpp"

namespace fs = std::filesystem;

namespace cpgan {

double pair_score(const float* a, const float* b, int dim) {
  double d2 = 0.0;
  for (int i = 0; i < dim; ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    d2 += d * d;
  }
  return -std::sqrt(d2);
}

EmbeddedSet embed_entries(UNetEncoder<float>& enc, const LoadedDataset& data,
                          const std::vector<int>& entry_idxs, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("embed_entries: batch_size must be >= 1");
  const auto& m = data.manifest;
  EmbeddedSet out;
  const int n = static_cast<int>(entry_idxs.size());
  out.identities.reserve(n);
  out.entry_indices = entry_idxs;
  for (int idx : entry_idxs) out.identities.push_back(m.entries.at(idx).identity);

  int embed_dim = -1;
  for (int start = 0; start < n; start += batch_size) {
    const int b = std::min(batch_size, n - start);
    Tensor<float> batch({b, m.channels, m.height, m.width});
    const std::size_t stride = static_cast<std::size_t>(m.channels) * m.height * m.width;
    for (int i = 0; i < b; ++i) {
      const Tensor<float>& img = data.images.at(entry_idxs[start + i]);
      std::copy(img.data(), img.data() + stride, batch.data() + i * stride);
    }
    Tensor<float> z = enc.forward(batch).embedding;
    if (embed_dim < 0) {
      embed_dim = z.dim(1);
      out.embeddings = Tensor<float>::zeros({n, embed_dim});
    }
    std::copy(z.data(), z.data() + static_cast<std::size_t>(b) * embed_dim,
              out.embeddings.data() + static_cast<std::size_t>(start) * embed_dim);
  }
  if (n == 0) out.embeddings = Tensor<float>::zeros({0, 0});
  return out;
}

EmbeddedSet embed_domain(UNetEncoder<float>& enc, const LoadedDataset& data,
                         const std::vector<int>& folds, Domain domain, int batch_size) {
  return embed_entries(enc, data, data.entries_in_folds(folds, domain), batch_size);
}

ScoreSet score_pairs(const EmbeddedSet& probes, const EmbeddedSet& references) {
  if (probes.size() == 0 || references.size() == 0)
    throw std::invalid_argument("score_pairs: empty embedding set");
  if (probes.embeddings.dim(1) != references.embeddings.dim(1))
    throw std::invalid_argument("score_pairs: embedding dimension mismatch");
  const int dim = probes.embeddings.dim(1);
  ScoreSet ss;
  for (int i = 0; i < probes.size(); ++i) {
    const float* a = probes.embeddings.data() + static_cast<std::size_t>(i) * dim;
    for (int j = 0; j < references.size(); ++j) {
      const float* b = references.embeddings.data() + static_cast<std::size_t>(j) * dim;
      double s = pair_score(a, b, dim);
      (probes.identities[i] == references.identities[j] ? ss.genuine : ss.impostor).push_back(s);
    }
  }
  return ss;
}

MetricsReport compute_verification(const ScoreSet& scores, const std::vector<double>& far_targets) {
  if (scores.genuine.empty() || scores.impostor.empty())
    throw std::invalid_argument("compute_verification: need at least one genuine and one impostor score");
  for (double s : scores.genuine)
    if (!std::isfinite(s)) throw std::invalid_argument("compute_verification: non-finite genuine score");
  for (double s : scores.impostor)
    if (!std::isfinite(s)) throw std::invalid_argument("compute_verification: non-finite impostor score");

  std::vector<double> gen = scores.genuine, imp = scores.impostor;
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  const double n_gen = static_cast<double>(gen.size());
  const double n_imp = static_cast<double>(imp.size());

  // Candidate thresholds: every distinct score, walked highest-first.
  std::vector<double> thresholds;
  thresholds.reserve(gen.size() + imp.size());
  thresholds.insert(thresholds.end(), gen.begin(), gen.end());
  thresholds.insert(thresholds.end(), imp.begin(), imp.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  MetricsReport r;
  r.num_genuine = static_cast<int>(gen.size());
  r.num_impostor = static_cast<int>(imp.size());

  // Virtual accept-nothing operating point anchors the curve at (FAR,GAR)=(0,0).
  r.roc.push_back({thresholds.front() + 1.0, 0.0, 1.0});
  for (double t : thresholds) {
    double far = (imp.end() - std::lower_bound(imp.begin(), imp.end(), t)) / n_imp;
    double frr = (std::lower_bound(gen.begin(), gen.end(), t) - gen.begin()) / n_gen;
    r.roc.push_back({t, far, frr});
  }

  // Equal-error rate: walk until FAR catches FRR, interpolating the crossing.
  for (std::size_t i = 1; i < r.roc.size(); ++i) {
    const RocPoint& p = r.roc[i];
    if (p.far == p.frr) {
      r.eer = p.far;
      r.eer_threshold = p.threshold;
      break;
    }
    if (p.far > p.frr) {
      const RocPoint& q = r.roc[i - 1];
      const double denom = (p.far - q.far) + (q.frr - p.frr);
      const double alpha = denom > 0 ? (q.frr - q.far) / denom : 0.0;
      r.eer = q.far + alpha * (p.far - q.far);
      r.eer_threshold = q.threshold + alpha * (p.threshold - q.threshold);
      break;
    }
  }

  // AUC by trapezoid over the (FAR, GAR) polyline; endpoints are exact.
  for (std::size_t i = 1; i < r.roc.size(); ++i) {
    const double dx = r.roc[i].far - r.roc[i - 1].far;
    r.auc += dx * 0.5 * (r.roc[i].gar() + r.roc[i - 1].gar());
  }

  for (double target : far_targets) {
    double best = 0.0;
    for (const RocPoint& p : r.roc)
      if (p.far <= target) best = std::max(best, p.gar());
    r.gar_at_far[target] = best;
  }

  double best_balanced = -1.0;
  for (const RocPoint& p : r.roc) {
    const double balanced = 0.5 * (p.gar() + (1.0 - p.far));
    if (balanced > best_balanced) {
      best_balanced = balanced;
      r.best_threshold = p.threshold;
      r.accuracy_at_best_threshold = (p.gar() * n_gen + (1.0 - p.far) * n_imp) / (n_gen + n_imp);
    }
  }
  return r;
}

std::vector<double> compute_cmc(const EmbeddedSet& probes, const EmbeddedSet& gallery, int max_rank) {
  if (probes.size() == 0 || gallery.size() == 0)
    throw std::invalid_argument("compute_cmc: empty probe or gallery set");
  if (max_rank < 1) throw std::invalid_argument("compute_cmc: max_rank must be >= 1");

  std::map<int, int> gallery_pos;  // identity -> gallery row
  for (int j = 0; j < gallery.size(); ++j) {
    if (!gallery_pos.emplace(gallery.identities[j], j).second)
      throw std::invalid_argument("compute_cmc: identity " + std::to_string(gallery.identities[j]) +
                                  " appears more than once in the gallery");
  }
  for (int id : probes.identities)
    if (!gallery_pos.count(id))
      throw std::invalid_argument("compute_cmc: probe identity " + std::to_string(id) +
                                  " missing from the gallery");

  const int dim = probes.embeddings.dim(1);
  if (dim != gallery.embeddings.dim(1))
    throw std::invalid_argument("compute_cmc: embedding dimension mismatch");

  const int ranks = std::min(max_rank, gallery.size());
  std::vector<int> hits(ranks, 0);
  std::vector<std::pair<double, int>> order(gallery.size());
  for (int i = 0; i < probes.size(); ++i) {
    const float* a = probes.embeddings.data() + static_cast<std::size_t>(i) * dim;
    for (int j = 0; j < gallery.size(); ++j) {
      const float* b = gallery.embeddings.data() + static_cast<std::size_t>(j) * dim;
      order[j] = {-pair_score(a, b, dim), j};  // distance, index
    }
    std::sort(order.begin(), order.end());
    const int want = gallery_pos[probes.identities[i]];
    for (int k = 0; k < ranks; ++k) {
      if (order[k].second == want) {
        for (int r = k; r < ranks; ++r) ++hits[r];
        break;
      }
    }
  }
  std::vector<double> cmc(ranks);
  for (int k = 0; k < ranks; ++k) cmc[k] = static_cast<double>(hits[k]) / probes.size();
  return cmc;
}

MetricsReport evaluate_encoders(UNetEncoder<float>& enc_profile, UNetEncoder<float>& enc_frontal,
                                const LoadedDataset& data, const std::vector<int>& folds,
                                int batch_size, int max_rank) {
  EmbeddedSet profiles = embed_domain(enc_profile, data, folds, Domain::kProfile, batch_size);
  EmbeddedSet frontals = embed_domain(enc_frontal, data, folds, Domain::kFrontal, batch_size);
  if (profiles.size() == 0 || frontals.size() == 0)
    throw std::invalid_argument("evaluate_encoders: no images in the requested folds");

  MetricsReport r = compute_verification(score_pairs(profiles, frontals));

  // Gallery: first frontal row of each identity, keeping manifest order.
  EmbeddedSet gallery;
  const int dim = frontals.embeddings.dim(1);
  std::set<int> seen;
  std::vector<int> rows;
  for (int j = 0; j < frontals.size(); ++j)
    if (seen.insert(frontals.identities[j]).second) rows.push_back(j);
  gallery.embeddings = Tensor<float>::zeros({static_cast<int>(rows.size()), dim});
  for (std::size_t k = 0; k < rows.size(); ++k) {
    gallery.identities.push_back(frontals.identities[rows[k]]);
    gallery.entry_indices.push_back(frontals.entry_indices[rows[k]]);
    std::copy(frontals.embeddings.data() + static_cast<std::size_t>(rows[k]) * dim,
              frontals.embeddings.data() + static_cast<std::size_t>(rows[k] + 1) * dim,
              gallery.embeddings.data() + k * dim);
  }
  r.cmc = compute_cmc(profiles, gallery, max_rank);
  r.num_probes = profiles.size();
  r.gallery_size = gallery.size();
  return r;
}

std::map<std::string, double> metric_scalars(const MetricsReport& r) {
  std::map<std::string, double> m;
  m["auc"] = r.auc;
  m["eer"] = r.eer;
  m["accuracy_at_best_threshold"] = r.accuracy_at_best_threshold;
  for (const auto& [target, gar] : r.gar_at_far) {
    char key[48];
    std::snprintf(key, sizeof(key), "gar_at_far_%g", target);
    m[key] = gar;
  }
  if (!r.cmc.empty()) m["rank1"] = r.cmc.front();
  return m;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

KfoldReport kfold_evaluate(int num_folds, const FoldRunner& runner) {
  if (num_folds < 2) throw std::invalid_argument("kfold_evaluate: need at least 2 folds");
  KfoldReport report;
  for (int held = 0; held < num_folds; ++held) {
    std::vector<int> train_folds;
    for (int f = 0; f < num_folds; ++f)
      if (f != held) train_folds.push_back(f);
    report.per_fold.push_back(runner(train_folds, held));
  }
  std::map<std::string, std::vector<double>> columns;
  for (const MetricsReport& r : report.per_fold)
    for (const auto& [k, v] : metric_scalars(r)) columns[k].push_back(v);
  for (const auto& [k, vs] : columns) {
    double sum = 0.0;
    for (double v : vs) sum += v;
    const double mean = sum / vs.size();
    double var = 0.0;
    for (double v : vs) var += (v - mean) * (v - mean);
    report.mean[k] = mean;
    report.stddev[k] = std::sqrt(var / vs.size());
  }
  return report;
}

std::vector<AblationVariant> ablation_variants(const LossWeights& base) {
  LossWeights cpl_l2 = base;
  cpl_l2.lambda_gan = 0.0;
  cpl_l2.lambda_perceptual = 0.0;
  LossWeights cpl_l2_gan = base;
  cpl_l2_gan.lambda_perceptual = 0.0;
  return {{"cpl+l2", cpl_l2}, {"cpl+l2+gan", cpl_l2_gan}, {"full", base}};
}

double AblationReport::median_auc(const std::string& variant) const {
  std::vector<double> aucs;
  for (const AblationRun& r : runs)
    if (r.variant == variant) aucs.push_back(r.auc_final);
  if (aucs.empty()) throw std::invalid_argument("AblationReport: unknown variant " + variant);
  return median(std::move(aucs));
}

const AblationRun* AblationReport::median_run(const std::string& variant) const {
  const double target = median_auc(variant);
  const AblationRun* best = nullptr;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const AblationRun& r : runs) {
    if (r.variant != variant) continue;
    const double gap = std::abs(r.auc_final - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = &r;
    }
  }
  return best;
}

namespace {
std::string sanitize_dirname(std::string s) {
  for (char& c : s)
    if (c == '+') c = '_';
  return s;
}
}  // namespace

AblationReport run_ablation(const LoadedDataset& data, const TrainConfig& base,
                            const std::vector<int>& test_folds, const std::vector<std::uint64_t>& seeds,
                            const std::string& out_dir, std::ostream* log) {
  if (seeds.empty()) throw std::invalid_argument("run_ablation: need at least one seed");
  if (test_folds.empty()) throw std::invalid_argument("run_ablation: need at least one test fold");
  fs::create_directories(out_dir);

  AblationReport report;
  report.test_folds = test_folds;
  for (const AblationVariant& variant : ablation_variants(base.weights)) {
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.weights = variant.weights;
      cfg.seed = seed;
      const fs::path run_dir =
          fs::path(out_dir) / (sanitize_dirname(variant.name) + "_seed" + std::to_string(seed));
      fs::create_directories(run_dir);
      cfg.checkpoint_dir = run_dir.string();
      cfg.log_path = (run_dir / "train_log.csv").string();

      if (log)
        (*log) << "[ablate] variant=" << variant.name << " seed=" << seed << " epochs=" << cfg.epochs
               << std::endl;
      auto t0 = std::chrono::steady_clock::now();
      CpganTrainer trainer(data, cfg);
      AblationRun run;
      run.variant = variant.name;
      run.seed = seed;
      run.auc_init = evaluate_encoders(trainer.model().g_pr.encoder(), trainer.model().g_fr.encoder(),
                                       data, test_folds, cfg.batch_size)
                         .auc;
      TrainResult tr = trainer.train(cfg.epochs);
      run.report = evaluate_encoders(trainer.model().g_pr.encoder(), trainer.model().g_fr.encoder(),
                                     data, test_folds, cfg.batch_size);
      run.auc_final = run.report.auc;
      run.final_losses = tr.final_losses;
      run.checkpoint = tr.last_checkpoint;
      run.steps_run = tr.steps_run;
      run.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      nlohmann::json echo;
      to_json(echo, cfg);
      write_metrics_json((run_dir / "report.json").string(), run.report, echo);
      write_roc_csv((run_dir / "roc.csv").string(), run.report);
      write_cmc_csv((run_dir / "cmc.csv").string(), run.report);
      if (log)
        (*log) << "[ablate]   auc " << run.auc_init << " -> " << run.auc_final << " ("
               << run.train_seconds << " s)" << std::endl;
      report.runs.push_back(std::move(run));
    }
  }

  // One ROC table per variant, taken from its median-AUC run.
  for (const AblationVariant& variant : ablation_variants(base.weights)) {
    const AblationRun* r = report.median_run(variant.name);
    if (r)
      write_roc_csv((fs::path(out_dir) / ("roc_" + sanitize_dirname(variant.name) + ".csv")).string(),
                    r->report);
  }
  write_ablation_summary((fs::path(out_dir) / "ablation_summary.json").string(), report, base);
  return report;
}

}  // namespace cpgan
