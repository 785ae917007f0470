#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cpgan/datamodel.hpp"
#include "cpgan/networks.hpp"
#include "cpgan/tensor.hpp"
#include "cpgan/trainer.hpp"

namespace cpgan {

/// Similarity scores for verification: higher means "more likely the same
/// identity". Scores are negated embedding distances.
struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;  // fraction of impostor scores >= threshold
  double frr = 0.0;  // fraction of genuine scores < threshold
  double gar() const { return 1.0 - frr; }
};

struct MetricsReport {
  std::vector<RocPoint> roc;  // threshold-descending; spans (0,0)..(1,1) in (FAR, GAR)
  double auc = 0.0;
  double eer = 0.0;
  double eer_threshold = 0.0;
  std::map<double, double> gar_at_far;  // target FAR -> best achievable GAR
  double accuracy_at_best_threshold = 0.0;
  double best_threshold = 0.0;
  std::vector<double> cmc;  // cmc[k] = fraction of probes with rank <= k+1
  int num_genuine = 0, num_impostor = 0;
  int num_probes = 0, gallery_size = 0;
};

/// Embeddings for a set of dataset entries, parallel arrays.
struct EmbeddedSet {
  Tensor<float> embeddings;  // N x E
  std::vector<int> identities;
  std::vector<int> entry_indices;

  int size() const { return static_cast<int>(identities.size()); }
};

double pair_score(const float* a, const float* b, int dim);

EmbeddedSet embed_entries(UNetEncoder<float>& enc, const LoadedDataset& data,
                          const std::vector<int>& entry_idxs, int batch_size = 32);
EmbeddedSet embed_domain(UNetEncoder<float>& enc, const LoadedDataset& data,
                         const std::vector<int>& folds, Domain domain, int batch_size = 32);

/// Scores every (probe, reference) pair; same identity -> genuine.
ScoreSet score_pairs(const EmbeddedSet& probes, const EmbeddedSet& references);

/// ROC, AUC, equal-error rate, operating points and best-threshold accuracy
/// from raw score sets. Requires at least one score on each side.
MetricsReport compute_verification(const ScoreSet& scores,
                                   const std::vector<double>& far_targets = {0.001, 0.01});

/// Closed-set identification: `gallery` must hold exactly one entry per
/// identity and must cover every probe identity. Ties in distance break
/// toward the lower gallery index.
std::vector<double> compute_cmc(const EmbeddedSet& probes, const EmbeddedSet& gallery, int max_rank);

/// Embeds both domains over `folds`, then runs verification over all
/// cross-domain pairs and identification against a one-frontal-per-identity
/// gallery (the first frontal entry of each identity, in manifest order).
MetricsReport evaluate_encoders(UNetEncoder<float>& enc_profile, UNetEncoder<float>& enc_frontal,
                                const LoadedDataset& data, const std::vector<int>& folds,
                                int batch_size = 32, int max_rank = 5);

/// Flat scalar view of a report, used for cross-fold aggregation.
std::map<std::string, double> metric_scalars(const MetricsReport& r);

double median(std::vector<double> values);

// ---------------------------------------------------------------------------
// Cross-validation

struct KfoldReport {
  std::vector<MetricsReport> per_fold;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;  // population standard deviation
};

/// runner(train_folds, held_out_fold) trains on the former and reports on the
/// latter. Aggregates are plain arithmetic means over folds.
using FoldRunner = std::function<MetricsReport(const std::vector<int>& train_folds, int held_out_fold)>;
KfoldReport kfold_evaluate(int num_folds, const FoldRunner& runner);

// ---------------------------------------------------------------------------
// Ablation over loss configurations

struct AblationVariant {
  std::string name;
  LossWeights weights;
};

/// The pinned ladder: coupling+reconstruction, +adversarial, +perceptual.
std::vector<AblationVariant> ablation_variants(const LossWeights& base);

struct AblationRun {
  std::string variant;
  std::uint64_t seed = 0;
  double auc_init = 0.0;   // held-out AUC at initialization
  double auc_final = 0.0;  // held-out AUC after training
  MetricsReport report;
  LossBreakdown final_losses;
  std::string checkpoint;
  double train_seconds = 0.0;
  int steps_run = 0;
};

struct AblationReport {
  std::vector<AblationRun> runs;
  std::vector<int> test_folds;

  /// Median final AUC across the seeds of one variant.
  double median_auc(const std::string& variant) const;
  const AblationRun* median_run(const std::string& variant) const;
};

/// Trains every variant with every seed under identical configs apart from
/// the loss weights, evaluates on `test_folds`, and writes per-run reports,
/// per-variant ROC tables and a summary into `out_dir`.
AblationReport run_ablation(const LoadedDataset& data, const TrainConfig& base,
                            const std::vector<int>& test_folds, const std::vector<std::uint64_t>& seeds,
                            const std::string& out_dir, std::ostream* log = nullptr);

}  // namespace cpgan
