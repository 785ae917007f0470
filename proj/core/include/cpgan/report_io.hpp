#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cpgan/evaluation.hpp"
#include "json.hpp"

// Report artifacts: metrics as JSON (with the effective config echoed in),
// ROC/CMC operating tables as CSV, and simple SVG line charts. Everything
// is plain files; logs stay on stderr.

namespace cpgan {

nlohmann::json metrics_to_json(const MetricsReport& r);

/// Full metrics report; `config_echo` is embedded verbatim under "config"
/// alongside the build version.
void write_metrics_json(const std::string& path, const MetricsReport& r,
                        const nlohmann::json& config_echo);

/// threshold,far,frr,gar rows, threshold-descending.
void write_roc_csv(const std::string& path, const MetricsReport& r);

/// rank,accuracy rows.
void write_cmc_csv(const std::string& path, const MetricsReport& r);

/// Named (FAR, GAR) curves drawn into one chart.
using NamedCurves = std::vector<std::pair<std::string, const MetricsReport*>>;
void write_roc_svg(const std::string& path, const NamedCurves& curves, const std::string& title);

/// Side-by-side operating table: name,auc,eer,gar@targets,rank1.
void write_comparison_csv(const std::string& path, const NamedCurves& curves);

void write_ablation_summary(const std::string& path, const AblationReport& report,
                            const TrainConfig& base);

}  // namespace cpgan
