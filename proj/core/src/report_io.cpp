#include "cpgan/report_io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "cpgan/version.hpp"

namespace cpgan {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open output file " + path);
  return f;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.8g", v);
  return buf;
}

}  // namespace

nlohmann::json metrics_to_json(const MetricsReport& r) {
  nlohmann::json gar;
  for (const auto& [target, value] : r.gar_at_far) gar[fmt(target)] = value;
  nlohmann::json roc = nlohmann::json::array();
  for (const RocPoint& p : r.roc) roc.push_back({{"threshold", p.threshold}, {"far", p.far}, {"gar", p.gar()}});
  return {{"auc", r.auc},
          {"eer", r.eer},
          {"eer_threshold", r.eer_threshold},
          {"gar_at_far", gar},
          {"accuracy_at_best_threshold", r.accuracy_at_best_threshold},
          {"best_threshold", r.best_threshold},
          {"cmc", r.cmc},
          {"num_genuine", r.num_genuine},
          {"num_impostor", r.num_impostor},
          {"num_probes", r.num_probes},
          {"gallery_size", r.gallery_size},
          {"roc", roc}};
}

void write_metrics_json(const std::string& path, const MetricsReport& r,
                        const nlohmann::json& config_echo) {
  nlohmann::json j = {{"version", version_string()}, {"config", config_echo}, {"metrics", metrics_to_json(r)}};
  auto f = open_out(path);
  f << j.dump(2) << "\n";
}

void write_roc_csv(const std::string& path, const MetricsReport& r) {
  auto f = open_out(path);
  f << "threshold,far,frr,gar\n";
  for (const RocPoint& p : r.roc)
    f << fmt(p.threshold) << "," << fmt(p.far) << "," << fmt(p.frr) << "," << fmt(p.gar()) << "\n";
}

void write_cmc_csv(const std::string& path, const MetricsReport& r) {
  auto f = open_out(path);
  f << "rank,accuracy\n";
  for (std::size_t k = 0; k < r.cmc.size(); ++k) f << (k + 1) << "," << fmt(r.cmc[k]) << "\n";
}

void write_roc_svg(const std::string& path, const NamedCurves& curves, const std::string& title) {
  constexpr int kW = 480, kH = 400, kMargin = 48;
  constexpr int kPlotW = kW - 2 * kMargin, kPlotH = kH - 2 * kMargin;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  auto px = [&](double far) { return kMargin + far * kPlotW; };
  auto py = [&](double gar) { return kH - kMargin - gar * kPlotH; };

  auto f = open_out(path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
    << "</text>\n";
  // Axes with quarter gridlines.
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    f << "<line x1=\"" << px(v) << "\" y1=\"" << py(0) << "\" x2=\"" << px(v) << "\" y2=\"" << py(1)
      << "\" stroke=\"#dddddd\"/>\n";
    f << "<line x1=\"" << px(0) << "\" y1=\"" << py(v) << "\" x2=\"" << px(1) << "\" y2=\"" << py(v)
      << "\" stroke=\"#dddddd\"/>\n";
    f << "<text x=\"" << px(v) << "\" y=\"" << py(0) + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << fmt(v) << "</text>\n";
    f << "<text x=\"" << px(0) - 6 << "\" y=\"" << py(v) + 3 << "\" text-anchor=\"end\" font-size=\"10\">"
      << fmt(v) << "</text>\n";
  }
  f << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 8 << "\" text-anchor=\"middle\" font-size=\"11\">"
    << "false accept rate</text>\n";
  f << "<text x=\"14\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" font-size=\"11\" "
    << "transform=\"rotate(-90 14 " << kH / 2 << ")\">genuine accept rate</text>\n";

  int color = 0;
  int legend_y = kMargin + 8;
  for (const auto& [name, report] : curves) {
    const char* c = kColors[color++ % 6];
    f << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (const RocPoint& p : report->roc) f << px(p.far) << "," << py(p.gar()) << " ";
    f << "\"/>\n";
    f << "<line x1=\"" << px(0.55) << "\" y1=\"" << legend_y << "\" x2=\"" << px(0.65) << "\" y2=\""
      << legend_y << "\" stroke=\"" << c << "\" stroke-width=\"1.5\"/>\n";
    f << "<text x=\"" << px(0.67) << "\" y=\"" << legend_y + 3 << "\" font-size=\"10\">" << name
      << " (auc " << fmt(report->auc) << ")</text>\n";
    legend_y += 14;
  }
  f << "</svg>\n";
}

void write_comparison_csv(const std::string& path, const NamedCurves& curves) {
  auto f = open_out(path);
  f << "name,auc,eer,accuracy_at_best_threshold";
  if (!curves.empty())
    for (const auto& [target, gar] : curves.front().second->gar_at_far) f << ",gar_at_far_" << fmt(target);
  f << ",rank1\n";
  for (const auto& [name, r] : curves) {
    f << name << "," << fmt(r->auc) << "," << fmt(r->eer) << "," << fmt(r->accuracy_at_best_threshold);
    for (const auto& [target, gar] : r->gar_at_far) f << "," << fmt(gar);
    f << "," << fmt(r->cmc.empty() ? 0.0 : r->cmc.front()) << "\n";
  }
}

void write_ablation_summary(const std::string& path, const AblationReport& report,
                            const TrainConfig& base) {
  nlohmann::json cfg;
  to_json(cfg, base);
  nlohmann::json runs = nlohmann::json::array();
  for (const AblationRun& r : report.runs)
    runs.push_back({{"variant", r.variant},
                    {"seed", r.seed},
                    {"auc_init", r.auc_init},
                    {"auc_final", r.auc_final},
                    {"eer", r.report.eer},
                    {"steps_run", r.steps_run},
                    {"train_seconds", r.train_seconds},
                    {"checkpoint", r.checkpoint}});
  nlohmann::json medians;
  for (const AblationVariant& v : ablation_variants(base.weights))
    medians[v.name] = report.median_auc(v.name);
  nlohmann::json j = {{"version", version_string()},
                      {"config", cfg},
                      {"test_folds", report.test_folds},
                      {"runs", runs},
                      {"median_auc", medians}};
  auto f = open_out(path);
  f << j.dump(2) << "\n";
}

}  // namespace cpgan
