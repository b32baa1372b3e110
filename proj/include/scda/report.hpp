#pragma once

// Report emission. CSV dialect: comma separators, '.' decimal point, header
// row, LF endings. Doubles are printed with shortest round-trip formatting
// so reruns are byte-identical.

#include <charconv>
#include <filesystem>
#include <string>
#include <vector>

#include "scda/harness.hpp"
#include "scda/io.hpp"
#include "scda/pca.hpp"

namespace scda {

inline std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string grid_report_csv(const GridReport& report,
                                   const DatasetManifest& manifest) {
  std::string out = "method,train_centers,test_centers,k,seed,bacc\n";
  for (const auto& cell : report.cells) {
    out += cell.method + "," + detail::center_set_label(manifest, cell.train_centers) +
           "," + detail::center_set_label(manifest, cell.test_centers) + ",," +
           std::to_string(report.seed) + "," + fmt_double(cell.bacc.value) + "\n";
  }
  return out;
}

inline std::string fewshot_report_csv(const FewShotReport& report,
                                      const DatasetManifest& manifest) {
  const std::string base = manifest.centers[static_cast<std::size_t>(report.base_center)];
  const std::string both =
      detail::center_set_label(manifest, {report.base_center, report.heldout_center});
  std::string out = "method,train_centers,test_centers,k,seed,bacc\n";
  for (const auto& row : report.rows) {
    out += row.method + "," + (row.method == "raw" ? base : both) + "," +
           manifest.centers[static_cast<std::size_t>(row.test_center)] + "," +
           row.k_label + "," + std::to_string(row.seed_index) + "," +
           fmt_double(row.bacc.value) + "\n";
  }
  return out;
}

inline std::string fewshot_aggregate_csv(const FewShotReport& report,
                                         const DatasetManifest& manifest) {
  std::string out = "method,test_centers,k,mean_bacc,std_bacc,n_seeds\n";
  for (const auto& agg : report.aggregates) {
    out += agg.method + "," +
           manifest.centers[static_cast<std::size_t>(agg.test_center)] + "," +
           agg.k_label + "," + fmt_double(agg.mean) + "," + fmt_double(agg.stddev) +
           "," + std::to_string(agg.n_seeds) + "\n";
  }
  return out;
}

inline std::string confusion_csv(const ConfusionMatrix& cm,
                                 const std::vector<std::string>& class_names) {
  std::string out = "true_class";
  for (const auto& name : class_names) out += ",pred_" + name;
  out += "\n";
  for (Eigen::Index r = 0; r < cm.counts.rows(); ++r) {
    out += class_names[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < cm.counts.cols(); ++c)
      out += "," + std::to_string(cm.counts(r, c));
    out += "\n";
  }
  return out;
}

inline std::string loss_trace_csv(const TrainReport& report) {
  std::string out = "step,loss,anchors_used,loss_per_anchor\n";
  for (std::size_t i = 0; i < report.loss_trace.size(); ++i) {
    const int anchors = report.anchors_used_trace[i];
    const double scaled = report.loss_trace[i] / std::max(anchors, 1);
    out += std::to_string(i) + "," + fmt_double(report.loss_trace[i]) + "," +
           std::to_string(anchors) + "," + fmt_double(scaled) + "\n";
  }
  return out;
}

inline std::string projection_csv(const DatasetManifest& manifest,
                                  const Projection2D& proj) {
  std::string out = "slide_id,center,class,x,y\n";
  for (std::size_t i = 0; i < manifest.slides.size(); ++i) {
    const auto& s = manifest.slides[i];
    out += s.id + "," + manifest.centers[static_cast<std::size_t>(s.center)] + "," +
           manifest.classes[static_cast<std::size_t>(s.label)] + "," +
           fmt_double(proj.coords(static_cast<Eigen::Index>(i), 0)) + "," +
           fmt_double(proj.coords(static_cast<Eigen::Index>(i), 1)) + "\n";
  }
  return out;
}

// Scatter plot of the 2D projection: color by class, marker by center.
// Presentation only; no pipeline step consumes it.
inline std::string projection_svg(const DatasetManifest& manifest,
                                  const Projection2D& proj) {
  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                   "#bcbd22", "#17becf"};
  const double width = 640.0, height = 480.0, margin = 48.0;
  double min_x = proj.coords.col(0).minCoeff(), max_x = proj.coords.col(0).maxCoeff();
  double min_y = proj.coords.col(1).minCoeff(), max_y = proj.coords.col(1).maxCoeff();
  if (max_x - min_x < 1e-12) max_x = min_x + 1.0;
  if (max_y - min_y < 1e-12) max_y = min_y + 1.0;
  const auto sx = [&](double x) {
    return margin + (x - min_x) / (max_x - min_x) * (width - 2 * margin);
  };
  const auto sy = [&](double y) {
    return height - margin - (y - min_y) / (max_y - min_y) * (height - 2 * margin);
  };
  const auto num = [](double v) { return fmt_double(std::round(v * 100.0) / 100.0); };

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
      "viewBox=\"0 0 640 480\">\n<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < manifest.slides.size(); ++i) {
    const auto& s = manifest.slides[i];
    const char* color = kPalette[static_cast<std::size_t>(s.label) % 10];
    const double x = sx(proj.coords(static_cast<Eigen::Index>(i), 0));
    const double y = sy(proj.coords(static_cast<Eigen::Index>(i), 1));
    switch (s.center % 3) {
      case 0:
        svg += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) +
               "\" r=\"3\" fill=\"" + color + "\" fill-opacity=\"0.75\"/>\n";
        break;
      case 1:
        svg += "<rect x=\"" + num(x - 2.6) + "\" y=\"" + num(y - 2.6) +
               "\" width=\"5.2\" height=\"5.2\" fill=\"" + color +
               "\" fill-opacity=\"0.75\"/>\n";
        break;
      default:
        svg += "<path d=\"M " + num(x) + " " + num(y - 3.2) + " L " + num(x - 3.0) +
               " " + num(y + 2.6) + " L " + num(x + 3.0) + " " + num(y + 2.6) +
               " Z\" fill=\"" + color + "\" fill-opacity=\"0.75\"/>\n";
        break;
    }
  }
  double ly = 16.0;
  for (std::size_t c = 0; c < manifest.classes.size(); ++c) {
    svg += "<circle cx=\"556\" cy=\"" + num(ly - 4) + "\" r=\"4\" fill=\"" +
           kPalette[c % 10] + "\"/><text x=\"566\" y=\"" + num(ly) +
           "\" font-size=\"11\" font-family=\"sans-serif\">" + manifest.classes[c] +
           "</text>\n";
    ly += 15.0;
  }
  for (std::size_t h = 0; h < manifest.centers.size(); ++h) {
    const char* marker = h % 3 == 0 ? "circle" : (h % 3 == 1 ? "square" : "triangle");
    svg += "<text x=\"556\" y=\"" + num(ly) +
           "\" font-size=\"11\" font-family=\"sans-serif\">" + manifest.centers[h] +
           ": " + marker + "</text>\n";
    ly += 15.0;
  }
  svg += "<text x=\"48\" y=\"472\" font-size=\"11\" font-family=\"sans-serif\">"
         "explained variance: " +
         fmt_double(std::round(proj.explained_variance_fraction * 1000.0) / 1000.0) +
         "</text>\n</svg>\n";
  return svg;
}

}  // namespace scda
