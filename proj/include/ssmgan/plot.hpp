#pragma once

// Overlay plot of synthetic beats over the +-2 sd bands of their cluster
// models, as SVG with a CSV twin holding the plotted data.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ssmgan/gan.hpp"
#include "ssmgan/shape_model.hpp"

namespace ssmgan::plot {

struct Band {
  std::vector<double> time;
  std::vector<double> mean;
  std::vector<double> sd;  // per-coordinate standard deviation of the amplitude row
};

/// Amplitude band of model m: mean and the sd implied by its retained
/// components, sum_b lambda_b A_bj^2.
inline Band model_band(const ShapeModel& m, int T) {
  Band b;
  for (int j = 0; j < T; ++j) {
    b.time.push_back(m.mean[j]);
    b.mean.push_back(m.mean[T + j]);
    double var = 0.0;
    for (int r = 0; r < m.rank(); ++r) var += m.eigenvalues[r] * m.basis(r, T + j) * m.basis(r, T + j);
    b.sd.push_back(std::sqrt(var));
  }
  return b;
}

struct PlotData {
  int label = 0;
  std::vector<Band> bands;  // one per cluster
  gan::GeneratedSet beats;
};

inline std::string to_csv(const PlotData& d) {
  std::ostringstream out;
  out << "kind,class,cluster,index,t,value,sd\n";
  const char sym = class_symbol(d.label);
  for (std::size_t k = 0; k < d.bands.size(); ++k) {
    const auto& b = d.bands[k];
    for (std::size_t j = 0; j < b.time.size(); ++j) {
      out << "band," << sym << ',' << k << ',' << j << ',' << io::format_real(b.time[j]) << ',' << io::format_real(b.mean[j]) << ','
          << io::format_real(b.sd[j]) << '\n';
    }
  }
  const auto T = d.beats.rows.cols() / 2;
  for (Eigen::Index r = 0; r < d.beats.rows.rows(); ++r) {
    for (Eigen::Index j = 0; j < T; ++j) {
      out << "beat," << sym << ',' << d.beats.cluster[static_cast<std::size_t>(r)] << ',' << r << ','
          << io::format_real(d.beats.rows(r, j)) << ',' << io::format_real(d.beats.rows(r, T + j)) << ",\n";
    }
  }
  return out.str();
}

inline std::string to_svg(const PlotData& d, int width = 900, int height = 320) {
  const int pad = 30;
  double lo = -1.0, hi = 1.0;
  for (const auto& b : d.bands) {
    for (std::size_t j = 0; j < b.mean.size(); ++j) {
      lo = std::min(lo, b.mean[j] - 2 * b.sd[j]);
      hi = std::max(hi, b.mean[j] + 2 * b.sd[j]);
    }
  }
  const auto T = d.beats.rows.cols() / 2;
  if (d.beats.rows.size() > 0) {
    lo = std::min(lo, d.beats.rows.rightCols(T).minCoeff());
    hi = std::max(hi, d.beats.rows.rightCols(T).maxCoeff());
  }
  const int panels = std::max<int>(1, static_cast<int>(d.bands.size()));
  const double pw = static_cast<double>(width - pad) / panels;
  auto px = [&](int k, double t) { return pad / 2.0 + k * pw + t * (pw - pad / 2.0); };
  auto py = [&](double v) { return height - pad - (v - lo) / (hi - lo) * (height - 2 * pad); };
  std::ostringstream svg;
  svg.precision(4);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << pad / 2 << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">class " << class_symbol(d.label)
      << ": generated beats over cluster bands (mean +- 2 sd)</text>\n";
  for (int k = 0; k < static_cast<int>(d.bands.size()); ++k) {
    const auto& b = d.bands[static_cast<std::size_t>(k)];
    svg << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
    for (std::size_t j = 0; j < b.time.size(); ++j) svg << px(k, b.time[j]) << ',' << py(b.mean[j] + 2 * b.sd[j]) << ' ';
    for (std::size_t j = b.time.size(); j-- > 0;) svg << px(k, b.time[j]) << ',' << py(b.mean[j] - 2 * b.sd[j]) << ' ';
    svg << "\"/>\n<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\" points=\"";
    for (std::size_t j = 0; j < b.time.size(); ++j) svg << px(k, b.time[j]) << ',' << py(b.mean[j]) << ' ';
    svg << "\"/>\n";
  }
  for (Eigen::Index r = 0; r < d.beats.rows.rows(); ++r) {
    const int k = d.beats.cluster[static_cast<std::size_t>(r)];
    svg << "<polyline fill=\"none\" stroke=\"#e6550d\" stroke-opacity=\"0.6\" stroke-width=\"0.8\" points=\"";
    for (Eigen::Index j = 0; j < T; ++j) svg << px(k, d.beats.rows(r, j)) << ',' << py(d.beats.rows(r, T + j)) << ' ';
    svg << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

inline PlotData make_plot(const ShapeModelSet& set, const gan::GeneratedSet& beats) {
  PlotData d;
  d.label = beats.label;
  for (int k = 0; k < set.clusters_in(beats.label); ++k) d.bands.push_back(model_band(set.model(beats.label, k), set.T));
  d.beats = beats;
  return d;
}

}  // namespace ssmgan::plot
