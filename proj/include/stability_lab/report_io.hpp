// CSV / JSON / SVG emission for experiment reports.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "stability_lab/experiment.hpp"

namespace stability_lab::io {

/// 12 significant digits, so reruns compare byte for byte.
inline std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Header-ordered table of pre-formatted cells. Cells are emitted verbatim
/// in CSV and parsed back to numbers (when they are numbers) in JSON.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    if (row.size() != columns.size()) throw std::logic_error("row width does not match header");
    rows.push_back(std::move(row));
  }
};

inline std::string to_csv(const Table& t) {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(t.columns);
  for (const auto& r : t.rows) line(r);
  return out.str();
}

inline nlohmann::ordered_json cell_to_json(const std::string& cell) {
  if (cell == "true") return true;
  if (cell == "false") return false;
  try {
    std::size_t used = 0;
    if (cell.find_first_of(".eEn") == std::string::npos) {
      const long long v = std::stoll(cell, &used);
      if (used == cell.size()) return v;
    }
    const double v = std::stod(cell, &used);
    if (used == cell.size()) return v;
  } catch (const std::exception&) {
  }
  return cell;
}

/// One object per row, keys in column order.
inline std::string to_json(const Table& t) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < t.columns.size(); ++i) obj[t.columns[i]] = cell_to_json(r[i]);
    arr.push_back(std::move(obj));
  }
  return arr.dump(2) + "\n";
}

inline const std::vector<std::string>& estimate_columns() {
  static const std::vector<std::string> cols = {
      "n",       "gamma",  "l",       "trials",          "seed",     "freq_gap_event", "ci_lo",
      "ci_hi",   "freq_e1", "freq_e2", "freq_e1_and_e2", "mean_gap", "threshold",      "bound_3_64"};
  return cols;
}

inline std::vector<std::string> estimate_row(const ExperimentReport& r) {
  return {std::to_string(r.n),
          fmt_real(r.gamma),
          fmt_real(r.l),
          std::to_string(r.counts.trials),
          std::to_string(r.seed),
          fmt_real(r.gap_event.freq),
          fmt_real(r.gap_event.ci_lo),
          fmt_real(r.gap_event.ci_hi),
          fmt_real(r.e1.freq),
          fmt_real(r.e2.freq),
          fmt_real(r.e1_and_e2.freq),
          fmt_real(r.mean_gap),
          fmt_real(r.threshold),
          fmt_real(kGapProbabilityFloor)};
}

inline Table estimate_table(const std::vector<ExperimentReport>& reports) {
  Table t{estimate_columns(), {}};
  for (const auto& r : reports) t.add(estimate_row(r));
  return t;
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace detail {

struct Frame {
  double x0, y0, w, h;        // pixel box
  double xmin, xmax, ymin, ymax;

  double px(double x) const { return x0 + (xmax > xmin ? (x - xmin) / (xmax - xmin) : 0.5) * w; }
  double py(double y) const { return y0 + h - (ymax > ymin ? (y - ymin) / (ymax - ymin) : 0.5) * h; }
};

inline std::string polyline(const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
                            const std::string& colour, const std::string& dash = "") {
  std::ostringstream out;
  out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\"";
  if (!dash.empty()) out << " stroke-dasharray=\"" << dash << "\"";
  out << " points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) out << (i ? " " : "") << fmt_real(f.px(xs[i])) << "," << fmt_real(f.py(ys[i]));
  out << "\"/>\n";
  return out.str();
}

inline std::string markers(const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
                           const std::string& colour) {
  std::ostringstream out;
  for (std::size_t i = 0; i < xs.size(); ++i)
    out << "<circle cx=\"" << fmt_real(f.px(xs[i])) << "\" cy=\"" << fmt_real(f.py(ys[i])) << "\" r=\"4\" fill=\""
        << colour << "\"/>\n";
  return out.str();
}

inline std::string axes(const Frame& f, const std::string& title, const std::string& ylabel) {
  std::ostringstream out;
  out << "<rect x=\"" << f.x0 << "\" y=\"" << f.y0 << "\" width=\"" << f.w << "\" height=\"" << f.h
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  out << "<text x=\"" << f.x0 << "\" y=\"" << f.y0 - 8 << "\" font-size=\"14\">" << title << "</text>\n";
  out << "<text x=\"" << f.x0 - 50 << "\" y=\"" << f.y0 + f.h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 "
      << f.x0 - 50 << " " << f.y0 + f.h / 2 << ")\">" << ylabel << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.ymin + (f.ymax - f.ymin) * i / 4.0;
    const double xv = f.xmin + (f.xmax - f.xmin) * i / 4.0;
    out << "<text x=\"" << f.x0 - 6 << "\" y=\"" << fmt_real(f.py(yv) + 4) << "\" font-size=\"10\" text-anchor=\"end\">"
        << fmt_real(std::round(yv * 1e4) / 1e4) << "</text>\n";
    out << "<text x=\"" << fmt_real(f.px(xv)) << "\" y=\"" << f.y0 + f.h + 14
        << "\" font-size=\"10\" text-anchor=\"middle\">" << fmt_real(std::round(xv * 100) / 100) << "</text>\n";
  }
  return out.str();
}

inline std::string legend_entry(double x, double y, const std::string& colour, const std::string& label,
                                const std::string& dash = "") {
  std::ostringstream out;
  out << "<line x1=\"" << x << "\" y1=\"" << y << "\" x2=\"" << x + 24 << "\" y2=\"" << y << "\" stroke=\"" << colour
      << "\" stroke-width=\"2\"" << (dash.empty() ? "" : " stroke-dasharray=\"" + dash + "\"") << "/>\n";
  out << "<text x=\"" << x + 30 << "\" y=\"" << y + 4 << "\" font-size=\"11\">" << label << "</text>\n";
  return out.str();
}

}  // namespace detail

/// Two stacked panels against n on linear axes: the gap-event frequency
/// (with 95% interval whiskers) over the 3/64 floor, and mean_gap over the
/// threshold curve gamma/4 + L/(32 sqrt n).
inline std::string render_sweep_svg(const std::vector<ExperimentReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("nothing to plot");
  std::vector<double> ns, freq, lo, hi, gap, thr;
  for (const auto& r : reports) {
    ns.push_back(static_cast<double>(r.n));
    freq.push_back(r.gap_event.freq);
    lo.push_back(r.gap_event.ci_lo);
    hi.push_back(r.gap_event.ci_hi);
    gap.push_back(r.mean_gap);
    thr.push_back(r.threshold);
  }
  const auto [nmin_it, nmax_it] = std::minmax_element(ns.begin(), ns.end());
  double nmin = *nmin_it, nmax = *nmax_it;
  if (nmin == nmax) {
    nmin -= 1;
    nmax += 1;
  }

  const double fmax = std::max(*std::max_element(hi.begin(), hi.end()), kGapProbabilityFloor) * 1.1;
  detail::Frame top{80, 40, 560, 220, nmin, nmax, 0.0, fmax};

  double gmin = std::min(*std::min_element(gap.begin(), gap.end()), *std::min_element(thr.begin(), thr.end()));
  double gmax = std::max(*std::max_element(gap.begin(), gap.end()), *std::max_element(thr.begin(), thr.end()));
  const double pad = (gmax - gmin) * 0.1 + 1e-9;
  detail::Frame bottom{80, 340, 560, 220, nmin, nmax, std::min(0.0, gmin - pad), gmax + pad};

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"820\" height=\"620\" viewBox=\"0 0 820 620\">\n"
      << "<rect width=\"820\" height=\"620\" fill=\"white\"/>\n";

  svg << detail::axes(top, "P(gap >= threshold) vs n", "frequency");
  svg << detail::polyline(top, {nmin, nmax}, {kGapProbabilityFloor, kGapProbabilityFloor}, "#c0392b", "6,4");
  for (std::size_t i = 0; i < ns.size(); ++i)
    svg << "<line x1=\"" << fmt_real(top.px(ns[i])) << "\" y1=\"" << fmt_real(top.py(lo[i])) << "\" x2=\""
        << fmt_real(top.px(ns[i])) << "\" y2=\"" << fmt_real(top.py(hi[i])) << "\" stroke=\"#1f4e79\"/>\n";
  svg << detail::polyline(top, ns, freq, "#1f4e79") << detail::markers(top, ns, freq, "#1f4e79");
  svg << detail::legend_entry(660, 60, "#1f4e79", "measured frequency");
  svg << detail::legend_entry(660, 80, "#c0392b", "3/64 floor", "6,4");

  svg << detail::axes(bottom, "mean gap vs n", "gap");
  svg << detail::polyline(bottom, ns, thr, "#c0392b", "6,4");
  svg << detail::polyline(bottom, ns, gap, "#1f4e79") << detail::markers(bottom, ns, gap, "#1f4e79");
  svg << detail::legend_entry(660, 360, "#1f4e79", "measured mean gap");
  svg << detail::legend_entry(660, 380, "#c0392b", "gamma/4 + L/(32 sqrt n)", "6,4");

  svg << "<text x=\"360\" y=\"600\" font-size=\"12\" text-anchor=\"middle\">n</text>\n</svg>\n";
  return svg.str();
}

}  // namespace stability_lab::io
