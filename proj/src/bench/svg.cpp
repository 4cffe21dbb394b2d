#include "lpvdpc/bench.hpp"

#include "lpvdpc/csv.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lpvdpc::bench {

namespace {

constexpr double kWidth = 720.0;
constexpr double kPanelHeight = 160.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 16.0;
constexpr double kTop = 36.0;
constexpr double kGap = 28.0;

struct Series {
  std::vector<double> values;
  std::string color;
  std::string dash;
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

void panel(std::ostringstream& svg, double y0, const std::string& label,
           const std::vector<double>& t, const std::vector<Series>& series) {
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const Series& s : series) {
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = first ? v : std::min(lo, v);
      hi = first ? v : std::max(hi, v);
      first = false;
    }
  }
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double t0 = t.empty() ? 0.0 : t.front();
  const double t1 = t.size() < 2 ? t0 + 1.0 : t.back();
  const double w = kWidth - kLeft - kRight;
  auto px = [&](double tv) { return kLeft + (tv - t0) / (t1 - t0) * w; };
  auto py = [&](double v) { return y0 + kPanelHeight - (v - lo) / (hi - lo) * kPanelHeight; };

  svg << "<rect x=\"" << kLeft << "\" y=\"" << y0 << "\" width=\"" << w << "\" height=\""
      << kPanelHeight << "\" fill=\"none\" stroke=\"#888\"/>\n";
  svg << "<text x=\"8\" y=\"" << fmt(y0 + kPanelHeight / 2) << "\" font-size=\"12\">" << label
      << "</text>\n";
  svg << "<text x=\"" << kLeft - 4 << "\" y=\"" << fmt(y0 + 10)
      << "\" font-size=\"10\" text-anchor=\"end\">" << fmt(hi) << "</text>\n";
  svg << "<text x=\"" << kLeft - 4 << "\" y=\"" << fmt(y0 + kPanelHeight)
      << "\" font-size=\"10\" text-anchor=\"end\">" << fmt(lo) << "</text>\n";
  for (const Series& s : series) {
    svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
    if (!s.dash.empty()) svg << " stroke-dasharray=\"" << s.dash << "\"";
    svg << " points=\"";
    for (std::size_t i = 0; i < s.values.size() && i < t.size(); ++i) {
      if (!std::isfinite(s.values[i])) continue;
      svg << fmt(px(t[i])) << "," << fmt(py(s.values[i])) << " ";
    }
    svg << "\"/>\n";
  }
}

}  // namespace

std::string trajectory_svg(const TrajectoryLog& log, const std::string& title) {
  std::vector<double> t;
  std::vector<double> r, y, u;
  std::vector<std::vector<double>> p;
  for (const StepRecord& rec : log.records) {
    t.push_back(rec.t);
    r.push_back(rec.r.size() ? rec.r(0) : 0.0);
    y.push_back(rec.y.size() ? rec.y(0) : 0.0);
    u.push_back(rec.u.size() ? rec.u(0) : 0.0);
    if (p.size() < static_cast<std::size_t>(rec.p.size())) p.resize(static_cast<std::size_t>(rec.p.size()));
    for (Index i = 0; i < rec.p.size(); ++i) p[static_cast<std::size_t>(i)].push_back(rec.p(i));
  }
  const double height = kTop + 3 * kPanelHeight + 2 * kGap + 32.0;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << height << "\" viewBox=\"0 0 " << kWidth << " " << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">"
      << title << "</text>\n";
  panel(svg, kTop, "r, y", t, {{r, "#e6a800", ""}, {y, "#1f5fbf", ""}});
  panel(svg, kTop + kPanelHeight + kGap, "u", t, {{u, "#1f5fbf", ""}});
  std::vector<Series> ps;
  const char* colors[] = {"#1f5fbf", "#c0392b", "#27ae60", "#8e44ad"};
  for (std::size_t i = 0; i < p.size(); ++i) ps.push_back({p[i], colors[i % 4], i ? "4 3" : ""});
  panel(svg, kTop + 2 * (kPanelHeight + kGap), "p", t, ps);
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << height - 8
      << "\" font-size=\"11\" text-anchor=\"middle\">t</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace lpvdpc::bench
