#include "ice/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ice/core/error.hpp"

namespace ice::svg {

namespace {

constexpr double W = 640, H = 360, L = 56, R = 150, T = 36, B = 40;
constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

void open(std::ostringstream& o, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
}

void axes(std::ostringstream& o, double lo, double hi) {
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\""
    << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    const double y = H - B - (H - T - B) * i / 4.0;
    o << "<text x=\"" << L - 4 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << label(v) << "</text>\n";
  }
}

void legend(std::ostringstream& o, const std::vector<Series>& series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = T + 14.0 * static_cast<double>(i);
    o << "<rect x=\"" << W - R + 10 << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\""
      << palette[i % 6] << "\"/><text x=\"" << W - R + 24 << "\" y=\"" << y + 9 << "\">"
      << escape(series[i].first) << "</text>\n";
  }
}

std::pair<double, double> range(const std::vector<Series>& series, bool from_zero) {
  double lo = from_zero ? 0.0 : INFINITY, hi = from_zero ? 0.0 : -INFINITY;
  for (const auto& s : series)
    for (double v : s.second)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  if (!std::isfinite(lo)) lo = hi = 0.0;
  if (hi <= lo) hi = lo + 1.0;
  return {lo, hi};
}

}  // namespace

std::string line_chart(const std::string& title, const std::vector<Series>& series,
                       const std::vector<std::pair<double, std::string>>& marks) {
  std::size_t n = 0;
  for (const auto& s : series) n = std::max(n, s.second.size());
  const auto [lo, hi] = range(series, false);
  const double span = std::max<double>(1.0, static_cast<double>(n) - 1.0);
  const auto px = [&](double x) { return L + (W - L - R) * x / span; };
  const auto py = [&, lo = lo, hi = hi](double v) { return H - B - (H - T - B) * (v - lo) / (hi - lo); };
  std::ostringstream o;
  open(o, title);
  axes(o, lo, hi);
  for (const auto& [x, text] : marks)
    o << "<line x1=\"" << num(px(x)) << "\" y1=\"" << T << "\" x2=\"" << num(px(x)) << "\" y2=\"" << H - B
      << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/><text x=\"" << num(px(x) + 3) << "\" y=\"" << T + 10
      << "\" fill=\"gray\">" << escape(text) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    o << "<polyline fill=\"none\" stroke-width=\"1\" stroke=\"" << palette[i % 6] << "\" points=\"";
    const auto& v = series[i].second;
    for (std::size_t k = 0; k < v.size(); ++k)
      if (std::isfinite(v[k])) o << num(px(static_cast<double>(k))) << ',' << num(py(v[k])) << ' ';
    o << "\"/>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">step</text>\n";
  legend(o, series);
  o << "</svg>\n";
  return o.str();
}

std::string bar_chart(const std::string& title, const std::vector<std::string>& categories,
                      const std::vector<Series>& series) {
  for (const auto& s : series)
    require(s.second.size() == categories.size(), "bar_chart: one value per category");
  const auto [lo, hi] = range(series, true);
  const double group = (W - L - R) / std::max<double>(1.0, static_cast<double>(categories.size()));
  const double bar = group * 0.8 / std::max<double>(1.0, static_cast<double>(series.size()));
  const auto py = [&, lo = lo, hi = hi](double v) { return H - B - (H - T - B) * (v - lo) / (hi - lo); };
  std::ostringstream o;
  open(o, title);
  axes(o, lo, hi);
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double x0 = L + group * static_cast<double>(c) + group * 0.1;
    for (std::size_t i = 0; i < series.size(); ++i) {
      const double v = std::isfinite(series[i].second[c]) ? series[i].second[c] : 0.0;
      const double top = std::min(py(v), py(0.0)), h = std::abs(py(v) - py(0.0));
      o << "<rect x=\"" << num(x0 + bar * static_cast<double>(i)) << "\" y=\"" << num(top)
        << "\" width=\"" << num(bar) << "\" height=\"" << num(h) << "\" fill=\"" << palette[i % 6]
        << "\"><title>" << escape(series[i].first) << ": " << label(v) << "</title></rect>\n";
    }
    o << "<text x=\"" << num(x0 + group * 0.4) << "\" y=\"" << H - B + 14 << "\" text-anchor=\"middle\">"
      << escape(categories[c]) << "</text>\n";
  }
  legend(o, series);
  o << "</svg>\n";
  return o.str();
}

}  // namespace ice::svg
