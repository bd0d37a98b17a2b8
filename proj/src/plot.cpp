#include "ecoroute/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ecoroute {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool empty() const { return !(lo <= hi); }
};

// Rounds the range outwards to a step from {1, 2, 5} x 10^k, about 5 ticks.
std::vector<double> nice_ticks(Range& r) {
  if (r.empty()) r = {0.0, 1.0};
  if (r.hi - r.lo < 1e-12 * std::max(1.0, std::abs(r.hi))) {
    const double pad = std::max(1e-3, 0.05 * std::abs(r.hi));
    r.lo -= pad;
    r.hi += pad;
  }
  const double raw = (r.hi - r.lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = 10.0 * mag;
  for (double m : {1.0, 2.0, 5.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  r.lo = std::floor(r.lo / step) * step;
  r.hi = std::ceil(r.hi / step) * step;
  std::vector<double> ticks;
  for (double t = r.lo; t <= r.hi + 0.5 * step; t += step)
    ticks.push_back(std::abs(t) < 1e-9 * step ? 0.0 : t);
  return ticks;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void append(PlotSeries& s, const std::vector<double>& x, const std::vector<double>& y,
            double y_scale = 1.0) {
  s.x.insert(s.x.end(), x.begin(), x.end());
  for (double v : y) s.y.push_back(v * y_scale);
}

void write(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string render_svg(const Chart& chart, int width, int height) {
  for (const auto& s : chart.series)
    if (s.x.size() != s.y.size())
      throw std::invalid_argument("render_svg: series '" + s.label + "' has mismatched x/y");

  const bool dual = !chart.y2_label.empty();
  const double left = 70, right = dual ? 70 : 20, top = 40, bottom = 55;
  const double pw = width - left - right, ph = height - top - bottom;

  Range rx, ry, ry2;
  for (const auto& s : chart.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      rx.add(s.x[i]);
      (s.right_axis && dual ? ry2 : ry).add(s.y[i]);
    }
  const auto tx = nice_ticks(rx), ty = nice_ticks(ry);
  const auto ty2 = dual ? nice_ticks(ry2) : std::vector<double>{};

  auto px = [&](double x) { return left + (x - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto py = [&](double y, const Range& r) { return top + (r.hi - y) / (r.hi - r.lo) * ph; };

  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(chart.title) << "</text>\n";

  for (double t : tx) {
    const double x = px(t);
    o << "<line x1=\"" << x << "\" y1=\"" << top << "\" x2=\"" << x << "\" y2=\"" << top + ph
      << "\" stroke=\"#e0e0e0\"/>\n<text x=\"" << x << "\" y=\"" << top + ph + 16
      << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  }
  for (double t : ty) {
    const double y = py(t, ry);
    o << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + pw << "\" y2=\"" << y
      << "\" stroke=\"#e0e0e0\"/>\n<text x=\"" << left - 6 << "\" y=\"" << y + 4
      << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
  }
  for (double t : ty2)
    o << "<text x=\"" << left + pw + 6 << "\" y=\"" << py(t, ry2) + 4 << "\">" << fmt(t)
      << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 12
    << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n"
    << "<text transform=\"translate(18," << top + ph / 2
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(chart.y_label) << "</text>\n";
  if (dual)
    o << "<text transform=\"translate(" << width - 14 << "," << top + ph / 2
      << ") rotate(90)\" text-anchor=\"middle\">" << escape(chart.y2_label) << "</text>\n";

  int legend = 0;
  for (const auto& s : chart.series) {
    const Range& r = s.right_axis && dual ? ry2 : ry;
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\"";
    if (s.dashed) o << " stroke-dasharray=\"6,4\"";
    o << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
        o << px(s.x[i]) << ',' << py(s.y[i], r) << ' ';
    o << "\"/>\n";
    if (s.label.empty()) continue;
    const double ly = top + 14 + 16 * legend++;
    o << "<line x1=\"" << left + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + 34
      << "\" y2=\"" << ly - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"2\""
      << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n<text x=\"" << left + 40
      << "\" y=\"" << ly << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

TripTimeline trip_timeline(const TripSolution& sol) {
  TripTimeline tl;
  double t = 0.0;
  for (std::size_t i = 0; i < sol.segments.size(); ++i) {
    const auto& d = sol.segments[i];
    std::vector<double> ts(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
      if (k > 0) t += 2.0 * (d.s[k] - d.s[k - 1]) / (d.v[k] + d.v[k - 1]);
      ts[k] = t;
    }
    tl.segment_t.push_back(std::move(ts));
    if (i < sol.charges.size()) {
      const auto& c = sol.charges[i];
      std::vector<double> tc(c.size());
      for (std::size_t j = 0; j < c.size(); ++j) tc[j] = t + c.tau[j] * c.t_chg;
      t += c.t_chg;
      tl.charge_t.push_back(std::move(tc));
    }
  }
  return tl;
}

std::vector<std::filesystem::path> write_trip_plots(const std::filesystem::path& dir,
                                                    const TripSolution& sol,
                                                    const Scenario* scn) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const Chart& c) {
    written.push_back(dir / name);
    write(written.back(), render_svg(c));
  };
  auto minutes = [](std::vector<double> t) {
    for (double& v : t) v /= 60.0;
    return t;
  };
  auto km = [](std::vector<double> s) {
    for (double& v : s) v /= 1000.0;
    return s;
  };

  {
    Chart c{"Speed profile", "Distance [km]", "Speed [km/h]", "", {}};
    PlotSeries v{"speed", {}, {}, "#1f77b4"};
    for (const auto& d : sol.segments) append(v, km(d.s), d.v, 3.6);
    if (scn) {
      const auto& pts = scn->road.points();
      PlotSeries lo{"speed limits", {}, {}, "#d62728", true};
      PlotSeries hi{"", {}, {}, "#d62728", true};
      PlotSeries alt{"altitude", {}, {}, "#7f7f7f", false, true};
      for (const auto& p : pts) {
        lo.x.push_back(p.s / 1000.0);
        lo.y.push_back(p.v_min * 3.6);
        hi.x.push_back(p.s / 1000.0);
        hi.y.push_back(p.v_max * 3.6);
        alt.x.push_back(p.s / 1000.0);
        alt.y.push_back(p.altitude);
      }
      c.y2_label = "Altitude [m]";
      c.series = {alt, lo, hi};
    }
    c.series.push_back(v);
    emit("speed.svg", c);
  }

  const auto tl = trip_timeline(sol);
  PlotSeries soc{"soc", {}, {}, "#2ca02c"}, tb{"battery temperature", {}, {}, "#ff7f0e"};
  PlotSeries pb{"battery P_b", {}, {}, "#1f77b4"}, pg{"grid P_grid", {}, {}, "#9467bd"};
  PlotSeries ph{"HVCH (battery)", {}, {}, "#d62728", false, true};
  PlotSeries pa{"HVAC", {}, {}, "#17becf", false, true};
  for (std::size_t i = 0; i < sol.segments.size(); ++i) {
    const auto& d = sol.segments[i];
    const auto t = minutes(tl.segment_t[i]);
    append(soc, t, d.soc);
    append(tb, t, d.t_b);
    append(pb, t, d.p_b, 1e-3);
    append(pg, t, std::vector<double>(d.size(), 0.0));
    append(ph, t, d.p_hvch, 1e-3);
    append(pa, t, d.p_hvac, 1e-3);
    if (i < sol.charges.size()) {
      const auto& ch = sol.charges[i];
      const auto tc = minutes(tl.charge_t[i]);
      append(soc, tc, ch.soc);
      append(tb, tc, ch.t_b);
      append(pb, tc, ch.p_b, 1e-3);
      append(pg, tc, ch.p_grid, 1e-3);
      append(ph, tc, ch.p_hvch, 1e-3);
      append(pa, tc, ch.p_hvac, 1e-3);
    }
  }
  emit("soc.svg", Chart{"State of charge", "Time [min]", "SoC [-]", "", {soc}});
  emit("battery_temperature.svg",
       Chart{"Battery temperature", "Time [min]", "Temperature [°C]", "", {tb}});
  emit("powers.svg", Chart{"Powers", "Time [min]", "Battery / grid power [kW]",
                           "Thermal power [kW]", {pb, pg, ph, pa}});
  return written;
}

}  // namespace ecoroute
