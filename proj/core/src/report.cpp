#include "ser/report.h"

#include <algorithm>
#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "ser/binary_io.h"
#include "ser/error.h"

namespace ser {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void require_records(const std::vector<RunRecord>& records) {
  if (records.empty()) throw Error("report needs at least one run record");
}

}  // namespace

std::string report_table(const std::vector<RunRecord>& records) {
  require_records(records);
  std::size_t width = 6;
  for (const auto& r : records) width = std::max(width, r.label.size());
  std::ostringstream os;
  os << pad("System", width) << "  " << pad("AvRec (%)", 15) << "  AvAUC\n";
  for (const auto& r : records) {
    const auto& a = r.aggregate;
    os << pad(r.label, width) << "  "
       << pad(fixed(100.0 * a.rec.median, 1) + " ± " + fixed(100.0 * a.rec.iqr(), 1), 15) << "  "
       << fixed(a.auc.median, 3) << " ± " << fixed(a.auc.iqr(), 3) << '\n';
  }
  return os.str();
}

std::string box_plot_json(const std::vector<RunRecord>& records) {
  require_records(records);
  auto box = [](const Summary& s, const std::vector<double>& raw) {
    nlohmann::ordered_json j;
    j["min"] = s.min;
    j["q1"] = s.q1;
    j["median"] = s.median;
    j["q3"] = s.q3;
    j["max"] = s.max;
    j["values"] = raw;
    return j;
  };
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["label"] = r.label;
    j["system"] = r.system;
    j["config_hash"] = r.config_hash;
    j["seeds"] = r.seeds;
    j["av_rec"] = box(r.aggregate.rec, r.aggregate.av_rec);
    j["av_auc"] = box(r.aggregate.auc, r.aggregate.av_auc);
    out.push_back(std::move(j));
  }
  return out.dump(2) + "\n";
}

std::string box_plot_svg(const std::vector<RunRecord>& records) {
  require_records(records);
  const double left = 60, top = 20, plot_h = 300, box_w = 40, gap = 40;
  const double plot_w = static_cast<double>(records.size()) * (box_w + gap) + gap;
  const double width = left + plot_w + 20, height = top + plot_h + 60;

  double lo = 1.0, hi = 0.0;
  for (const auto& r : records) {
    lo = std::min(lo, r.aggregate.auc.min);
    hi = std::max(hi, r.aggregate.auc.max);
  }
  lo = std::max(0.0, lo - 0.02);
  hi = std::min(1.0, hi + 0.02);
  if (hi - lo < 0.05) {
    const double mid = 0.5 * (hi + lo);
    lo = mid - 0.025;
    hi = mid + 0.025;
  }
  auto y = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width, 0) << "\" height=\"" << fixed(height, 0)
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << fixed(y(v) + 4, 1) << "\" text-anchor=\"end\">" << fixed(v, 3)
       << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << fixed(y(v), 1) << "\" x2=\"" << fixed(left + plot_w, 1) << "\" y2=\""
       << fixed(y(v), 1) << "\" stroke=\"#ddd\"/>\n";
  }
  os << "<text x=\"14\" y=\"" << fixed(top + plot_h / 2, 1) << "\" transform=\"rotate(-90 14 "
     << fixed(top + plot_h / 2, 1) << ")\" text-anchor=\"middle\">AvAUC</text>\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& s = records[i].aggregate.auc;
    const double x = left + gap + static_cast<double>(i) * (box_w + gap);
    const double cx = x + box_w / 2;
    os << "<g>\n";
    os << "<line x1=\"" << fixed(cx, 1) << "\" y1=\"" << fixed(y(s.max), 1) << "\" x2=\"" << fixed(cx, 1) << "\" y2=\""
       << fixed(y(s.min), 1) << "\" stroke=\"black\"/>\n";
    os << "<rect x=\"" << fixed(x, 1) << "\" y=\"" << fixed(y(s.q3), 1) << "\" width=\"" << box_w << "\" height=\""
       << fixed(std::max(0.5, y(s.q1) - y(s.q3)), 1) << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << fixed(x, 1) << "\" y1=\"" << fixed(y(s.median), 1) << "\" x2=\"" << fixed(x + box_w, 1)
       << "\" y2=\"" << fixed(y(s.median), 1) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << fixed(cx, 1) << "\" y=\"" << fixed(top + plot_h + 16, 1) << "\" text-anchor=\"middle\">"
       << xml_escape(records[i].label) << "</text>\n";
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_report(const std::vector<RunRecord>& records, const std::filesystem::path& out_dir) {
  io::write_file_atomic(out_dir / "report.txt", report_table(records));
  io::write_file_atomic(out_dir / "boxplot.json", box_plot_json(records));
  io::write_file_atomic(out_dir / "boxplot.svg", box_plot_svg(records));
}

}  // namespace ser
