#include "bprg/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bprg/error.hpp"

namespace bprg {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  // -0.000000 and 0.000000 must print identically.
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename T>
T parse_integer(std::string_view field, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty())
    throw FormatError("csv line " + std::to_string(line) + ": bad integer '" + std::string(field) + "'");
  return v;
}

double parse_real(std::string_view field, std::size_t line) {
  std::string s(field);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    throw FormatError("csv line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::string trajectory_csv(const std::vector<TrajectoryRecord>& records) {
  std::string out(kTrajectoryCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    out += to_string(r.phase);
    out += ',' + std::to_string(r.step);
    out += ',' + fixed(r.sparsity, 6);
    out += ',' + fixed(r.train_loss, 6);
    out += ',' + fixed(r.test_accuracy, 6);
    out += ',' + std::to_string(r.active_params);
    out += ',' + std::to_string(r.elapsed_ms);
    out += '\n';
  }
  return out;
}

std::vector<TrajectoryRecord> parse_trajectory_csv(std::string_view text) {
  std::vector<TrajectoryRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != kTrajectoryCsvHeader) throw FormatError("csv: unexpected header '" + std::string(line) + "'");
      continue;
    }
    if (line.empty()) continue;

    std::vector<std::string_view> f;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (f.size() != 7) throw FormatError("csv line " + std::to_string(line_no) + ": expected 7 fields");

    TrajectoryRecord r;
    r.phase = parse_phase(f[0]);
    r.step = parse_integer<std::size_t>(f[1], line_no);
    r.sparsity = parse_real(f[2], line_no);
    r.train_loss = parse_real(f[3], line_no);
    r.test_accuracy = parse_real(f[4], line_no);
    r.active_params = parse_integer<std::size_t>(f[5], line_no);
    r.elapsed_ms = parse_integer<std::int64_t>(f[6], line_no);
    records.push_back(r);
  }
  if (line_no == 0) throw FormatError("csv: empty file");
  return records;
}

void emit_trajectory_csv(const std::vector<TrajectoryRecord>& records, const std::filesystem::path& path) {
  if (records.empty()) throw UsageError("emit_trajectory_csv: no records");
  write_text(path, trajectory_csv(records));
}

std::vector<TrajectoryRecord> read_trajectory_csv(const std::filesystem::path& path) {
  return parse_trajectory_csv(read_text(path));
}

namespace {

constexpr double kWidth = 800, kHeight = 600;
constexpr double kLeft = 90, kRight = 40, kTop = 50, kBottom = 80;

struct Axis {
  double lo, hi;

  // Both plotted quantities are fractions, so the padded range stays inside [0, 1].
  static Axis fit(double lo, double hi) {
    if (hi - lo < 1e-9) {
      lo -= 0.05;
      hi += 0.05;
    }
    const double pad = (hi - lo) * 0.05;
    return {std::max(0.0, lo - pad), std::min(1.0, hi + pad)};
  }
  double frac(double v) const { return (v - lo) / (hi - lo); }
};

const char* phase_color(Phase p) {
  switch (p) {
    case Phase::pretrain: return "#2ca02c";
    case Phase::prune: return "#1f77b4";
    case Phase::regrow: return "#d62728";
  }
  return "#000000";
}

}  // namespace

std::string trajectory_svg(const std::vector<TrajectoryRecord>& records) {
  if (records.size() < 2) throw UsageError("emit_plot_svg: need at least 2 records");

  auto [smin, smax] = std::minmax_element(records.begin(), records.end(),
                                          [](const auto& a, const auto& b) { return a.sparsity < b.sparsity; });
  auto [amin, amax] = std::minmax_element(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.test_accuracy < b.test_accuracy;
  });
  const Axis xa = Axis::fit(smin->sparsity, smax->sparsity);
  const Axis ya = Axis::fit(amin->test_accuracy, amax->test_accuracy);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double s) { return kLeft + xa.frac(s) * pw; };
  auto py = [&](double a) { return kTop + (1.0 - ya.frac(a)) * ph; };
  auto n2 = [](double v) { return fixed(v, 2); };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"800\" height=\"600\" "
        "viewBox=\"0 0 800 600\">\n"
     << "<title>Accuracy vs. sparsity</title>\n"
     << "<g font-family=\"sans-serif\" font-size=\"12\">\n";

  // Axes and ticks.
  const double x0 = kLeft, x1 = kLeft + pw, y0 = kTop + ph, y1 = kTop;
  os << "<line class=\"axis\" x1=\"" << n2(x0) << "\" y1=\"" << n2(y0) << "\" x2=\"" << n2(x1) << "\" y2=\""
     << n2(y0) << "\" stroke=\"#000\"/>\n";
  os << "<line class=\"axis\" x1=\"" << n2(x0) << "\" y1=\"" << n2(y0) << "\" x2=\"" << n2(x0) << "\" y2=\""
     << n2(y1) << "\" stroke=\"#000\"/>\n";
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double sv = xa.lo + (xa.hi - xa.lo) * i / kTicks;
    const double x = px(sv);
    os << "<line class=\"tick\" x1=\"" << n2(x) << "\" y1=\"" << n2(y0) << "\" x2=\"" << n2(x) << "\" y2=\""
       << n2(y0 + 6) << "\" stroke=\"#000\"/>\n";
    os << "<text x=\"" << n2(x) << "\" y=\"" << n2(y0 + 22) << "\" text-anchor=\"middle\">" << fixed(sv, 4)
       << "</text>\n";
    const double av = ya.lo + (ya.hi - ya.lo) * i / kTicks;
    const double y = py(av);
    os << "<line class=\"tick\" x1=\"" << n2(x0 - 6) << "\" y1=\"" << n2(y) << "\" x2=\"" << n2(x0) << "\" y2=\""
       << n2(y) << "\" stroke=\"#000\"/>\n";
    os << "<text x=\"" << n2(x0 - 10) << "\" y=\"" << n2(y + 4) << "\" text-anchor=\"end\">" << fixed(av, 4)
       << "</text>\n";
  }
  os << "<text x=\"" << n2(kLeft + pw / 2) << "\" y=\"" << n2(kHeight - 30)
     << "\" text-anchor=\"middle\" font-size=\"14\">Sparsity</text>\n";
  os << "<text x=\"20\" y=\"" << n2(kTop + ph / 2) << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 20 "
     << n2(kTop + ph / 2) << ")\">Test accuracy</text>\n";
  os << "<text x=\"" << n2(kLeft + pw / 2) << "\" y=\"30\" text-anchor=\"middle\" font-size=\"16\">"
     << "Accuracy vs. sparsity</text>\n";

  // One polyline per phase, then markers on top.
  for (Phase phase : {Phase::pretrain, Phase::prune, Phase::regrow}) {
    std::string pts;
    for (const auto& r : records)
      if (r.phase == phase) pts += (pts.empty() ? "" : " ") + n2(px(r.sparsity)) + "," + n2(py(r.test_accuracy));
    if (pts.empty()) continue;
    os << "<polyline class=\"trace " << to_string(phase) << "\" fill=\"none\" stroke=\"" << phase_color(phase)
       << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
  }
  for (const auto& r : records) {
    const double x = px(r.sparsity), y = py(r.test_accuracy);
    const char* color = phase_color(r.phase);
    switch (r.phase) {
      case Phase::pretrain:
        os << "<circle class=\"marker pretrain\" cx=\"" << n2(x) << "\" cy=\"" << n2(y) << "\" r=\"6\" fill=\""
           << color << "\" stroke=\"#000\"/>\n";
        break;
      case Phase::prune:
        os << "<rect class=\"marker prune\" x=\"" << n2(x - 5) << "\" y=\"" << n2(y - 5)
           << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
        break;
      case Phase::regrow:
        os << "<polygon class=\"marker regrow\" points=\"" << n2(x) << "," << n2(y - 6) << " " << n2(x - 6) << ","
           << n2(y + 5) << " " << n2(x + 6) << "," << n2(y + 5) << "\" fill=\"" << color << "\"/>\n";
        break;
    }
  }

  // Legend (text only, so marker elements map one-to-one onto records).
  double ly = kTop + 10;
  for (Phase phase : {Phase::pretrain, Phase::prune, Phase::regrow}) {
    const char* label = phase == Phase::pretrain ? "pretrained (circle)"
                        : phase == Phase::prune  ? "pruned (square)"
                                                 : "regrown (triangle)";
    os << "<text x=\"" << n2(x1 - 10) << "\" y=\"" << n2(ly) << "\" text-anchor=\"end\" fill=\""
       << phase_color(phase) << "\">" << label << "</text>\n";
    ly += 16;
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

void emit_plot_svg(const std::vector<TrajectoryRecord>& records, const std::filesystem::path& path) {
  write_text(path, trajectory_svg(records));
}

}  // namespace bprg
