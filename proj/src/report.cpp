#include "acf/report.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "acf/data/image_io.hpp"
#include "acf/error.hpp"

namespace acf {
namespace {

constexpr const char* kMetricsHeader = "split,epe,2pe,3pe,4pe,5pe,d1,pixels";
constexpr const char* kSparsificationHeader = "fraction,model,oracle,random";

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (comma == std::string::npos) return out;
    pos = comma + 1;
  }
}

double parse_number(const std::string& field, std::size_t line) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw Error(errc::kFormat, "CSV line " + std::to_string(line) + ": bad number '" + field + "'");
  }
  return v;
}

// Splits into lines, checks the header, and returns the data rows with their line numbers.
std::vector<std::pair<std::size_t, std::vector<std::string>>> csv_rows(const std::string& text, const char* header,
                                                                        std::size_t columns) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw Error(errc::kFormat, std::string("CSV: expected header '") + header + "'");
  }
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_fields(line);
    if (fields.size() != columns) {
      throw Error(errc::kFormat, "CSV line " + std::to_string(n) + ": expected " + std::to_string(columns) +
                                     " fields, got " + std::to_string(fields.size()));
    }
    rows.emplace_back(n, std::move(fields));
  }
  return rows;
}

}  // namespace

std::string format_fixed6(double value) {
  if (!std::isfinite(value)) throw Error(errc::kDomain, "cannot format a non-finite value");
  if (value == 0.0) value = 0.0;  // drop the sign of negative zero
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, 6);
  if (ec != std::errc()) throw Error(errc::kDomain, "value too large to format");
  std::string s(buf, end);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string metrics_csv(const std::vector<MetricReport>& reports) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const MetricReport& r : reports) {
    out += to_string(r.split);
    out += "," + format_fixed6(r.epe);
    for (const double k : r.kpe) out += "," + format_fixed6(k);
    out += "," + format_fixed6(r.d1);
    out += "," + std::to_string(r.pixels) + "\n";
  }
  return out;
}

std::vector<MetricReport> parse_metrics_csv(const std::string& text) {
  std::vector<MetricReport> out;
  for (const auto& [line, f] : csv_rows(text, kMetricsHeader, 8)) {
    MetricReport r;
    r.split = parse_split(f[0]);
    r.epe = parse_number(f[1], line);
    for (std::size_t k = 0; k < 4; ++k) r.kpe[k] = parse_number(f[2 + k], line);
    r.d1 = parse_number(f[6], line);
    const double pixels = parse_number(f[7], line);
    if (pixels < 0.0 || pixels != std::floor(pixels)) {
      throw Error(errc::kFormat, "CSV line " + std::to_string(line) + ": pixel count must be a whole number");
    }
    r.pixels = static_cast<std::size_t>(pixels);
    out.push_back(r);
  }
  return out;
}

std::string sparsification_csv(const SparsificationCurve& curve) {
  const std::size_t n = curve.fractions.size();
  if (curve.model.size() != n || curve.oracle.size() != n || curve.random.size() != n) {
    throw Error(errc::kShape, "sparsification curve columns have different lengths");
  }
  std::string out = std::string(kSparsificationHeader) + "\n";
  for (std::size_t i = 0; i < n; ++i) {
    out += format_fixed6(curve.fractions[i]) + "," + format_fixed6(curve.model[i]) + "," +
           format_fixed6(curve.oracle[i]) + "," + format_fixed6(curve.random[i]) + "\n";
  }
  return out;
}

SparsificationCurve parse_sparsification_csv(const std::string& text) {
  SparsificationCurve c;
  for (const auto& [line, f] : csv_rows(text, kSparsificationHeader, 4)) {
    c.fractions.push_back(parse_number(f[0], line));
    c.model.push_back(parse_number(f[1], line));
    c.oracle.push_back(parse_number(f[2], line));
    c.random.push_back(parse_number(f[3], line));
  }
  return c;
}

void write_metrics_csv(const std::vector<MetricReport>& reports, const std::filesystem::path& path) {
  write_file(path, metrics_csv(reports));
}

void write_sparsification_csv(const SparsificationCurve& curve, const std::filesystem::path& path) {
  write_file(path, sparsification_csv(curve));
}

}  // namespace acf
