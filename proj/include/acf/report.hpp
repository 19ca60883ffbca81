#ifndef ACF_REPORT_HPP_
#define ACF_REPORT_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "acf/evaluation.hpp"

namespace acf {

// Fixed-point with six decimals and '.' regardless of locale.
std::string format_fixed6(double value);

// Columns split,epe,2pe,3pe,4pe,5pe,d1,pixels.
std::string metrics_csv(const std::vector<MetricReport>& reports);
std::vector<MetricReport> parse_metrics_csv(const std::string& text);

// Columns fraction,model,oracle,random.
std::string sparsification_csv(const SparsificationCurve& curve);
SparsificationCurve parse_sparsification_csv(const std::string& text);

void write_metrics_csv(const std::vector<MetricReport>& reports, const std::filesystem::path& path);
void write_sparsification_csv(const SparsificationCurve& curve, const std::filesystem::path& path);

}  // namespace acf

#endif  // ACF_REPORT_HPP_
