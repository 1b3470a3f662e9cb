#include "dkmc/report.hpp"

#include <cstdio>

namespace dkmc {

std::string format_double(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

void write_report_header(std::ostream& os) { os << kReportHeader << "\n"; }

void append_report_row(std::ostream& os, const ReportRow& row) {
  os << row.config_id << ',' << row.model << ',' << row.method << ',' << row.d << ','
     << format_double(row.s0, 4) << ',' << row.paths << ',' << row.batches << ',' << row.seed
     << ',' << format_double(row.price, 6) << ',' << format_double(row.std_dev, 6) << ',';
  if (row.benchmark) os << format_double(*row.benchmark, 6);
  os << ',';
  if (row.rel_error_pct) os << format_double(*row.rel_error_pct, 4);
  os << ',' << format_double(row.wall_time_s, 3) << "\n";
}

void write_batch_prices(std::ostream& os, const std::string& config_id,
                        const std::vector<double>& prices, bool header) {
  if (header) os << "config,batch,price\n";
  for (std::size_t i = 0; i < prices.size(); ++i)
    os << config_id << ',' << i << ',' << format_double(prices[i], 6) << "\n";
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& points) {
  os << kSweepHeader << "\n";
  for (const auto& p : points) {
    os << p.value << ',' << format_double(p.price, 6) << ',';
    if (p.rel_error_pct) os << format_double(*p.rel_error_pct, 4);
    os << ',' << format_double(p.wall_time_s, 3) << "\n";
  }
}

}  // namespace dkmc
