#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dkmc {

/// One line of the pricing report. Fixed schema, fixed column order,
/// C-locale numeric formatting.
struct ReportRow {
  std::string config_id;
  std::string model;
  std::string method;
  int d = 0;
  double s0 = 0.0;
  int paths = 0;
  int batches = 0;
  std::uint64_t seed = 0;
  double price = 0.0;
  double std_dev = 0.0;
  std::optional<double> benchmark;
  std::optional<double> rel_error_pct;
  double wall_time_s = 0.0;
};

inline constexpr const char* kReportHeader =
    "config,model,method,d,s0,paths,batches,seed,price,std,benchmark,rel_error_pct,wall_time_s";

void write_report_header(std::ostream& os);
void append_report_row(std::ostream& os, const ReportRow& row);

/// Sidecar per-batch log: config,batch,price.
void write_batch_prices(std::ostream& os, const std::string& config_id,
                        const std::vector<double>& prices, bool header);

struct SweepPoint {
  std::string value;
  double price = 0.0;
  std::optional<double> rel_error_pct;
  double wall_time_s = 0.0;
};

inline constexpr const char* kSweepHeader = "value,price,error,time";

void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& points);

std::string format_double(double v, int decimals);

}  // namespace dkmc
