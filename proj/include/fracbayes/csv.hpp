#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace fracbayes {

/// Minimal CSV table: one header row, numeric body, written with full
/// double precision so reruns are bit-comparable.
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd rows;  // one table row per matrix row

  int row_count() const { return static_cast<int>(rows.rows()); }
  int col(const std::string& name) const;  // -1 when absent
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

std::string format_double(double v);

/// FNV-1a 64-bit content hash, hex-encoded; used by run manifests.
std::string file_hash(const std::string& path);

}  // namespace fracbayes
