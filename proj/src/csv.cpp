#include "fracbayes/csv.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fracbayes {

int CsvTable::col(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  for (size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << table.header[i];
  out << "\n";
  for (int r = 0; r < table.rows.rows(); ++r) {
    for (int c = 0; c < table.rows.cols(); ++c)
      out << (c ? "," : "") << format_double(table.rows(r, c));
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);

  CsvTable table;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_csv: empty file " + path);
  std::stringstream hs(line);
  std::string tok;
  while (std::getline(hs, tok, ',')) table.header.push_back(tok);

  std::vector<std::vector<double>> body;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<double> row;
    while (std::getline(ls, tok, ',')) row.push_back(std::stod(tok));
    if (row.size() != table.header.size())
      throw std::runtime_error("read_csv: ragged row in " + path);
    body.push_back(std::move(row));
  }
  table.rows.resize(static_cast<int>(body.size()),
                    static_cast<int>(table.header.size()));
  for (size_t r = 0; r < body.size(); ++r)
    for (size_t c = 0; c < body[r].size(); ++c)
      table.rows(static_cast<int>(r), static_cast<int>(c)) = body[r][c];
  return table;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("file_hash: cannot open " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace fracbayes
