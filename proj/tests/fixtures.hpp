// Golden action-table fixture shared by unit and acceptance tests.
#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef ACTIVETRACK_FIXTURE_DIR
#error "ACTIVETRACK_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace fixture {

struct TableRow {
  std::string space;
  std::string name;
  double virt_linear, virt_angular, real_linear, real_angular;
};

inline std::vector<TableRow> action_tables() {
  const std::string path = std::string(ACTIVETRACK_FIXTURE_DIR) + "/action_tables.csv";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing fixture " + path);
  std::vector<TableRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string f[6];
    for (auto& s : f) std::getline(ss, s, ',');
    rows.push_back({f[0], f[1], std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
  }
  return rows;
}

}  // namespace fixture
