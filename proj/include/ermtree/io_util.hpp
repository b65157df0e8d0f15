#pragma once
#include <string>
#include <vector>

namespace ermtree {

// shortest round-trip decimal form, locale independent (byte-stable reruns)
std::string format_double(double v);

// write to <path>.tmp.<pid> then rename into place
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// rows of already formatted fields -> CSV text with header
std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows);

} // namespace ermtree
