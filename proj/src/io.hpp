#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kflow {

// All writers go through a temp file + rename so readers never observe a
// partially written artifact.
void write_file_atomic(const std::string& path, const std::string& contents);
void write_binary_atomic(const std::string& path, const void* data, std::size_t bytes);

std::string read_file(const std::string& path);
std::vector<double> read_doubles(const std::string& path);

std::string fmt_g17(double v);

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows);

void ensure_directory(const std::string& path);

}  // namespace kflow
