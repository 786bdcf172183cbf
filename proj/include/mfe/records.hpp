#pragma once

// Output records: one JSON object per line with doubles printed at 17 significant digits
// (so identical runs give identical bytes), plus flat CSV tables for plotting.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "mfe/sphere_grid.hpp"

namespace mfe {

using Record = nlohmann::ordered_json;

inline constexpr int kRecordSchemaVersion = 1;

/// "%.17g"; NaN and infinities become null.
std::string format_double(double x);

/// Compact serialization of a record in insertion order with format_double for floats.
std::string dump_record(const Record& record);

/// Header common to every record: schema, kind and grid parameters.
Record record_header(const std::string& kind, const SphereGrid& grid);

Record to_record(const Vec3& v);

/// Appends records to a file, one per line, from any thread.
class RecordWriter {
 public:
  explicit RecordWriter(const std::filesystem::path& path);
  void write(const Record& record);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mutex_;
};

/// Comma-separated table with a fixed header.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);
  void row(const std::vector<std::string>& cells);
  void row_numbers(const std::vector<double>& cells);

 private:
  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace mfe
