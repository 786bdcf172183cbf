#include "mfe/records.hpp"

#include <cmath>
#include <cstdio>

#include "mfe/errors.hpp"

namespace mfe {

std::string format_double(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

void dump_into(const Record& j, std::string& out) {
  switch (j.type()) {
    case Record::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += Record(it.key()).dump();
        out += ':';
        dump_into(it.value(), out);
      }
      out += '}';
      break;
    }
    case Record::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        dump_into(j[i], out);
      }
      out += ']';
      break;
    }
    case Record::value_t::number_float:
      out += format_double(j.get<double>());
      break;
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_record(const Record& record) {
  std::string out;
  dump_into(record, out);
  return out;
}

Record record_header(const std::string& kind, const SphereGrid& grid) {
  Record r;
  r["schema"] = "mfe-lab";
  r["schema_version"] = kRecordSchemaVersion;
  r["kind"] = kind;
  r["grid"] = {{"bandlimit", grid.bandlimit()}, {"n_theta", grid.n_theta()}, {"n_phi", grid.n_phi()}};
  return r;
}

Record to_record(const Vec3& v) { return Record::array({v[0], v[1], v[2]}); }

RecordWriter::RecordWriter(const std::filesystem::path& path) : path_(path), out_(path) {
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
}

void RecordWriter::write(const Record& record) {
  const std::string line = dump_record(record);
  std::lock_guard lock(mutex_);
  out_ << line << '\n';
  out_.flush();
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : out_(path), columns_(header.size()) {
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw Error("csv row has the wrong number of columns");
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
  out_ << '\n';
}

void CsvWriter::row_numbers(const std::vector<double>& cells) {
  std::vector<std::string> s;
  s.reserve(cells.size());
  for (double x : cells) s.push_back(std::isfinite(x) ? format_double(x) : "nan");
  row(s);
}

}  // namespace mfe
