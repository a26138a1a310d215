#include "pinnscape/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pinnscape::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "array files are written in native (little-endian) order");

std::string config_hash(const json& config) {
  const std::string text = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

namespace {

void check_version(const json& doc, const fs::path& where) {
  if (!doc.contains("schema_version") || doc["schema_version"] != kSchemaVersion) {
    throw std::runtime_error("unsupported schema version in " + where.string());
  }
}

double parse_cell(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::runtime_error("bad CSV cell: " + s);
  return v;
}

void check_name(const std::string& name) {
  if (name.empty() || name.find('/') != std::string::npos || name.find("..") != std::string::npos) {
    throw std::invalid_argument("invalid output file name: " + name);
  }
}

}  // namespace

ArrayFile read_array(const fs::path& sidecar) {
  std::ifstream in(sidecar);
  if (!in) throw std::runtime_error("cannot open " + sidecar.string());
  const json meta = json::parse(in);
  check_version(meta, sidecar);
  ArrayFile a;
  a.shape = meta.at("shape").get<std::vector<std::int64_t>>();
  a.dtype = meta.at("dtype").get<std::string>();
  if (meta.at("byte_order") != "little" || meta.at("order") != "row-major") {
    throw std::runtime_error("unsupported array layout in " + sidecar.string());
  }
  a.meta = meta;
  std::size_t count = 1;
  for (auto d : a.shape) count *= static_cast<std::size_t>(d);
  const fs::path data = sidecar.parent_path() / meta.at("data").get<std::string>();
  std::ifstream bin(data, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + data.string());
  a.values.resize(count);
  if (a.dtype == "float64") {
    bin.read(reinterpret_cast<char*>(a.values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  } else if (a.dtype == "uint8") {
    std::vector<std::uint8_t> raw(count);
    bin.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    for (std::size_t i = 0; i < count; ++i) a.values[i] = raw[i];
  } else {
    throw std::runtime_error("unsupported dtype " + a.dtype);
  }
  if (!bin || bin.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("array size does not match its sidecar: " + data.string());
  }
  return a;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "# schema_version=" + std::to_string(kSchemaVersion)) {
    throw std::runtime_error("unsupported schema version in " + path.string());
  }
  CsvTable t;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  std::getline(in, line);
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& c : split(line)) row.push_back(parse_cell(c));
    if (row.size() != t.header.size()) throw std::runtime_error("ragged CSV row in " + path.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

RunDirectory::RunDirectory(fs::path target) : target_(std::move(target)) {
  if (fs::exists(target_) && !(fs::is_directory(target_) && fs::is_empty(target_))) {
    throw std::runtime_error("output directory exists and is not empty: " + target_.string());
  }
  staging_ = target_;
  staging_ += ".partial";
  fs::remove_all(staging_);
  fs::create_directories(staging_);
}

RunDirectory::~RunDirectory() {
  if (!committed_) {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
}

void RunDirectory::record(const std::string& file, const std::string& kind, const json& extra) {
  json entry = {{"file", file}, {"kind", kind}};
  entry.update(extra);
  files_.push_back(std::move(entry));
}

void RunDirectory::add_raw(const std::string& name, const void* data, std::size_t bytes,
                           const std::vector<std::int64_t>& shape, const std::string& dtype, const json& meta) {
  check_name(name);
  {
    std::ofstream out(staging_ / (name + ".bin"), std::ios::binary);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw std::runtime_error("failed to write " + name + ".bin");
  }
  json side = {{"schema_version", kSchemaVersion}, {"data", name + ".bin"}, {"dtype", dtype},
               {"byte_order", "little"}, {"order", "row-major"}, {"shape", shape}};
  if (!meta.empty()) side["meta"] = meta;
  std::ofstream out(staging_ / (name + ".json"));
  out << side.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed to write " + name + ".json");
  record(name + ".json", "array", {{"data", name + ".bin"}, {"shape", shape}, {"dtype", dtype}});
}

void RunDirectory::write_array(const std::string& name, const Eigen::MatrixXd& m, const json& meta) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  add_raw(name, rm.data(), static_cast<std::size_t>(rm.size()) * sizeof(double), {m.rows(), m.cols()}, "float64",
          meta);
}

void RunDirectory::write_vector(const std::string& name, const std::vector<double>& v, const json& meta) {
  add_raw(name, v.data(), v.size() * sizeof(double), {static_cast<std::int64_t>(v.size())}, "float64", meta);
}

void RunDirectory::write_vector(const std::string& name, const Eigen::VectorXd& v, const json& meta) {
  add_raw(name, v.data(), static_cast<std::size_t>(v.size()) * sizeof(double), {v.size()}, "float64", meta);
}

void RunDirectory::write_tensor(const std::string& name, const std::vector<double>& values,
                                const std::vector<std::int64_t>& shape, const json& meta) {
  std::int64_t count = 1;
  for (auto d : shape) count *= d;
  if (count != static_cast<std::int64_t>(values.size())) throw std::invalid_argument("tensor shape mismatch");
  add_raw(name, values.data(), values.size() * sizeof(double), shape, "float64", meta);
}

void RunDirectory::write_mask(const std::string& name, const std::vector<std::uint8_t>& mask, std::int64_t rows,
                              std::int64_t cols, const json& meta) {
  if (static_cast<std::int64_t>(mask.size()) != rows * cols) throw std::invalid_argument("mask shape mismatch");
  add_raw(name, mask.data(), mask.size(), {rows, cols}, "uint8", meta);
}

void RunDirectory::write_csv(const std::string& name, const std::vector<std::string>& header,
                             const std::vector<std::vector<double>>& columns) {
  check_name(name);
  if (header.size() != columns.size()) throw std::invalid_argument("CSV header/column count mismatch");
  const std::size_t rows = columns.empty() ? 0 : columns[0].size();
  for (const auto& c : columns) {
    if (c.size() != rows) throw std::invalid_argument("CSV columns differ in length");
  }
  std::ofstream out(staging_ / (name + ".csv"));
  out << "# schema_version=" << kSchemaVersion << '\n';
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << format_double(columns[j][i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed to write " + name + ".csv");
  record(name + ".csv", "csv", {{"rows", rows}, {"columns", header}});
}

void RunDirectory::write_json(const std::string& name, const json& doc) {
  check_name(name);
  json d = doc;
  d["schema_version"] = kSchemaVersion;
  std::ofstream out(staging_ / (name + ".json"));
  out << d.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed to write " + name + ".json");
  record(name + ".json", "json");
}

void RunDirectory::commit(json manifest) {
  manifest["schema_version"] = kSchemaVersion;
  manifest["files"] = files_;
  {
    std::ofstream out(staging_ / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed to write manifest.json");
  }
  if (fs::exists(target_)) fs::remove(target_);
  if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
  fs::rename(staging_, target_);
  committed_ = true;
}

}  // namespace pinnscape::io
