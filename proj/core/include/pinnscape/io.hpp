#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace pinnscape::io {

using nlohmann::json;

/// Version stamped into every manifest, sidecar and CSV written here.
inline constexpr int kSchemaVersion = 1;

/// 16 hex digits of FNV-1a over the compact dump of `config` (keys sorted).
std::string config_hash(const json& config);

/// A raw little-endian array file plus its JSON sidecar.
struct ArrayFile {
  std::vector<std::int64_t> shape;
  std::string dtype;            // "float64" or "uint8"
  std::vector<double> values;   // row-major, converted to double
  json meta;
};

/// Reads name.bin via its sidecar name.json; throws on an unknown schema
/// version or a size mismatch.
ArrayFile read_array(const std::filesystem::path& sidecar);

/// Reads a CSV written by RunDirectory::write_csv.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

/// Output directory of one experiment. Files are written to a staging
/// directory that replaces `target` only on commit(), so a failed run leaves
/// nothing at the target path.
class RunDirectory {
 public:
  /// Throws std::runtime_error when `target` exists and is not empty.
  explicit RunDirectory(std::filesystem::path target);
  ~RunDirectory();
  RunDirectory(const RunDirectory&) = delete;
  RunDirectory& operator=(const RunDirectory&) = delete;

  const std::filesystem::path& target() const { return target_; }

  /// Row-major float64 matrix.
  void write_array(const std::string& name, const Eigen::MatrixXd& m, const json& meta = json::object());
  void write_vector(const std::string& name, const std::vector<double>& v, const json& meta = json::object());
  void write_vector(const std::string& name, const Eigen::VectorXd& v, const json& meta = json::object());
  /// Row-major float64 array of any rank; values.size() must match the shape.
  void write_tensor(const std::string& name, const std::vector<double>& values, const std::vector<std::int64_t>& shape,
                    const json& meta = json::object());
  void write_mask(const std::string& name, const std::vector<std::uint8_t>& mask, std::int64_t rows,
                  std::int64_t cols, const json& meta = json::object());
  /// Column-oriented table; every column must have the same length.
  void write_csv(const std::string& name, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& columns);
  void write_json(const std::string& name, const json& doc);

  /// Writes manifest.json (with schema_version and the list of files) and
  /// moves the directory into place.
  void commit(json manifest);

 private:
  void add_raw(const std::string& name, const void* data, std::size_t bytes, const std::vector<std::int64_t>& shape,
               const std::string& dtype, const json& meta);
  void record(const std::string& file, const std::string& kind, const json& extra = json::object());

  std::filesystem::path target_;
  std::filesystem::path staging_;
  json files_ = json::array();
  bool committed_ = false;
};

/// Fixed-format rendering used for CSV cells: shortest round-trip text,
/// "nan"/"inf"/"-inf" for non-finite values.
std::string format_double(double v);

}  // namespace pinnscape::io
