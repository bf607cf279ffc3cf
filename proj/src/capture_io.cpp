#include <fstream>
#include <sstream>

#include "qadapose/errors.hpp"
#include "qadapose/keyvalue.hpp"
#include "qadapose/signals.hpp"

namespace qadapose {

std::filesystem::path capture_sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p += ".meta";
  return p;
}

void write_capture(const std::filesystem::path& csv_path, const QadaCapture& capture) {
  std::string csv = "index,v_sum,v_bt,v_lr\n";
  for (Eigen::Index i = 0; i < capture.sample_count(); ++i) {
    csv += std::to_string(i) + "," + format_double(capture.v_sum(i)) + "," + format_double(capture.v_bt(i)) +
           "," + format_double(capture.v_lr(i)) + "\n";
  }
  KeyValues meta;
  meta.set("sample_count", std::to_string(capture.sample_count()));
  meta.set("snr_db", format_double(capture.snr_db));
  meta.set("seed", std::to_string(capture.seed));
  meta.set("code_family", to_string(capture.family));
  meta.set("chip_length", std::to_string(capture.chip_length));
  meta.set("samples_per_chip", std::to_string(capture.samples_per_chip));
  meta.set("code_count", std::to_string(capture.code_count));
  meta.set("code_seed", std::to_string(capture.code_seed));
  write_file_atomic(csv_path, csv);
  write_file_atomic(capture_sidecar_path(csv_path), meta.serialize());
}

QadaCapture read_capture(const std::filesystem::path& csv_path) {
  const auto meta = KeyValues::load(capture_sidecar_path(csv_path));
  QadaCapture cap;
  const auto count = meta.get_int("sample_count");
  if (count <= 0) fail(ErrorKind::config, "key 'sample_count': must be positive");
  cap.snr_db = meta.get_double("snr_db");
  cap.seed = meta.get_u64("seed");
  cap.family = code_family_from_string(meta.get_string("code_family"));
  cap.chip_length = static_cast<int>(meta.get_int("chip_length"));
  cap.samples_per_chip = static_cast<int>(meta.get_int("samples_per_chip"));
  cap.code_count = static_cast<std::size_t>(meta.get_int("code_count"));
  cap.code_seed = meta.get_u64("code_seed");
  meta.reject_unknown();

  std::ifstream in(csv_path);
  if (!in) fail(ErrorKind::io, "cannot read '" + csv_path.string() + "'");
  std::string line;
  std::getline(in, line);
  if (line.rfind("index,v_sum,v_bt,v_lr", 0) != 0)
    fail(ErrorKind::config, csv_path.string() + ": unexpected header '" + line + "'");
  cap.v_sum.resize(count);
  cap.v_bt.resize(count);
  cap.v_lr.resize(count);
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= count) fail(ErrorKind::config, csv_path.string() + ": more rows than sample_count");
    std::stringstream ss(line);
    std::string cell[4];
    for (auto& c : cell)
      if (!std::getline(ss, c, ',')) fail(ErrorKind::config, csv_path.string() + ": short row");
    try {
      if (std::stoll(cell[0]) != row) fail(ErrorKind::config, csv_path.string() + ": index out of order");
      cap.v_sum(row) = std::stod(cell[1]);
      cap.v_bt(row) = std::stod(cell[2]);
      cap.v_lr(row) = std::stod(cell[3]);
    } catch (const std::logic_error&) {
      fail(ErrorKind::config, csv_path.string() + ": malformed number in row " + std::to_string(row));
    }
    ++row;
  }
  if (row != count) fail(ErrorKind::config, csv_path.string() + ": fewer rows than sample_count");
  return cap;
}

}  // namespace qadapose
