#include "nnse/tensor_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "nnse/error.hpp"

namespace nnse {

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

Tensor read_tensor_csv(const std::filesystem::path& path, const TensorShape& shape) {
  const std::string text = slurp(path);
  std::vector<double> values;
  values.reserve(shape.element_count());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find_first_of(",\n\r", pos);
    std::string_view field(text.data() + pos, (end == std::string::npos ? text.size() : end) - pos);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    if (!field.empty()) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw Error(ErrorCode::InvalidArgument, "bad number '" + std::string(field) + "' in " + path.string());
      }
      values.push_back(v);
    }
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  if (values.size() != shape.element_count()) {
    throw Error(ErrorCode::ShapeMismatch, path.string() + ": expected " + std::to_string(shape.element_count()) +
                                              " values for shape " + shape.to_string() + ", found " +
                                              std::to_string(values.size()));
  }
  return Tensor(shape, std::move(values));
}

std::string format_csv_row(std::span<const double> values) {
  std::string line;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) line += ',';
    line += format_double(values[i]);
  }
  return line;
}

void write_tensor_csv(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << format_csv_row(tensor.data()) << '\n';
}

std::vector<std::size_t> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::vector<std::size_t> labels;
  std::string line;
  while (std::getline(in, line)) {
    line.erase(std::remove_if(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\r' || c == '\t'; }),
               line.end());
    if (line.empty()) continue;
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc{} || ptr != line.data() + line.size()) {
      throw Error(ErrorCode::InvalidArgument, "bad label '" + line + "' in " + path.string());
    }
    labels.push_back(v);
  }
  return labels;
}

void write_labels(const std::filesystem::path& path, const std::vector<std::size_t>& labels) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (std::size_t l : labels) out << l << '\n';
}

std::vector<std::filesystem::path> list_csv_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::MissingFile, dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace nnse
