#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "nnse/tensor.hpp"

namespace nnse {

/// Reads comma-separated float64 values (newlines are also accepted as
/// separators) in row-major order of `shape`.
Tensor read_tensor_csv(const std::filesystem::path& path, const TensorShape& shape);

/// One line of comma-separated values printed with 17 significant digits.
void write_tensor_csv(const std::filesystem::path& path, const Tensor& tensor);
std::string format_csv_row(std::span<const double> values);

/// One non-negative integer per line.
std::vector<std::size_t> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<std::size_t>& labels);

/// All `*.csv` files of a directory, sorted by file name.
std::vector<std::filesystem::path> list_csv_files(const std::filesystem::path& dir);

/// Shortest decimal that round-trips the double.
std::string format_double(double value);

}  // namespace nnse
