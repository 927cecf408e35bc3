#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "cimrel/nn.hpp"

namespace cimrel {

/// Two-dimensional toy problems. Labels cycle through the classes, so
/// every generator is class-balanced within one sample.
///   blobs    : 2 classes, centres (-1, 0) and (+1, 0)
///   moons    : 2 interleaved half circles
///   xor_grid : 4 clusters at (+-1, +-1), label = sign(x) != sign(y)
/// `noise` is the std of isotropic Gaussian jitter.
Dataset gen_dataset(std::string_view kind, std::size_t n, double noise, std::uint64_t seed);

struct CsvOptions {
  bool header = false;
  std::size_t num_classes = 0;  // 0 = max label + 1
};

/// Rows of `label,f1,...,fd`. Errors carry the 1-based line number.
Dataset load_csv_dataset(const std::filesystem::path& path, const CsvOptions& opts = {});
Dataset parse_csv_dataset(std::string_view text, const CsvOptions& opts = {});

std::string dataset_csv(const Dataset& data, bool header = false);
void save_csv_dataset(const std::filesystem::path& path, const Dataset& data, bool header = false);

}  // namespace cimrel
