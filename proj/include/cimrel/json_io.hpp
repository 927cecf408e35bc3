#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace cimrel {

using Json = nlohmann::json;

/// "%.17g": lossless decimal form of a finite double.
std::string format_double(double v);

/// Deterministic JSON text: keys sorted, floats with 17 significant digits,
/// arrays of scalars kept on one line. Ends with a newline.
std::string dump_json(const Json& value);

Json parse_json(std::string_view text, std::string_view what);
Json read_json_file(const std::filesystem::path& path);

/// Writes `content` to `path` via a temporary file and rename.
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Short digest of a vector of doubles (bit patterns, not decimal text).
std::string digest_doubles(std::span<const double> values);

}  // namespace cimrel
