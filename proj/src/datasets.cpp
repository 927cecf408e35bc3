#include "cimrel/datasets.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <vector>

#include "cimrel/error.hpp"
#include "cimrel/json_io.hpp"
#include "cimrel/rng.hpp"

namespace cimrel {

Dataset gen_dataset(std::string_view kind, std::size_t n, double noise, std::uint64_t seed) {
  if (n < 4) throw Error("gen_dataset: n must be >= 4");
  if (!(noise >= 0.0)) throw Error("gen_dataset: noise must be >= 0");
  Rng rng(seed);
  Tensor x = Tensor::matrix(n, 2);
  std::vector<int> t(n);
  std::size_t classes = 2;

  if (kind == "blobs") {
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<int>(i % 2);
      x(i, 0) = (t[i] == 0 ? -1.0 : 1.0) + noise * rng.normal();
      x(i, 1) = noise * rng.normal();
    }
  } else if (kind == "moons") {
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<int>(i % 2);
      const double a = std::numbers::pi * rng.uniform();
      if (t[i] == 0) {
        x(i, 0) = std::cos(a);
        x(i, 1) = std::sin(a);
      } else {
        x(i, 0) = 1.0 - std::cos(a);
        x(i, 1) = 0.5 - std::sin(a);
      }
      x(i, 0) += noise * rng.normal();
      x(i, 1) += noise * rng.normal();
    }
  } else if (kind == "xor_grid") {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t cell = i % 4;
      const double cx = (cell & 1U) ? 1.0 : -1.0;
      const double cy = (cell & 2U) ? 1.0 : -1.0;
      t[i] = (cx > 0) != (cy > 0) ? 1 : 0;
      x(i, 0) = cx + noise * rng.normal();
      x(i, 1) = cy + noise * rng.normal();
    }
  } else {
    throw Error("unknown dataset kind '" + std::string(kind) + "' (known: blobs, moons, xor_grid)");
  }
  return Dataset::make(std::move(x), std::move(t), classes);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw FormatError("csv line " + std::to_string(line) + ": " + msg);
}

}  // namespace

Dataset parse_csv_dataset(std::string_view text, const CsvOptions& opts) {
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0;
  std::size_t line_no = 0;
  bool skipped_header = !opts.header;

  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }

    std::vector<std::string_view> fields;
    for (std::size_t start = 0;;) {
      const auto comma = line.find(',', start);
      fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 2) fail(line_no, "need a label and at least one feature");
    if (width == 0) width = fields.size() - 1;
    if (fields.size() - 1 != width) {
      fail(line_no, "expected " + std::to_string(width) + " features, found " + std::to_string(fields.size() - 1));
    }

    int label = 0;
    const auto lf = fields[0];
    auto [lp, lec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (lec != std::errc() || lp != lf.data() + lf.size() || label < 0) {
      fail(line_no, "label '" + std::string(lf) + "' is not a non-negative integer");
    }
    if (opts.num_classes > 0 && static_cast<std::size_t>(label) >= opts.num_classes) {
      fail(line_no, "label " + std::to_string(label) + " >= number of classes " + std::to_string(opts.num_classes));
    }
    labels.push_back(label);
    for (std::size_t f = 1; f < fields.size(); ++f) {
      double v = 0.0;
      const auto s = fields[f];
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
        fail(line_no, "field " + std::to_string(f + 1) + " '" + std::string(s) + "' is not a finite number");
      }
      values.push_back(v);
    }
  }
  if (labels.empty()) throw FormatError("csv: no data rows");

  std::size_t classes = opts.num_classes;
  if (classes == 0) {
    int max_label = 0;
    for (int l : labels) max_label = std::max(max_label, l);
    classes = static_cast<std::size_t>(max_label) + 1;
  }
  const std::size_t rows = labels.size();
  return Dataset::make(Tensor({rows, width}, std::move(values)), std::move(labels), classes);
}

Dataset load_csv_dataset(const std::filesystem::path& path, const CsvOptions& opts) {
  return parse_csv_dataset(read_text_file(path), opts);
}

std::string dataset_csv(const Dataset& data, bool header) {
  std::string out;
  if (header) {
    out += "label";
    for (std::size_t f = 0; f < data.dim(); ++f) out += ",f" + std::to_string(f + 1);
    out += "\n";
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += std::to_string(data.targets[i]);
    for (double v : data.inputs.row(i)) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

void save_csv_dataset(const std::filesystem::path& path, const Dataset& data, bool header) {
  write_text_file(path, dataset_csv(data, header));
}

}  // namespace cimrel
