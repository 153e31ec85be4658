#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oodkit/common.hpp"
#include "oodkit/matrix.hpp"
#include "oodkit/rng.hpp"

namespace oodkit {

// Labeled feature matrix. Labels live in [0, num_known_classes] where index
// num_known_classes is reserved for the abstention class. Pure outlier sets
// (ring, box, unlabeled CSV) carry num_known_classes == 0 with every label 0,
// i.e. already "abstain"; callers relabel to a concrete K as needed.
struct Dataset {
  Matrix X;
  std::vector<std::size_t> y;
  std::size_t num_known_classes = 0;
  std::string name;
  // Valid value range of the raw feature space, when the source declares one
  // (IDX pixels are [0,1]). Dropped by standardization.
  std::optional<std::array<double, 2>> value_bounds;

  std::size_t size() const { return X.rows; }
  std::size_t dim() const { return X.cols; }
  std::size_t abstain_index() const { return num_known_classes; }

  void validate() const {
    if (X.rows == 0) throw SpecError("dataset '" + name + "': empty");
    if (y.size() != X.rows)
      throw ShapeError("dataset '" + name + "': " + std::to_string(y.size()) + " labels for " +
                       std::to_string(X.rows) + " rows");
    for (std::size_t lab : y)
      if (lab > num_known_classes)
        throw IndexError("dataset '" + name + "': label " + std::to_string(lab) +
                         " exceeds abstention index " + std::to_string(num_known_classes));
    if (!X.all_finite()) throw NumericError("dataset '" + name + "': non-finite features");
  }
};

enum class SyntheticKind { gaussian_clusters, uniform_box, ring };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::gaussian_clusters;
  // gaussian_clusters: one mean per cluster; scales has one entry per cluster
  // or a single broadcast entry.
  std::vector<std::vector<double>> means;
  std::vector<double> scales;
  // uniform_box: per-dimension bounds.
  std::vector<double> box_lo, box_hi;
  // ring: 2-D annulus around center (origin when empty).
  double r_inner = 0.0, r_outer = 0.0;
  std::vector<double> center;

  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string name = "synthetic";

  void validate() const {
    if (n == 0) throw SpecError("synthetic spec '" + name + "': n must be positive");
    switch (kind) {
      case SyntheticKind::gaussian_clusters: {
        if (means.empty()) throw SpecError("gaussian_clusters: no cluster means");
        const std::size_t d = means.front().size();
        if (d == 0) throw SpecError("gaussian_clusters: zero-dimensional means");
        for (const auto& m : means)
          if (m.size() != d) throw SpecError("gaussian_clusters: means of mixed dimension");
        if (scales.empty()) throw SpecError("gaussian_clusters: no scales");
        if (scales.size() != 1 && scales.size() != means.size())
          throw SpecError("gaussian_clusters: scales must have 1 or one-per-cluster entries");
        for (double s : scales)
          if (!(s > 0.0)) throw SpecError("gaussian_clusters: scale must be > 0");
        break;
      }
      case SyntheticKind::uniform_box: {
        if (box_lo.empty() || box_lo.size() != box_hi.size())
          throw SpecError("uniform_box: lo/hi bounds missing or mismatched");
        for (std::size_t i = 0; i < box_lo.size(); ++i)
          if (!(box_lo[i] < box_hi[i])) throw SpecError("uniform_box: lo must be < hi per dimension");
        break;
      }
      case SyntheticKind::ring: {
        if (!(r_inner >= 0.0 && r_inner < r_outer))
          throw SpecError("ring: need 0 <= r_inner < r_outer");
        if (!center.empty() && center.size() != 2)
          throw SpecError("ring: center must be 2-D");
        break;
      }
    }
  }
};

inline Dataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Dataset d;
  d.name = spec.name;
  RngEngine eng(spec.seed);
  switch (spec.kind) {
    case SyntheticKind::gaussian_clusters: {
      const std::size_t k = spec.means.size();
      const std::size_t dim = spec.means.front().size();
      d.X = Matrix(spec.n, dim);
      d.y.resize(spec.n);
      d.num_known_classes = k;
      // Round-robin assignment keeps cluster sizes within 1 of each other.
      for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t c = i % k;
        const double scale = spec.scales.size() == 1 ? spec.scales[0] : spec.scales[c];
        double* row = d.X.row_ptr(i);
        for (std::size_t j = 0; j < dim; ++j)
          row[j] = spec.means[c][j] + scale * normal01(eng);
        d.y[i] = c;
      }
      break;
    }
    case SyntheticKind::uniform_box: {
      const std::size_t dim = spec.box_lo.size();
      d.X = Matrix(spec.n, dim);
      d.y.assign(spec.n, 0);
      d.num_known_classes = 0;
      for (std::size_t i = 0; i < spec.n; ++i) {
        double* row = d.X.row_ptr(i);
        for (std::size_t j = 0; j < dim; ++j)
          row[j] = uniform_range(eng, spec.box_lo[j], spec.box_hi[j]);
      }
      break;
    }
    case SyntheticKind::ring: {
      const double cx = spec.center.empty() ? 0.0 : spec.center[0];
      const double cy = spec.center.empty() ? 0.0 : spec.center[1];
      d.X = Matrix(spec.n, 2);
      d.y.assign(spec.n, 0);
      d.num_known_classes = 0;
      const double r2_in = spec.r_inner * spec.r_inner;
      const double r2_out = spec.r_outer * spec.r_outer;
      for (std::size_t i = 0; i < spec.n; ++i) {
        // Area-uniform radius, uniform angle.
        const double r = std::sqrt(uniform_range(eng, r2_in, r2_out));
        const double theta = uniform_range(eng, 0.0, 6.283185307179586476925286766559);
        d.X(i, 0) = cx + r * std::cos(theta);
        d.X(i, 1) = cy + r * std::sin(theta);
      }
      break;
    }
  }
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// IDX loader. Big-endian; magic 0x00000803 for u8 images [n, h, w] and
// 0x00000801 for u8 labels [n]. Pixels are scaled to [0,1] and each image is
// flattened row-major into one feature row.
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_u32_be(std::ifstream& f, const std::string& path, std::size_t offset) {
  unsigned char buf[4];
  f.read(reinterpret_cast<char*>(buf), 4);
  if (f.gcount() != 4)
    throw FormatError(path + ": truncated at byte " + std::to_string(offset));
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace detail

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels_path);

  const std::uint32_t img_magic = detail::read_u32_be(img, images_path, 0);
  if (img_magic != 0x00000803u)
    throw FormatError(images_path + ": bad magic at byte 0 (expected 0x00000803, got 0x" +
                      [&] { std::ostringstream o; o << std::hex << img_magic; return o.str(); }() + ")");
  const std::uint32_t n_img = detail::read_u32_be(img, images_path, 4);
  const std::uint32_t h = detail::read_u32_be(img, images_path, 8);
  const std::uint32_t w = detail::read_u32_be(img, images_path, 12);

  const std::uint32_t lab_magic = detail::read_u32_be(lab, labels_path, 0);
  if (lab_magic != 0x00000801u)
    throw FormatError(labels_path + ": bad magic at byte 0 (expected 0x00000801)");
  const std::uint32_t n_lab = detail::read_u32_be(lab, labels_path, 4);
  if (n_img != n_lab)
    throw FormatError(images_path + ": " + std::to_string(n_img) + " images vs " +
                      std::to_string(n_lab) + " labels in " + labels_path);
  if (n_img == 0) throw FormatError(images_path + ": zero images");

  const std::size_t dim = std::size_t(h) * std::size_t(w);
  Dataset d;
  d.X = Matrix(n_img, dim);
  d.y.resize(n_img);
  d.value_bounds = std::array<double, 2>{0.0, 1.0};

  std::vector<unsigned char> buf(dim);
  for (std::uint32_t i = 0; i < n_img; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim));
    if (img.gcount() != static_cast<std::streamsize>(dim))
      throw FormatError(images_path + ": truncated at byte " +
                        std::to_string(16 + std::size_t(i) * dim + std::size_t(img.gcount())));
    double* row = d.X.row_ptr(i);
    for (std::size_t j = 0; j < dim; ++j) row[j] = buf[j] / 255.0;
  }
  std::vector<unsigned char> labels_buf(n_lab);
  lab.read(reinterpret_cast<char*>(labels_buf.data()), n_lab);
  if (lab.gcount() != static_cast<std::streamsize>(n_lab))
    throw FormatError(labels_path + ": truncated at byte " +
                      std::to_string(8 + std::size_t(lab.gcount())));

  std::size_t max_label = 0;
  for (std::uint32_t i = 0; i < n_lab; ++i) {
    d.y[i] = labels_buf[i];
    max_label = std::max(max_label, d.y[i]);
  }
  d.num_known_classes = max_label + 1;
  d.name = images_path;
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// CSV loader. Header row required, numeric cells only, '.' decimal separator.
// When label_column is absent (or not found in the header as nullopt), every
// label is the abstention index of an unlabeled set (0 with K = 0).
// ---------------------------------------------------------------------------

inline Dataset load_csv(const std::string& path,
                        std::optional<std::string> label_column = std::nullopt) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line.empty())
    throw FormatError(path + ": empty file (header row required)");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::optional<std::size_t> label_idx;
  if (label_column) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == *label_column) label_idx = j;
    if (!label_idx)
      throw FormatError(path + ": label column '" + *label_column + "' not in header");
  }
  const std::size_t feat_dim = header.size() - (label_idx ? 1 : 0);
  if (feat_dim == 0) throw FormatError(path + ": no feature columns");

  std::vector<double> flat;
  std::vector<std::size_t> labels;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col >= header.size())
        throw FormatError(path + ": line " + std::to_string(line_no) + " has more cells than header");
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0' || !std::isfinite(v))
        throw FormatError(path + ": non-numeric cell at line " + std::to_string(line_no) +
                          ", column '" + header[col] + "'");
      if (label_idx && col == *label_idx) {
        if (v < 0.0 || v != std::floor(v))
          throw FormatError(path + ": label must be a non-negative integer at line " +
                            std::to_string(line_no));
        labels.push_back(static_cast<std::size_t>(v));
      } else {
        flat.push_back(v);
      }
      ++col;
    }
    if (col != header.size())
      throw FormatError(path + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(col) + " cells, expected " + std::to_string(header.size()));
  }
  if (flat.empty()) throw FormatError(path + ": no data rows");

  Dataset d;
  d.X.rows = flat.size() / feat_dim;
  d.X.cols = feat_dim;
  d.X.values = std::move(flat);
  if (label_idx) {
    d.y = std::move(labels);
    std::size_t max_label = 0;
    for (std::size_t lab : d.y) max_label = std::max(max_label, lab);
    d.num_known_classes = max_label + 1;
  } else {
    d.y.assign(d.X.rows, 0);
    d.num_known_classes = 0;
  }
  d.name = path;
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

// Assigns every sample the abstention label K and sets num_known_classes = K.
inline Dataset relabel_as_abstain(const Dataset& d, std::size_t num_known_classes) {
  if (num_known_classes < 1) throw SpecError("relabel_as_abstain: K must be >= 1");
  Dataset out = d;
  out.num_known_classes = num_known_classes;
  std::fill(out.y.begin(), out.y.end(), num_known_classes);
  return out;
}

// Keeps only the samples whose label is in `classes` and remaps those labels
// to 0..classes.size()-1 in the order given.
inline Dataset select_classes(const Dataset& d, const std::vector<std::size_t>& classes) {
  if (classes.empty()) throw SpecError("select_classes: empty class list");
  std::vector<std::ptrdiff_t> remap(d.num_known_classes + 1, -1);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] >= remap.size())
      throw IndexError("select_classes: class " + std::to_string(classes[i]) + " out of range");
    remap[classes[i]] = static_cast<std::ptrdiff_t>(i);
  }
  Dataset out;
  out.name = d.name;
  out.value_bounds = d.value_bounds;
  out.num_known_classes = classes.size();
  out.X.cols = d.X.cols;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (remap[d.y[i]] < 0) continue;
    out.y.push_back(static_cast<std::size_t>(remap[d.y[i]]));
    const double* row = d.X.row_ptr(i);
    out.X.values.insert(out.X.values.end(), row, row + d.X.cols);
  }
  out.X.rows = out.y.size();
  if (out.X.rows == 0)
    throw SpecError("select_classes: no samples with the requested classes in '" + d.name + "'");
  return out;
}

inline Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.dim() != b.dim())
    throw ShapeError("concat: feature widths " + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()));
  if (a.num_known_classes != b.num_known_classes)
    throw ShapeError("concat: num_known_classes " + std::to_string(a.num_known_classes) +
                     " vs " + std::to_string(b.num_known_classes));
  Dataset out;
  out.name = a.name + "+" + b.name;
  out.num_known_classes = a.num_known_classes;
  if (a.value_bounds && b.value_bounds && *a.value_bounds == *b.value_bounds)
    out.value_bounds = a.value_bounds;
  out.X.rows = a.X.rows + b.X.rows;
  out.X.cols = a.X.cols;
  out.X.values = a.X.values;
  out.X.values.insert(out.X.values.end(), b.X.values.begin(), b.X.values.end());
  out.y = a.y;
  out.y.insert(out.y.end(), b.y.begin(), b.y.end());
  return out;
}

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std_dev;  // floored at 1e-8
};

inline constexpr double kStdFloor = 1e-8;

inline Standardizer fit_standardizer(const Dataset& d) {
  if (d.size() < 2) throw SpecError("fit_standardizer: need at least 2 samples");
  Standardizer s;
  const std::size_t dim = d.dim();
  const double n = static_cast<double>(d.size());
  s.mean.assign(dim, 0.0);
  s.std_dev.assign(dim, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double* row = d.X.row_ptr(i);
    for (std::size_t j = 0; j < dim; ++j) s.mean[j] += row[j];
  }
  for (std::size_t j = 0; j < dim; ++j) s.mean[j] /= n;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double* row = d.X.row_ptr(i);
    for (std::size_t j = 0; j < dim; ++j) {
      const double c = row[j] - s.mean[j];
      s.std_dev[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < dim; ++j)
    s.std_dev[j] = std::max(std::sqrt(s.std_dev[j] / n), kStdFloor);
  return s;
}

inline Dataset apply_standardizer(const Standardizer& s, const Dataset& d) {
  if (s.mean.size() != d.dim())
    throw ShapeError("apply_standardizer: fitted on dim " + std::to_string(s.mean.size()) +
                     ", dataset has dim " + std::to_string(d.dim()));
  Dataset out = d;
  out.value_bounds.reset();  // raw-space bounds no longer apply
  for (std::size_t i = 0; i < out.size(); ++i) {
    double* row = out.X.row_ptr(i);
    for (std::size_t j = 0; j < out.dim(); ++j)
      row[j] = (row[j] - s.mean[j]) / s.std_dev[j];
  }
  return out;
}

// Seeded partition into parts proportional to `fractions` (largest-remainder
// rounding, so each part size is within 1 of exact). Order within parts
// follows the shuffled order.
inline std::vector<Dataset> split(const Dataset& d, const std::vector<double>& fractions,
                                  std::uint64_t seed) {
  if (fractions.empty()) throw SpecError("split: no fractions");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw SpecError("split: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw SpecError("split: fractions must sum to 1");

  const std::size_t n = d.size();
  std::vector<std::size_t> sizes(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += sizes[i];
    remainders.push_back({exact - std::floor(exact), i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[remainders[k % remainders.size()].second];

  const std::vector<std::size_t> order = shuffled_indices(n, seed);
  std::vector<Dataset> parts;
  std::size_t pos = 0;
  for (std::size_t p = 0; p < fractions.size(); ++p) {
    Dataset part;
    part.name = d.name + "#" + std::to_string(p);
    part.num_known_classes = d.num_known_classes;
    part.value_bounds = d.value_bounds;
    part.X.cols = d.X.cols;
    part.X.rows = sizes[p];
    part.X.values.reserve(sizes[p] * d.X.cols);
    part.y.reserve(sizes[p]);
    for (std::size_t k = 0; k < sizes[p]; ++k) {
      const std::size_t src = order[pos++];
      const double* row = d.X.row_ptr(src);
      part.X.values.insert(part.X.values.end(), row, row + d.X.cols);
      part.y.push_back(d.y[src]);
    }
    parts.push_back(std::move(part));
  }
  return parts;
}

// Rows at the given source indices, in the order given.
inline Dataset take_rows(const Dataset& d, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.name = d.name;
  out.num_known_classes = d.num_known_classes;
  out.value_bounds = d.value_bounds;
  out.X.cols = d.X.cols;
  out.X.rows = indices.size();
  out.X.values.reserve(indices.size() * d.X.cols);
  out.y.reserve(indices.size());
  for (std::size_t src : indices) {
    if (src >= d.size()) throw IndexError("take_rows: index " + std::to_string(src) + " out of range");
    const double* row = d.X.row_ptr(src);
    out.X.values.insert(out.X.values.end(), row, row + d.X.cols);
    out.y.push_back(d.y[src]);
  }
  return out;
}

// Seeded subsample without replacement; returns d unchanged when n >= size.
inline Dataset subsample(const Dataset& d, std::size_t n, std::uint64_t seed) {
  if (n >= d.size()) return d;
  if (n == 0) throw SpecError("subsample: n must be positive");
  const std::vector<std::size_t> order = shuffled_indices(d.size(), seed);
  Dataset out;
  out.name = d.name;
  out.num_known_classes = d.num_known_classes;
  out.value_bounds = d.value_bounds;
  out.X.cols = d.X.cols;
  out.X.rows = n;
  out.X.values.reserve(n * d.X.cols);
  for (std::size_t k = 0; k < n; ++k) {
    const double* row = d.X.row_ptr(order[k]);
    out.X.values.insert(out.X.values.end(), row, row + d.X.cols);
    out.y.push_back(d.y[order[k]]);
  }
  return out;
}

}  // namespace oodkit
