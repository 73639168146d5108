#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "blprs/network.hpp"
#include "blprs/tensor.hpp"

namespace blprs {

class DatasetError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Labels and samples
// ---------------------------------------------------------------------------

/// Sixteen unique, non-empty UTF-8 labels; position is the class index.
class LabelMap {
 public:
  explicit LabelMap(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.size() != kClassCount) {
      throw DatasetError("label map needs exactly " + std::to_string(kClassCount) + " labels, got " +
                         std::to_string(labels_.size()));
    }
    std::set<std::string> seen;
    for (const auto& l : labels_) {
      if (l.empty()) throw DatasetError("label map contains an empty label");
      if (!seen.insert(l).second) throw DatasetError("label map contains duplicate label '" + l + "'");
    }
  }

  /// Bangla digits zero to nine followed by six letters common on plates.
  static LabelMap bangla_default() {
    return LabelMap({"০", "১", "২", "৩", "৪", "৫", "৬", "৭", "৮", "৯", "ক", "খ", "গ", "ঘ", "ল", "হ"});
  }

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& operator[](std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  std::optional<std::size_t> index_of(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels_.begin());
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::vector<std::string> labels_;
};

struct Sample {
  Tensor image;  // 1x32x32, values in [0, 1]
  std::size_t class_index;

  friend bool operator==(const Sample&, const Sample&) = default;
};

inline void check_sample(const Sample& s, std::size_t class_count) {
  if (s.image.shape() != Shape{1, kImageSide, kImageSide}) {
    throw DatasetError("sample image must be 1x32x32, got " + to_string(s.image.shape()));
  }
  for (double v : s.image.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DatasetError("sample pixel outside [0, 1]");
  }
  if (s.class_index >= class_count) throw DatasetError("sample class index " + std::to_string(s.class_index) + " out of range");
}

struct Dataset {
  std::vector<Sample> samples;
  LabelMap labels = LabelMap::bangla_default();

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(labels.size(), 0);
    for (const auto& s : samples) ++counts.at(s.class_index);
    return counts;
  }
};

inline Tensor one_hot(std::size_t class_index, std::size_t class_count) {
  if (class_index >= class_count) {
    throw Error("class index " + std::to_string(class_index) + " out of range for " + std::to_string(class_count) +
                " classes");
  }
  Tensor t({class_count}, 0.0);
  t[class_index] = 1.0;
  return t;
}

// ---------------------------------------------------------------------------
// labels.txt
// ---------------------------------------------------------------------------

inline LabelMap read_labels_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open label file " + path.string());
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    labels.push_back(line);
  }
  return LabelMap(std::move(labels));
}

inline std::string labels_file_contents(const LabelMap& labels) {
  std::string out;
  for (const auto& l : labels.labels()) out += l + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Raster images (binary PGM / PPM, 8-bit)
// ---------------------------------------------------------------------------

struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;  // 1 = gray, 3 = RGB
  std::vector<std::uint8_t> pixels;
};

inline RawImage decode_pnm(std::span<const std::uint8_t> bytes, const std::string& name = "image") {
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) -> DatasetError { return DatasetError(name + ": " + why); };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> std::size_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw fail("malformed header");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1u << 24)) throw fail("header value too large");
    }
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw fail("not a binary PGM/PPM file");
  }
  pos = 2;
  RawImage img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  img.width = read_uint();
  img.height = read_uint();
  const std::size_t maxval = read_uint();
  if (img.width == 0 || img.height == 0) throw fail("empty image");
  if (maxval == 0 || maxval > 255) throw fail("only 8-bit images are supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw fail("malformed header");
  ++pos;
  const std::size_t n = img.width * img.height * img.channels;
  if (bytes.size() - pos < n) throw fail("truncated pixel data");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  if (maxval != 255) {
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(std::lround(255.0 * std::min<std::size_t>(p, maxval) / maxval));
  }
  return img;
}

inline RawImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pnm(bytes, path.string());
}

inline std::string encode_pgm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 1) throw ShapeError("PGM export needs a 1xHxW tensor");
  std::string out = "P5\n" + std::to_string(image.dim(2)) + " " + std::to_string(image.dim(1)) + "\n255\n";
  for (double v : image.data()) out.push_back(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  return out;
}

/// Grayscale (Rec.601 luma for RGB), bilinear resize to 32x32, range [0, 1].
inline Tensor normalize_image(const RawImage& raw) {
  if (raw.width == 0 || raw.height == 0 || raw.pixels.empty()) throw DatasetError("cannot normalize an empty image");
  if ((raw.channels != 1 && raw.channels != 3) || raw.pixels.size() != raw.width * raw.height * raw.channels) {
    throw DatasetError("image pixel buffer does not match its dimensions");
  }
  std::vector<double> gray(raw.width * raw.height);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    if (raw.channels == 1) {
      gray[i] = raw.pixels[i] / 255.0;
    } else {
      const double r = raw.pixels[3 * i], g = raw.pixels[3 * i + 1], b = raw.pixels[3 * i + 2];
      gray[i] = (r == g && g == b) ? r / 255.0 : (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
    }
  }

  // Pixel-center aligned bilinear sampling, edges clamped.
  Tensor out({1, kImageSide, kImageSide});
  const double sx = static_cast<double>(raw.width) / kImageSide;
  const double sy = static_cast<double>(raw.height) / kImageSide;
  auto at = [&](std::size_t x, std::size_t y) { return gray[y * raw.width + x]; };
  for (std::size_t oy = 0; oy < kImageSide; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(raw.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, raw.height - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < kImageSide; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(raw.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, raw.width - 1);
      const double tx = fx - static_cast<double>(x0);
      const double top = at(x0, y0) + (at(x1, y0) - at(x0, y0)) * tx;
      const double bot = at(x0, y1) + (at(x1, y1) - at(x0, y1)) * tx;
      out(0, oy, ox) = std::clamp(top + (bot - top) * ty, 0.0, 1.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Directory trees: <root>/labels.txt and <root>/<label>/<file>
// ---------------------------------------------------------------------------

inline Dataset load_dataset_dir(const std::filesystem::path& root, const LabelMap& labels) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw DatasetError("dataset directory not found: " + root.string());

  std::vector<std::pair<fs::path, std::size_t>> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    const auto cls = labels.index_of(name);
    if (!cls) throw DatasetError("subdirectory '" + name + "' is not in the label map");
    for (const auto& f : fs::directory_iterator(entry.path())) {
      if (f.is_regular_file()) files.emplace_back(f.path(), *cls);
    }
  }
  if (files.empty()) throw DatasetError("no image files under " + root.string());
  std::sort(files.begin(), files.end(), [&](const auto& a, const auto& b) {
    return fs::relative(a.first, root).generic_string() < fs::relative(b.first, root).generic_string();
  });

  Dataset ds{{}, labels};
  ds.samples.reserve(files.size());
  for (const auto& [path, cls] : files) ds.samples.push_back({normalize_image(read_pnm(path)), cls});
  return ds;
}

/// Labels from `<root>/labels.txt` when present, otherwise the default map.
inline LabelMap labels_for_dir(const std::filesystem::path& root) {
  const auto file = root / "labels.txt";
  return std::filesystem::exists(file) ? read_labels_file(file) : LabelMap::bangla_default();
}

inline Dataset load_dataset_dir(const std::filesystem::path& root) { return load_dataset_dir(root, labels_for_dir(root)); }

inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Writes the dataset as a directory tree with labels.txt. Files are named by
/// their zero-padded position within the class.
inline void write_dataset_dir(const Dataset& ds, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  write_file_atomic(root / "labels.txt", labels_file_contents(ds.labels));
  std::vector<std::size_t> next(ds.labels.size(), 0);
  for (const auto& s : ds.samples) {
    const fs::path dir = root / ds.labels[s.class_index];
    fs::create_directories(dir);
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.pgm", next[s.class_index]++);
    write_file_atomic(dir / name, encode_pgm(s.image));
  }
}

}  // namespace blprs
