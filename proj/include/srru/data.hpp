#pragma once

// Corpus ingestion, LR synthesis, patch sampling with augmentation, and a
// procedural corpus generator.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srru/image.hpp"
#include "srru/image_io.hpp"
#include "srru/resample.hpp"
#include "srru/tensor.hpp"

namespace srru {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { Train, Test };

struct ManifestEntry {
  std::string path;  // relative to the manifest root
  std::size_t width = 0;
  std::size_t height = 0;
  std::uint32_t checksum = 0;  // CRC-32 of the file bytes

  [[nodiscard]] std::string id() const { return std::filesystem::path(path).stem().string(); }
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct CorpusManifest {
  std::filesystem::path root;
  Split split = Split::Train;
  std::vector<ManifestEntry> entries;
  std::vector<std::string> notes;  // skipped files and other warnings
};

inline std::uint32_t file_crc32(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

/// Lists PNG/BMP files under `root` in lexicographic filename order.
/// Unreadable files are skipped with a warning recorded in the manifest.
inline CorpusManifest load_corpus(const std::filesystem::path& root, Split split) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw CorpusError("corpus directory not found: " + root.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_regular_file() && is_supported_image(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  CorpusManifest m;
  m.root = root;
  m.split = split;
  for (const auto& f : files) {
    try {
      const DecodedImage img = read_image(f);
      m.entries.push_back(ManifestEntry{f.filename().string(), img.width, img.height, file_crc32(f)});
    } catch (const IoError& err) {
      const std::string note = "skipped " + f.filename().string() + ": " + err.what();
      std::cerr << "warning: " << note << "\n";
      m.notes.push_back(note);
    }
  }
  if (m.entries.empty()) throw CorpusError("empty corpus: no readable images in " + root.string());
  return m;
}

/// One entry per line: path width height checksum (hex).
inline void write_manifest(std::ostream& os, const CorpusManifest& m) {
  for (const auto& e : m.entries) {
    os << e.path << ' ' << e.width << ' ' << e.height << ' ' << std::hex << std::setw(8)
       << std::setfill('0') << e.checksum << std::dec << std::setfill(' ') << '\n';
  }
}

inline std::vector<ManifestEntry> read_manifest(std::istream& is) {
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    ls >> e.path >> e.width >> e.height >> std::hex >> e.checksum;
    if (!ls) throw CorpusError("malformed manifest line: " + line);
    out.push_back(e);
  }
  return out;
}

/// Loads the luma plane of every manifest entry, byte range.
inline std::vector<ImagePlane> load_luma_planes(const CorpusManifest& m) {
  std::vector<ImagePlane> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) out.push_back(read_image(m.root / e.path).luma());
  return out;
}

/// Antialiased bicubic downscale by an integer factor after cropping to a
/// multiple of it.
inline ImagePlane synthesize_lr(const ImagePlane& hr, std::size_t scale) {
  const ImagePlane cropped = modcrop(hr, scale);
  return bicubic_resize(cropped, 1.0 / static_cast<double>(scale), true);
}

// ---------------------------------------------------------------------------
// Training pairs

struct SamplePair {
  Tensor<float> lr;               // 1x1xhxw in [0,1]
  std::vector<Tensor<float>> hr;  // per pyramid level: 2h, 4h, ...
  ImagePlane hr_source;           // full-resolution HR patch, [0,1]
  std::string source_id;
  std::string augmentation_tag;
};

inline std::size_t pyramid_levels(std::size_t scale) {
  if (scale == 2) return 1;
  if (scale == 4) return 2;
  throw std::invalid_argument("unsupported scale " + std::to_string(scale));
}

/// Builds LR input and per-level targets from one HR patch (any range).
inline SamplePair make_pair(const ImagePlane& hr_patch, std::size_t scale, std::string source_id,
                            std::string tag) {
  const std::size_t levels = pyramid_levels(scale);
  if (hr_patch.height % scale != 0 || hr_patch.width % scale != 0) {
    throw ShapeError("make_pair: HR patch " + std::to_string(hr_patch.height) + "x" +
                     std::to_string(hr_patch.width) + " not divisible by scale " +
                     std::to_string(scale));
  }
  SamplePair p;
  p.hr_source = rescale_range(hr_patch, ValueRange::Unit);
  p.lr = to_tensor<float>(synthesize_lr(p.hr_source, scale));
  for (std::size_t l = 0; l < levels; ++l) {
    const std::size_t down = scale >> (l + 1);  // 2 for the x2 level of a x4 pyramid
    p.hr.push_back(to_tensor<float>(down == 1 ? p.hr_source : synthesize_lr(p.hr_source, down)));
  }
  p.source_id = std::move(source_id);
  p.augmentation_tag = std::move(tag);
  return p;
}

struct AugmentDraw {
  double scale = 1.0;  // applied to the source image before cropping
  int quarter_turns = 0;
  bool flip = false;

  static constexpr std::array<double, 5> kScales{1.0, 0.9, 0.8, 0.7, 0.6};

  [[nodiscard]] bool is_identity() const { return scale == 1.0 && quarter_turns == 0 && !flip; }
  [[nodiscard]] std::string tag() const {
    std::ostringstream oss;
    oss << "s" << scale << "_r" << quarter_turns * 90 << (flip ? "_f" : "");
    return oss.str();
  }

  template <typename Rng>
  static AugmentDraw random(Rng& rng) {
    std::uniform_int_distribution<int> s(0, static_cast<int>(kScales.size()) - 1);
    std::uniform_int_distribution<int> r(0, 3);
    std::uniform_int_distribution<int> f(0, 1);
    AugmentDraw d;
    d.scale = kScales[static_cast<std::size_t>(s(rng))];
    d.quarter_turns = r(rng);
    d.flip = f(rng) == 1;
    return d;
  }
};

/// Applies rotation and flip to a pair's HR patch and re-synthesizes the LR
/// input and targets from the transformed HR. Scale augmentation acts on
/// the source image before cropping (see PatchSampler).
inline SamplePair augment(const SamplePair& pair, const AugmentDraw& draw, std::size_t scale) {
  if (draw.quarter_turns % 4 == 0 && !draw.flip) return pair;
  ImagePlane hr = rotate90(pair.hr_source, draw.quarter_turns);
  if (draw.flip) hr = flip_horizontal(hr);
  return make_pair(hr, scale, pair.source_id, draw.tag());
}

/// Deterministic stream of augmented training pairs drawn from a set of
/// luma planes.
class PatchSampler {
 public:
  PatchSampler(std::vector<ImagePlane> images, std::vector<std::string> ids, std::size_t patch,
               std::size_t scale, std::uint64_t seed, bool augment_enabled = true)
      : images_(std::move(images)),
        ids_(std::move(ids)),
        patch_(patch),
        scale_(scale),
        augment_(augment_enabled),
        rng_(seed) {
    if (patch_ == 0 || patch_ % scale_ != 0) {
      throw std::invalid_argument("patch size " + std::to_string(patch_) +
                                  " must be a positive multiple of scale " +
                                  std::to_string(scale_));
    }
    if (images_.empty()) throw CorpusError("PatchSampler: no images");
    if (ids_.size() != images_.size()) ids_.resize(images_.size(), "image");
  }

  /// A pair from a specific image.
  SamplePair sample_from(std::size_t image_index) {
    const AugmentDraw draw = augment_ ? AugmentDraw::random(rng_) : AugmentDraw{};
    const ImagePlane& src = scaled_source(image_index, draw.scale);
    std::uniform_int_distribution<std::size_t> ty(0, src.height - patch_);
    std::uniform_int_distribution<std::size_t> tx(0, src.width - patch_);
    const std::size_t top = ty(rng_);
    const std::size_t left = tx(rng_);
    SamplePair p = make_pair(crop(src, top, left, patch_, patch_), scale_, ids_[image_index],
                             AugmentDraw{draw.scale, 0, false}.tag());
    return augment(p, draw, scale_);
  }

  /// A pair from a uniformly chosen image.
  SamplePair next() {
    std::uniform_int_distribution<std::size_t> pick(0, images_.size() - 1);
    return sample_from(pick(rng_));
  }

  std::vector<SamplePair> next_batch(std::size_t batch) {
    std::vector<SamplePair> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(next());
    return out;
  }

  [[nodiscard]] const std::vector<std::string>& notes() const { return notes_; }

 private:
  const ImagePlane& scaled_source(std::size_t index, double s) {
    const auto key = std::make_pair(index, s);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    ImagePlane img = s == 1.0 ? images_[index] : bicubic_resize(images_[index], s, true);
    const std::size_t shorter = std::min(img.height, img.width);
    if (shorter < patch_) {
      const double up = static_cast<double>(patch_) / static_cast<double>(shorter);
      const std::size_t h = std::max(patch_, static_cast<std::size_t>(std::ceil(img.height * up)));
      const std::size_t w = std::max(patch_, static_cast<std::size_t>(std::ceil(img.width * up)));
      const BicubicResizer r(img.height, img.width, h, w, up, false);
      ImagePlane big(h, w, 0.0, img.range);
      r.resize(img.data.data(), big.data.data());
      notes_.push_back(ids_[index] + " upscaled to " + std::to_string(h) + "x" + std::to_string(w) +
                       " to fit the patch size");
      img = std::move(big);
    }
    return cache_.emplace(key, std::move(img)).first->second;
  }

  std::vector<ImagePlane> images_;
  std::vector<std::string> ids_;
  std::size_t patch_;
  std::size_t scale_;
  bool augment_;
  std::mt19937_64 rng_;
  std::map<std::pair<std::size_t, double>, ImagePlane> cache_;
  std::vector<std::string> notes_;
};

/// `per_image` augmented pairs from every image, in manifest order.
inline std::vector<SamplePair> make_patches(const CorpusManifest& manifest, std::size_t patch,
                                            std::size_t per_image, std::size_t scale,
                                            std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& e : manifest.entries) ids.push_back(e.id());
  PatchSampler sampler(load_luma_planes(manifest), ids, patch, scale, seed);
  std::vector<SamplePair> out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    for (std::size_t k = 0; k < per_image; ++k) out.push_back(sampler.sample_from(i));
  return out;
}

/// Stacks pair inputs and per-level targets into batch tensors.
struct Batch {
  Tensor<float> lr;
  std::vector<Tensor<float>> targets;
};

inline Batch collate(const std::vector<SamplePair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("collate: empty batch");
  auto stack = [&](auto get) {
    const Tensor<float>& first = get(pairs.front());
    Tensor<float> t(pairs.size(), 1, first.height(), first.width());
    for (std::size_t n = 0; n < pairs.size(); ++n) {
      const Tensor<float>& src = get(pairs[n]);
      require_dim("collate", "height", first.height(), src.height());
      require_dim("collate", "width", first.width(), src.width());
      std::copy(src.storage().begin(), src.storage().end(), t.sample(n).begin());
    }
    return t;
  };
  Batch b;
  b.lr = stack([](const SamplePair& p) -> const Tensor<float>& { return p.lr; });
  for (std::size_t l = 0; l < pairs.front().hr.size(); ++l) {
    b.targets.push_back(stack([l](const SamplePair& p) -> const Tensor<float>& { return p.hr[l]; }));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Procedural corpus

namespace detail {

/// Band-limited procedural content: smooth gradient, oriented sinusoids and
/// supersampled (anti-aliased) discs and rectangles. Values in [0,1].
inline std::array<ImagePlane, 3> procedural_image(std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
  const double n = static_cast<double>(size);

  struct Wave {
    double fx, fy, phase, amp;
  };
  struct Shape {
    bool disc;
    double cx, cy, r, angle, hw, hh, value;
  };
  const double g0 = uni(0.3, 0.7), gx = uni(-0.3, 0.3), gy = uni(-0.3, 0.3);
  std::vector<Wave> waves(2 + static_cast<std::size_t>(u01(rng) * 3.0));
  for (auto& w : waves) {
    const double period = uni(3.0, 24.0);
    const double theta = uni(0.0, std::numbers::pi);
    w = {std::cos(theta) / period, std::sin(theta) / period, uni(0.0, 2.0 * std::numbers::pi),
         uni(0.05, 0.18)};
  }
  std::vector<Shape> shapes(3 + static_cast<std::size_t>(u01(rng) * 4.0));
  for (auto& s : shapes) {
    s = {u01(rng) < 0.5, uni(0.0, n), uni(0.0, n), uni(0.06, 0.25) * n, uni(0.0, std::numbers::pi),
         uni(0.05, 0.3) * n, uni(0.05, 0.3) * n, uni(0.0, 1.0)};
  }
  const std::array<double, 3> tint{uni(0.8, 1.2), uni(0.8, 1.2), uni(0.8, 1.2)};

  constexpr int kSuper = 4;
  ImagePlane base(size, size, 0.0, ValueRange::Unit);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      double acc = 0.0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = static_cast<double>(x) + (sx + 0.5) / kSuper;
          const double py = static_cast<double>(y) + (sy + 0.5) / kSuper;
          double v = g0 + gx * (px / n - 0.5) + gy * (py / n - 0.5);
          for (const auto& w : waves) {
            v += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * px + w.fy * py) + w.phase);
          }
          for (const auto& s : shapes) {
            const double dx = px - s.cx, dy = py - s.cy;
            bool inside;
            if (s.disc) {
              inside = dx * dx + dy * dy <= s.r * s.r;
            } else {
              const double c = std::cos(s.angle), sn = std::sin(s.angle);
              inside = std::abs(c * dx + sn * dy) <= s.hw && std::abs(-sn * dx + c * dy) <= s.hh;
            }
            if (inside) v = 0.35 * v + 0.65 * s.value;
          }
          acc += v;
        }
      }
      base.at(y, x) = acc / (kSuper * kSuper);
    }
  }
  // Stretch to [0.08, 0.92].
  const auto [mn, mx] = std::minmax_element(base.data.begin(), base.data.end());
  const double lo = *mn, span = std::max(*mx - *mn, 1e-9);
  for (auto& v : base.data) v = 0.08 + 0.84 * (v - lo) / span;

  std::array<ImagePlane, 3> rgb{base, base, base};
  for (std::size_t c = 0; c < 3; ++c)
    for (auto& v : rgb[c].data) v = std::clamp(v * tint[c], 0.0, 1.0);
  return rgb;
}

}  // namespace detail

/// Writes `count` RGB PNGs of size x size named synth_NNNN.png.
inline CorpusManifest make_synthetic_corpus(const std::filesystem::path& dir, std::size_t count,
                                            std::size_t size, std::uint64_t seed,
                                            Split split = Split::Train) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const auto planes = detail::procedural_image(size, rng);
    RgbImage img(size, size);
    for (std::size_t p = 0; p < size * size; ++p)
      for (std::size_t c = 0; c < 3; ++c)
        img.data[p * 3 + c] = static_cast<std::uint8_t>(quantize_byte(planes[c].data[p] * 255.0));
    std::ostringstream name;
    name << "synth_" << std::setw(4) << std::setfill('0') << i << ".png";
    write_png(dir / name.str(), img);
  }
  return load_corpus(dir, split);
}

}  // namespace srru
