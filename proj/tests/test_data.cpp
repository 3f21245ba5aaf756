#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "oracles/reference.hpp"
#include "srru/data.hpp"

using namespace srru;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("SRRU_TEST_TMP");
  const fs::path base = env != nullptr ? fs::path(env) : fs::temp_directory_path() / "srru_tests";
  const fs::path dir = base / ("data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ImagePlane gradient_plane(std::size_t h, std::size_t w) {
  ImagePlane p(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) p.at(y, x) = std::fmod(7.0 * y + 3.0 * x + 0.1 * x * y, 255.0);
  return p;
}

ImagePlane reference_down(const ImagePlane& img, std::size_t scale) {
  long oh = 0, ow = 0;
  ImagePlane out;
  out.data = oracle::ScalarResampler::resize(img.data, static_cast<long>(img.height),
                                             static_cast<long>(img.width), 1.0 / scale, true, &oh, &ow);
  out.height = static_cast<std::size_t>(oh);
  out.width = static_cast<std::size_t>(ow);
  return out;
}

}  // namespace

// --- corpus ----------------------------------------------------------------------

TEST(Corpus, SortedManifestOfGeneratedImages) {
  const auto dir = scratch("sorted");
  const auto m = make_synthetic_corpus(dir, 5, 40, 3);
  ASSERT_EQ(m.entries.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(m.entries[i].path, "synth_000" + std::to_string(i) + ".png");
    EXPECT_EQ(m.entries[i].width, 40u);
    EXPECT_EQ(m.entries[i].height, 40u);
    EXPECT_EQ(m.entries[i].checksum, file_crc32(dir / m.entries[i].path));
  }
  EXPECT_TRUE(m.notes.empty());
}

TEST(Corpus, EmptyDirectoryIsStructuredError) {
  const auto dir = scratch("empty");
  EXPECT_THROW(load_corpus(dir, Split::Test), CorpusError);
  EXPECT_THROW(load_corpus(dir / "missing", Split::Test), CorpusError);
}

TEST(Corpus, UnreadableFileSkippedWithNote) {
  const auto dir = scratch("broken");
  make_synthetic_corpus(dir, 2, 24, 1);
  std::ofstream(dir / "aaa_broken.png") << "definitely not a png";
  const auto m = load_corpus(dir, Split::Train);
  EXPECT_EQ(m.entries.size(), 2u);
  ASSERT_EQ(m.notes.size(), 1u);
  EXPECT_NE(m.notes[0].find("aaa_broken.png"), std::string::npos);
}

TEST(Corpus, ManifestTextRoundTrip) {
  const auto dir = scratch("manifest");
  const auto m = make_synthetic_corpus(dir, 3, 20, 9);
  std::stringstream ss;
  write_manifest(ss, m);
  EXPECT_EQ(read_manifest(ss), m.entries);
}

TEST(Corpus, BmpAccepted) {
  const auto dir = scratch("bmp");
  // 2x2 24-bit BMP, bottom-up rows padded to 4 bytes.
  const unsigned char bmp[] = {'B', 'M', 70, 0, 0, 0, 0, 0, 0, 0, 54, 0, 0, 0, 40, 0, 0, 0, 2, 0, 0, 0,
                               2, 0, 0, 0, 1, 0, 24, 0, 0, 0, 0, 0, 16, 0, 0, 0, 0, 0, 0, 0, 0, 0,
                               0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
                               // bottom row: blue, green (BGR)
                               255, 0, 0, 0, 255, 0, 0, 0,
                               // top row: red, white
                               0, 0, 255, 255, 255, 255, 0, 0};
  std::ofstream(dir / "tiny.bmp", std::ios::binary).write(reinterpret_cast<const char*>(bmp), sizeof bmp);
  const auto img = read_image(dir / "tiny.bmp");
  ASSERT_EQ(img.channels, 3u);
  const auto rgb = img.to_rgb();
  EXPECT_EQ(rgb.at(0, 0, 0), 255);  // red, top-left
  EXPECT_EQ(rgb.at(0, 1, 1), 255);  // white
  EXPECT_EQ(rgb.at(1, 0, 2), 255);  // blue, bottom-left
  EXPECT_EQ(rgb.at(1, 1, 1), 255);  // green
  EXPECT_EQ(rgb.at(1, 1, 0), 0);
  EXPECT_EQ(load_corpus(dir, Split::Test).entries.size(), 1u);
}

TEST(Corpus, SetFiveNamesWhenAvailable) {
  const char* env = std::getenv("SRRU_SET5_DIR");
  if (env == nullptr) GTEST_SKIP() << "SRRU_SET5_DIR not set";
  const auto m = load_corpus(env, Split::Test);
  std::vector<std::string> ids;
  for (const auto& e : m.entries) ids.push_back(e.id());
  const std::vector<std::string> want{"baby", "bird", "butterfly", "head", "woman"};
  ASSERT_EQ(ids.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NE(ids[i].find(want[i]), std::string::npos);
}

// --- synthetic corpus ----------------------------------------------------------------

TEST(Synthetic, CountSizeAndDeterminism) {
  const auto a = scratch("synth_a"), b = scratch("synth_b");
  const auto ma = make_synthetic_corpus(a, 8, 96, 42);
  const auto mb = make_synthetic_corpus(b, 8, 96, 42);
  EXPECT_EQ(ma.entries.size(), 8u);
  EXPECT_EQ(std::distance(fs::directory_iterator(a), fs::directory_iterator{}), 8);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(slurp(a / ma.entries[i].path), slurp(b / mb.entries[i].path));
  const auto c = scratch("synth_c");
  const auto mc = make_synthetic_corpus(c, 1, 96, 43);
  EXPECT_NE(slurp(a / ma.entries[0].path), slurp(c / mc.entries[0].path));
}

TEST(Synthetic, ContentHasVariance) {
  const auto dir = scratch("synth_std");
  const auto m = make_synthetic_corpus(dir, 8, 96, 7);
  for (const auto& plane : load_luma_planes(m)) {
    double mean = 0, sq = 0;
    for (double v : plane.data) mean += v;
    mean /= plane.size();
    for (double v : plane.data) sq += (v - mean) * (v - mean);
    EXPECT_GT(std::sqrt(sq / plane.size()), 10.0);
  }
}

TEST(Synthetic, UnwritablePathThrows) {
  const auto dir = scratch("synth_file");
  std::ofstream(dir / "blocker") << "x";
  EXPECT_THROW(make_synthetic_corpus(dir / "blocker" / "sub", 1, 16, 1), IoError);
}

// --- LR synthesis -----------------------------------------------------------------

TEST(SynthesizeLr, ShapeAndConstant) {
  EXPECT_EQ(synthesize_lr(ImagePlane(128, 128), 4).height, 32u);
  const auto c = synthesize_lr(ImagePlane(64, 48, 77.0), 2);
  for (double v : c.data) EXPECT_NEAR(v, 77.0, 1e-12);
  const auto cropped = synthesize_lr(ImagePlane(67, 50), 4);
  EXPECT_EQ(cropped.height, 16u);
  EXPECT_EQ(cropped.width, 12u);
}

TEST(SynthesizeLr, MatchesReferenceResampler) {
  const auto hr = gradient_plane(48, 40);
  for (std::size_t s : {2u, 4u}) {
    const auto lr = synthesize_lr(hr, s);
    const auto ref = reference_down(hr, s);
    ASSERT_EQ(lr.height, ref.height);
    for (std::size_t i = 0; i < lr.size(); ++i) EXPECT_NEAR(lr.data[i], ref.data[i], 1e-9);
  }
}

// --- pairs and augmentation ------------------------------------------------------------

TEST(Pairs, PyramidDimensions) {
  const auto p2 = make_pair(gradient_plane(128, 128), 2, "g", "");
  EXPECT_EQ(p2.lr.shape(), (Shape{1, 1, 64, 64}));
  ASSERT_EQ(p2.hr.size(), 1u);
  EXPECT_EQ(p2.hr[0].shape(), (Shape{1, 1, 128, 128}));
  const auto p4 = make_pair(gradient_plane(48, 48), 4, "g", "");
  ASSERT_EQ(p4.hr.size(), 2u);
  EXPECT_EQ(p4.lr.height(), 12u);
  EXPECT_EQ(p4.hr[0].height(), 24u);
  EXPECT_EQ(p4.hr[1].height(), 48u);
}

TEST(Augment, IdentityDrawLeavesPairUnchanged) {
  const auto p = make_pair(gradient_plane(32, 32), 2, "g", "t");
  const auto q = augment(p, AugmentDraw{}, 2);
  EXPECT_EQ(q.lr, p.lr);
  EXPECT_EQ(q.hr[0], p.hr[0]);
  EXPECT_TRUE(AugmentDraw{}.is_identity());
}

TEST(Augment, HalfTurnTwiceIsOriginal) {
  const auto p = make_pair(gradient_plane(32, 24), 2, "g", "");
  const auto q = augment(augment(p, AugmentDraw{1.0, 2, false}, 2), AugmentDraw{1.0, 2, false}, 2);
  EXPECT_EQ(q.hr_source, p.hr_source);
  EXPECT_EQ(q.lr, p.lr);
}

TEST(Augment, LrIsDownscaleOfAugmentedHr) {
  const auto p = make_pair(gradient_plane(32, 32), 4, "g", "");
  for (int turns = 0; turns < 4; ++turns)
    for (bool flip : {false, true}) {
      const auto q = augment(p, AugmentDraw{1.0, turns, flip}, 4);
      EXPECT_EQ(q.lr, to_tensor<float>(synthesize_lr(q.hr_source, 4)));
      EXPECT_EQ(q.hr[0], to_tensor<float>(synthesize_lr(q.hr_source, 2)));
      EXPECT_EQ(q.hr[1], to_tensor<float>(q.hr_source));
    }
}

TEST(Augment, ScaleSetAndDeterministicDraws) {
  std::mt19937_64 a(3), b(3);
  std::set<double> seen;
  for (int i = 0; i < 200; ++i) {
    const auto da = AugmentDraw::random(a), db = AugmentDraw::random(b);
    EXPECT_EQ(da.tag(), db.tag());
    seen.insert(da.scale);
  }
  EXPECT_EQ(seen, (std::set<double>{0.6, 0.7, 0.8, 0.9, 1.0}));
}

TEST(Patches, SizesDeterminismAndEmptyStream) {
  const auto dir = scratch("patches");
  const auto m = make_synthetic_corpus(dir, 3, 160, 11);
  const auto a = make_patches(m, 128, 2, 2, 99);
  const auto b = make_patches(m, 128, 2, 2, 99);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].lr.shape(), (Shape{1, 1, 64, 64}));
    EXPECT_EQ(a[i].hr[0].shape(), (Shape{1, 1, 128, 128}));
    EXPECT_EQ(a[i].lr, b[i].lr);
    EXPECT_EQ(a[i].augmentation_tag, b[i].augmentation_tag);
  }
  EXPECT_EQ(a[0].source_id, "synth_0000");
  EXPECT_TRUE(make_patches(m, 128, 0, 2, 99).empty());
}

TEST(Patches, SmallSourceIsUpscaledWithNote) {
  PatchSampler s({gradient_plane(20, 30)}, {"small"}, 32, 2, 1, true);
  for (int i = 0; i < 10; ++i) {
    const auto p = s.next();
    EXPECT_EQ(p.hr[0].shape(), (Shape{1, 1, 32, 32}));
  }
  ASSERT_FALSE(s.notes().empty());
  EXPECT_NE(s.notes()[0].find("small"), std::string::npos);
}

TEST(Patches, PatchMustDivideByScale) {
  EXPECT_THROW(PatchSampler({gradient_plane(40, 40)}, {"x"}, 30, 4, 1), std::invalid_argument);
}

TEST(Collate, StacksInputsAndTargets) {
  PatchSampler s({gradient_plane(64, 64)}, {"g"}, 16, 4, 5, true);
  const auto pairs = s.next_batch(3);
  const auto b = collate(pairs);
  EXPECT_EQ(b.lr.shape(), (Shape{3, 1, 4, 4}));
  ASSERT_EQ(b.targets.size(), 2u);
  EXPECT_EQ(b.targets[1].shape(), (Shape{3, 1, 16, 16}));
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(b.lr.sample(2)[i], pairs[2].lr[i]);
}
