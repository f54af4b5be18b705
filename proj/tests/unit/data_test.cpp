#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "inmerge/error.hpp"
#include "inmerge/data.hpp"
#include "inmerge/io.hpp"
#include "scratch.hpp"

namespace inmerge {
namespace {

using testing::ScratchDir;

SynthSpec small_spec(HeadKind task = HeadKind::kMulticlass) {
  SynthSpec s;
  s.task = task;
  s.classes = 3;
  s.per_class = 20;
  s.height = 8;
  s.width = 8;
  s.seed = 5;
  return s;
}

template <typename Fn>
DataError::Kind data_error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no DataError thrown";
  return DataError::Kind::kInvalid;
}

TEST(SynthTest, SameSeedSameBytes) {
  for (SynthKind kind : {SynthKind::kGaussBlobs, SynthKind::kStripedTextures}) {
    SynthSpec s = small_spec();
    s.kind = kind;
    EXPECT_EQ(synth_make(s), synth_make(s));
    SynthSpec other = s;
    other.seed = 6;
    EXPECT_NE(synth_make(s).train.images, synth_make(other).train.images);
  }
}

TEST(SynthTest, DefaultSplitRule) {
  SynthSpec s = small_spec();
  s.per_class = 33;  // 99 samples: floor(14.85) = 14 for val and test
  const Dataset d = synth_make(s);
  EXPECT_EQ(d.val.count, 14u);
  EXPECT_EQ(d.test.count, 14u);
  EXPECT_EQ(d.train.count, 71u);
  EXPECT_EQ(d.train.images.size(), 71u * 64);
}

TEST(SynthTest, ExplicitSplitsMustCoverAllSamples) {
  SynthSpec s = small_spec();
  s.split_sizes = std::array<std::size_t, 3>{40, 10, 10};
  EXPECT_EQ(synth_make(s).train.count, 40u);
  s.split_sizes = std::array<std::size_t, 3>{40, 10, 9};
  EXPECT_THROW(synth_make(s), ConfigError);
}

TEST(SynthTest, LabelNoiseFlipsTrainOnly) {
  SynthSpec s = small_spec();
  s.per_class = 100;
  const Dataset clean = synth_make(s);
  s.label_noise = 0.2;
  const Dataset noisy = synth_make(s);
  EXPECT_EQ(clean.val, noisy.val);
  EXPECT_EQ(clean.test, noisy.test);
  EXPECT_EQ(clean.train.images, noisy.train.images);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < clean.train.count; ++i) {
    changed += clean.train.labels[i] != noisy.train.labels[i];
  }
  EXPECT_EQ(changed, static_cast<std::size_t>(std::llround(0.2 * clean.train.count)));
}

TEST(SynthTest, MultilabelLabelsAreBinary) {
  const Dataset d = synth_make(small_spec(HeadKind::kMultilabel));
  EXPECT_EQ(d.train.labels.size(), d.train.count * 3);
  for (auto v : d.train.labels) EXPECT_LE(v, 1);
}

TEST(DatasetIoTest, RoundTrip) {
  ScratchDir dir("data");
  for (HeadKind task : {HeadKind::kMulticlass, HeadKind::kMultilabel}) {
    const Dataset d = synth_make(small_spec(task));
    save_dataset(d, dir.path());
    EXPECT_EQ(load_dataset(dir.path()), d);
  }
}

TEST(DatasetIoTest, TruncatedBlobNamesBothSizes) {
  ScratchDir dir("data");
  const Dataset d = synth_make(small_spec());
  save_dataset(d, dir.path());
  auto bytes = read_file(dir / "train_images.bin");
  bytes.pop_back();
  write_file_atomic(dir / "train_images.bin", bytes);
  try {
    load_dataset(dir.path());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::kSizeMismatch);
    const std::string msg = e.what();
    EXPECT_NE(msg.find(std::to_string(bytes.size() + 1)), std::string::npos) << msg;
    EXPECT_NE(msg.find(std::to_string(bytes.size())), std::string::npos) << msg;
  }
}

TEST(DatasetIoTest, DistinctErrorKinds) {
  ScratchDir dir("data");
  const Dataset d = synth_make(small_spec(HeadKind::kMultilabel));
  save_dataset(d, dir.path());
  auto labels = read_file(dir / "val_labels.bin");
  labels[3] = 2;
  write_file_atomic(dir / "val_labels.bin", labels);
  EXPECT_EQ(data_error_kind([&] { load_dataset(dir.path()); }),
            DataError::Kind::kLabelDomain);

  save_dataset(d, dir.path());
  std::filesystem::remove(dir / "test_labels.bin");
  EXPECT_EQ(data_error_kind([&] { load_dataset(dir.path()); }),
            DataError::Kind::kMissingFile);

  EXPECT_EQ(data_error_kind([&] { load_dataset(dir / "nowhere"); }),
            DataError::Kind::kMissingFile);
}

TEST(DatasetIoTest, MetaRejectsUnknownKeys) {
  ScratchDir dir("data");
  save_dataset(synth_make(small_spec()), dir.path());
  auto meta = read_file(dir / "meta.json");
  std::string text(meta.begin(), meta.end());
  text.insert(text.find('{') + 1, "\"clases\": 3,");
  write_text_atomic(dir / "meta.json", text);
  EXPECT_EQ(data_error_kind([&] { load_dataset(dir.path()); }),
            DataError::Kind::kInvalid);
}

TEST(NormalizeTest, Formula) {
  const std::vector<std::uint8_t> px = {255, 0, 51};
  const Tensor a = normalize(px, {1, 1, 1, 3}, std::vector<double>{0.0},
                             std::vector<double>{1.0});
  EXPECT_FLOAT_EQ(a[0], 1.0f);
  const Tensor b = normalize(px, {1, 1, 1, 3}, std::vector<double>{0.5},
                             std::vector<double>{0.5});
  EXPECT_FLOAT_EQ(b[1], -1.0f);
  const Tensor c = normalize(px, {1, 1, 1, 3}, std::vector<double>{0.2},
                             std::vector<double>{0.7});
  EXPECT_NEAR(c[2], 0.0f, 1e-7);
  EXPECT_THROW(normalize(px, {1, 1, 1, 3}, std::vector<double>{0.5},
                         std::vector<double>{0.0}),
               ConfigError);
}

TEST(FlipTest, ProbabilityEndpoints) {
  Rng init(1);
  Tensor batch({3, 2, 2, 5});
  for (auto& v : batch.data()) v = static_cast<float>(init.uniform(-1, 1));
  Rng r0(4);
  EXPECT_TRUE(bit_equal(augment_flip(batch, 0.0, r0), batch));
  Rng r1(4), r2(5);
  EXPECT_TRUE(bit_equal(augment_flip(augment_flip(batch, 1.0, r1), 1.0, r2), batch));
}

TEST(FlipTest, MirrorsWidth) {
  Tensor t = Tensor::from({1, 1, 1, 2}, {1, 2});
  flip_sample(t.data(), 1, 1, 2);
  EXPECT_TRUE(bit_equal(t, Tensor::from({1, 1, 1, 2}, {2, 1})));
}

TEST(FlipTest, DecisionIsPerSample) {
  // Decisions depend on (seed, epoch, index) only, never on batch layout.
  std::size_t flips = 0;
  for (std::size_t i = 0; i < 2000; ++i) {
    const bool d = flip_decision(3, 1, i, 0.5);
    EXPECT_EQ(d, flip_decision(3, 1, i, 0.5));
    flips += d;
  }
  EXPECT_NEAR(static_cast<double>(flips) / 2000.0, 0.5, 0.05);
  EXPECT_FALSE(flip_decision(3, 1, 7, 0.0));
  EXPECT_TRUE(flip_decision(3, 1, 7, 1.0));
}

TEST(BatchTest, SizesAndPermutation) {
  const auto plain = make_batches(10, 4, std::nullopt);
  ASSERT_EQ(plain.size(), 3u);
  EXPECT_EQ(plain[0].size(), 4u);
  EXPECT_EQ(plain[2].size(), 2u);
  EXPECT_EQ(plain[2][1], 9u);

  const auto a = make_batches(103, 8, 42), b = make_batches(103, 8, 42);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, make_batches(103, 8, 43));
  std::set<std::size_t> seen;
  for (const auto& batch : a) seen.insert(batch.begin(), batch.end());
  EXPECT_EQ(seen.size(), 103u);
  EXPECT_EQ(*seen.rbegin(), 102u);
  EXPECT_THROW(make_batches(10, 0, std::nullopt), ConfigError);
}

TEST(BatchTest, GatherMatchesNormalizedBytes) {
  const Dataset d = synth_make(small_spec());
  const std::vector<std::size_t> idx = {4, 0};
  const Tensor x = gather_images(d, d.train, idx);
  ASSERT_EQ(x.shape(), (Shape{2, 1, 8, 8}));
  EXPECT_FLOAT_EQ(x[0], static_cast<float>((d.train.images[4 * 64] / 255.0 - 0.5) / 0.5));
  EXPECT_EQ(gather_labels(d, d.train, idx),
            (std::vector<std::uint8_t>{d.train.labels[4], d.train.labels[0]}));
}

}  // namespace
}  // namespace inmerge
