#include <gtest/gtest.h>

#include "inmerge/error.hpp"
#include "inmerge/merge.hpp"
#include "inmerge/model.hpp"

namespace inmerge {
namespace {

ArchConfig preset(std::string_view name, std::size_t c, std::size_t hw,
                  std::size_t k) {
  ArchConfig a;
  a.preset = std::string(name);
  a.channels = c;
  a.height = hw;
  a.width = hw;
  a.head = {HeadKind::kMulticlass, k};
  return a;
}

Tensor random_batch(const Model& m, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Tensor x(m.input_shape(n));
  for (auto& v : x.data()) v = static_cast<float>(rng.uniform(-1, 1));
  return x;
}

TEST(ModelTest, TinyCnnHasSixConvOrdinals) {
  Model m = build_model(preset(kPresetTinyCnn, 1, 28, 4), 1);
  EXPECT_EQ(m.num_conv(), 6u);
  const auto convs = m.conv_layers();
  ASSERT_EQ(convs.size(), 6u);
  for (std::size_t k = 0; k < convs.size(); ++k) EXPECT_EQ(convs[k].ordinal, k);
}

TEST(ModelTest, ConvOrdinalsIncreaseAlongLayers) {
  const Model m = build_model(preset(kPresetSmallVggD, 3, 64, 10), 1);
  EXPECT_EQ(m.num_conv(), 8u);
  std::vector<std::size_t> seen;
  for (std::size_t l = 0; l < m.layers().size(); ++l) {
    const auto ord = m.conv_ordinal(l);
    EXPECT_EQ(ord.has_value(), std::holds_alternative<Conv2dSpec>(m.layers()[l]));
    if (ord) seen.push_back(*ord);
  }
  for (std::size_t k = 0; k < seen.size(); ++k) EXPECT_EQ(seen[k], k);
}

TEST(ModelTest, SmallVggParameterCount) {
  // Layer algebra: four stages of two 3x3 convs (16, 32, 64, 64 channels),
  // each followed by a 2x2 pool, then dense 128 and dense K.
  const std::size_t c = 3, k = 10;
  std::size_t expect = 0, in = c;
  for (std::size_t width : {16, 32, 64, 64}) {
    expect += (in * 9 + 1) * width + (width * 9 + 1) * width;
    in = width;
  }
  const std::size_t flat = 64 * 4 * 4;
  expect += (flat + 1) * 128 + (128 + 1) * k;
  EXPECT_EQ(expect, 278426u);
  EXPECT_EQ(build_model(preset(kPresetSmallVggD, c, 64, k), 0).parameter_count(),
            278426u);
}

TEST(ModelTest, ForwardShapeIsBatchByClasses) {
  for (auto [name, c, hw, k] : {std::tuple{kPresetTinyCnn, 1, 28, 4},
                                std::tuple{kPresetTinyCnn, 3, 28, 2},
                                std::tuple{kPresetSmallVggD, 3, 64, 5}}) {
    const Model m = build_model(preset(name, c, hw, k), 2);
    EXPECT_EQ(m.forward(random_batch(m, 3, 1)).shape(), (Shape{3, std::size_t(k)}));
  }
}

TEST(ModelTest, SameSeedSameParameters) {
  const ArchConfig a = preset(kPresetTinyCnn, 1, 28, 4);
  EXPECT_TRUE(bit_equal(build_model(a, 9), build_model(a, 9)));
  EXPECT_FALSE(bit_equal(build_model(a, 9), build_model(a, 10)));
  EXPECT_EQ(build_model(a, 9).param_names(), build_model(a, 3).param_names());
}

TEST(ModelTest, BiasesStartAtZeroWeightsWithinHeBound) {
  const Model m = build_model(preset(kPresetTinyCnn, 1, 28, 4), 4);
  for (const auto& p : m.params()) {
    if (p.name.ends_with(".bias")) {
      for (float v : p.value.data()) EXPECT_EQ(v, 0.0f);
    } else {
      const std::size_t fan_in = p.value.size() / p.value.dim(0);
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (float v : p.value.data()) EXPECT_LE(std::abs(v), bound);
    }
  }
}

TEST(ModelTest, NoConvLayersGivesEmptyList) {
  ArchConfig a;
  a.layers = {FlattenSpec{}, DenseSpec{0, 3}};
  a.channels = 1;
  a.height = 2;
  a.width = 2;
  a.head = {HeadKind::kMulticlass, 3};
  Model m = build_model(a, 0);
  EXPECT_TRUE(m.conv_layers().empty());
  EXPECT_EQ(m.num_conv(), 0u);
}

TEST(ModelTest, SetGetRoundTripAndErrors) {
  Model m = build_model(preset(kPresetTinyCnn, 1, 28, 4), 1);
  Tensor w(m.get_param("conv2.weight").shape(), 0.25f);
  m.set_param("conv2.weight", w);
  EXPECT_TRUE(bit_equal(m.get_param("conv2.weight"), w));
  EXPECT_THROW(m.get_param("conv9.weight"), ShapeError);
  EXPECT_THROW(m.set_param("conv2.weight", Tensor({1})), ShapeError);
  EXPECT_FALSE(m.has_param("nope"));
}

TEST(ModelTest, ConvReferencesAliasParameters) {
  Model m = build_model(preset(kPresetTinyCnn, 1, 28, 4), 1);
  MergeConfig cfg;
  cfg.p = 1.0;
  cfg.tau = -1.0;
  cfg.l_s = 0;
  Rng rng(1);
  inmerge_sweep(m, cfg, rng);
  for (const auto& layer : m.conv_layers()) {
    EXPECT_EQ(&layer.weight,
              &m.get_param("conv" + std::to_string(layer.ordinal) + ".weight"));
  }
}

TEST(ModelTest, InvalidArchitecturesRejected) {
  ArchConfig a = preset(kPresetTinyCnn, 1, 30, 4);  // 30 -> 15 -> not even
  EXPECT_THROW(build_model(a, 0), ConfigError);
  a = preset("vgg99", 1, 28, 4);
  EXPECT_THROW(build_model(a, 0), ConfigError);
  ArchConfig b;
  b.layers = {Conv2dSpec{0, 2, 3, 3, 1, 0}, FlattenSpec{}, DenseSpec{0, 5}};
  b.channels = 1;
  b.height = 3;
  b.width = 3;
  b.head = {HeadKind::kMulticlass, 4};
  EXPECT_THROW(build_model(b, 0), ConfigError);  // 5 outputs for 4 classes
}

TEST(ModelTest, ConstructorValidatesParameterShapes) {
  const Model m = build_model(preset(kPresetTinyCnn, 1, 28, 4), 1);
  std::vector<Parameter> params = m.params();
  params[0].value = Tensor({1, 1, 1, 1});
  EXPECT_THROW(Model(m.arch(), m.layers(), params), ShapeError);
  params = m.params();
  params.pop_back();
  EXPECT_THROW(Model(m.arch(), m.layers(), params), ShapeError);
}

}  // namespace
}  // namespace inmerge
