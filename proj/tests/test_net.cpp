#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "seglab/gradcheck.hpp"
#include "seglab/losses.hpp"
#include "seglab/net.hpp"
#include "test_support.hpp"

using namespace seglab;

namespace fs = std::filesystem;

namespace {

Image random_image(std::size_t h, std::size_t w, Rng& rng)
{
    std::vector<double> px(h * w);
    for (double& v : px) {
        v = rng.uniform();
    }
    return Image(GridShape(h, w), px);
}

}  // namespace

TEST(Softmax, TwoClassValues)
{
    const LogitMap z(GridShape({1}), ClassSet(1), {std::log(3.0), 0.0});
    const ProbabilityMap s = softmax(z);
    EXPECT_NEAR(s.at(0, 0), 0.75, 1e-15);
    EXPECT_NEAR(s.at(1, 0), 0.25, 1e-15);
}

TEST(Softmax, ShiftInvariantAndStable)
{
    const LogitMap z(GridShape({2}), ClassSet(2), {1, 1000, 2, 1001, 3, 999});
    const LogitMap shifted(GridShape({2}), ClassSet(2), {101, 1000 - 50, 102, 1001 - 50, 103, 999 - 50});
    const ProbabilityMap a = softmax(z);
    const ProbabilityMap b = softmax(shifted);
    for (std::size_t j = 0; j < a.values().size(); ++j) {
        EXPECT_TRUE(std::isfinite(a.values()[j]));
        EXPECT_NEAR(a.values()[j], b.values()[j], 1e-14);
    }
}

TEST(SoftmaxBackward, KnownCase)
{
    const ProbabilityMap s(GridShape({1}), ClassSet(1), {0.5, 0.5});
    const GradientMap g(GridShape({1}), ClassSet(1), {-1.0, 0.0});
    const LogitMap dz = softmax_backward(s, g);
    EXPECT_NEAR(dz.at(0, 0), -0.25, 1e-15);
    EXPECT_NEAR(dz.at(1, 0), 0.25, 1e-15);

    const ProbabilityMap s3(GridShape({1}), ClassSet(2), {0.2, 0.3, 0.5});
    const GradientMap flat(GridShape({1}), ClassSet(2), {4.0, 4.0, 4.0});
    const LogitMap dz3 = softmax_backward(s3, flat);
    for (double v : dz3.values()) {
        EXPECT_NEAR(v, 0.0, 1e-15);
    }
}

TEST(SegNet, ZeroNetOutputsBiases)
{
    SegNet net(ClassSet(3));
    std::vector<double> theta(net.parameters().begin(), net.parameters().end());
    const ConvLayer& last = net.layers().back();
    for (int k = 0; k < 4; ++k) {
        theta[last.bias_offset + k] = 0.1 * (k + 1);
    }
    net.set_parameters(theta);
    Rng rng(1);
    const ForwardResult r = forward(net, random_image(5, 6, rng));
    for (int k = 0; k < 4; ++k) {
        for (double v : r.logits.plane(k)) {
            EXPECT_DOUBLE_EQ(v, 0.1 * (k + 1));
        }
    }
}

TEST(SegNet, ParameterLayout)
{
    const SegNet net(ClassSet(3));
    // 8*1*9+8 + 8*8*9+8 + 4*8+4
    EXPECT_EQ(net.parameter_count(), 80u + 584u + 36u);
    EXPECT_EQ(net.layers().size(), 3u);
    EXPECT_TRUE(net.layers()[0].relu);
    EXPECT_FALSE(net.layers()[2].relu);
}

TEST(SegNet, HeInitDeterministic)
{
    const SegNet a = SegNet::he_initialized(ClassSet(1), 7);
    const SegNet b = SegNet::he_initialized(ClassSet(1), 7);
    const SegNet c = SegNet::he_initialized(ClassSet(1), 8);
    EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
    EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
    for (const ConvLayer& l : a.layers()) {
        for (int o = 0; o < l.out_channels; ++o) {
            EXPECT_EQ(a.parameters()[l.bias_offset + o], 0.0);
        }
    }
}

TEST(SegNet, RejectsNon2dImage)
{
    const SegNet net(ClassSet(1));
    EXPECT_THROW(forward(net, Image(GridShape({2, 2, 2}), std::vector<double>(8, 0.0))), DimensionError);
}

TEST(SegNet, StaleCacheRejected)
{
    SegNet net = SegNet::he_initialized(ClassSet(1), 3);
    Rng rng(2);
    const ForwardResult r = forward(net, random_image(4, 4, rng));
    const LogitMap dz = LogitMap::zeros(r.logits.shape(), r.logits.classes());
    EXPECT_NO_THROW(backward(net, r.cache, dz));
    net.mutable_parameters()[0] += 0.1;
    EXPECT_THROW(backward(net, r.cache, dz), ContractError);
    const SegNet copy = net;
    const ForwardResult r2 = forward(net, random_image(4, 4, rng));
    EXPECT_THROW(backward(copy, r2.cache, dz), ContractError);
}

class EndToEndGradient : public ::testing::TestWithParam<LossId> {};

TEST_P(EndToEndGradient, MatchesFiniteDifferences)
{
    const LossId id = GetParam();
    const ClassSet classes(2);
    const SegNet net = SegNet::he_initialized(classes, 11);
    Rng rng(12);
    const Image img = random_image(16, 16, rng);
    const LabelMap y = random_labels(img.shape, classes, rng);
    const std::vector<LossTerm> terms{LossTerm{id, 1.0}};

    const ForwardResult r = forward(net, img);
    const ProbabilityMap s = softmax(r.logits);
    const LossValue lv = combined_loss(terms, y, s);
    const std::vector<double> analytic = backward(net, r.cache, softmax_backward(s, lv.grad));

    int skipped = 0;
    const std::vector<std::size_t> coords = seglab::testing::smooth_coordinates(net, img, 50, 1e-4, rng, skipped);
    EXPECT_LT(skipped, 50);
    auto loss_at = [&](std::span<const double> theta) {
        SegNet probe(classes);
        probe.set_parameters(theta);
        return combined_value(terms, y, softmax(forward(probe, img).logits));
    };
    const std::vector<double> numeric = finite_diff(loss_at, net.parameters(), coords, 1e-4);
    std::vector<double> picked;
    for (std::size_t c : coords) {
        picked.push_back(analytic[c]);
    }
    EXPECT_LT(max_relative_error(picked, numeric), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Losses, EndToEndGradient,
                         ::testing::Values(LossId::ce, LossId::dice, LossId::mime, LossId::nm));

TEST(Checkpoint, RoundTrip)
{
    const SegNet net = SegNet::he_initialized(ClassSet(3), 5);
    const fs::path p = fs::temp_directory_path() / "seglab_test_net.ckpt";
    nlohmann::ordered_json header;
    header["seed"] = 5;
    header["epoch"] = 12;
    save_checkpoint(p, net, header);
    const Checkpoint back = load_checkpoint(p);
    EXPECT_EQ(back.net.classes(), ClassSet(3));
    EXPECT_TRUE(std::equal(net.parameters().begin(), net.parameters().end(), back.net.parameters().begin()));
    EXPECT_EQ(back.header["epoch"], 12);
    EXPECT_EQ(back.header["parameter_count"], net.parameter_count());
    EXPECT_THROW(load_checkpoint(fs::temp_directory_path() / "seglab_no_such.ckpt"), IoError);
}
