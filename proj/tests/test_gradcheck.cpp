#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "seglab/gradcheck.hpp"
#include "seglab/losses.hpp"
#include "test_support.hpp"

using namespace seglab;
using seglab::testing::binary_probs;
using seglab::testing::labels_1d;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "seglab_test_gradcheck";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<unsigned char> slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(FiniteDiff, LinearLossIsExact)
{
    Rng rng(1);
    const LabelMap y = random_labels(GridShape(4, 4), ClassSet(2), rng);
    const MimeWeights w = mime_weights(y, 1.9, 0.1);
    const ProbabilityMap s = random_probabilities(GridShape(4, 4), ClassSet(2), rng);
    const GradientMap fd = finite_diff_grad([&](const ProbabilityMap& p) { return mime_loss(p, w); }, s);
    for (std::size_t j = 0; j < fd.values().size(); ++j) {
        EXPECT_NEAR(fd.values()[j], w.map().values()[j], 1e-9);
    }
}

TEST(FiniteDiff, AgreesWithAnalyticGradients)
{
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const GridShape shape(1 + rng.below(5), 1 + rng.below(5));
        const ClassSet classes(1 + static_cast<int>(rng.below(3)));
        const LabelMap y = random_labels(shape, classes, rng);
        const ProbabilityMap s = random_probabilities(shape, classes, rng, 0.05, 1.0);
        const GradientMap a = dice_grad(y, s);
        const GradientMap n = finite_diff_grad([&](const ProbabilityMap& p) { return dice_loss(y, p); }, s);
        ASSERT_LT(max_relative_error(a.values(), n.values()), 1e-6);
        const GradientMap ca = ce_grad(y, s);
        const GradientMap cn = finite_diff_grad([&](const ProbabilityMap& p) { return ce_loss(y, p); }, s);
        ASSERT_LT(max_relative_error(ca.values(), cn.values()), 1e-6);
    }
}

TEST(FiniteDiff, NegativeControlIsCaught)
{
    Rng rng(3);
    const LabelMap y = random_labels(GridShape(3, 3), ClassSet(1), rng);
    const ProbabilityMap s = random_probabilities(GridShape(3, 3), ClassSet(1), rng, 0.05, 1.0);
    const GradientMap n = finite_diff_grad([&](const ProbabilityMap& p) { return dice_loss(y, p); }, s);
    const GradientMap a = dice_grad(y, s);
    std::vector<double> wrong(a.values().begin(), a.values().end());
    for (double& v : wrong) {
        v *= 10.0;
    }
    EXPECT_GT(max_relative_error(wrong, n.values()), 1e-6);
}

TEST(FiniteDiff, NonFiniteLossThrows)
{
    const ProbabilityMap s = binary_probs({0.5});
    EXPECT_THROW(finite_diff_grad([](const ProbabilityMap&) { return std::nan(""); }, s), OracleError);
}

TEST(RelativeError, Definition)
{
    EXPECT_DOUBLE_EQ(relative_error(1e-9, 2e-9), 1e-9);
    EXPECT_DOUBLE_EQ(relative_error(10.0, 11.0), 1.0 / 11.0);
    EXPECT_EQ(relative_error(3.0, 3.0), 0.0);
}

TEST(TwoValued, CountsClusters)
{
    const GradientMap g(GridShape({4}), ClassSet(1), {0.5, 0.5, 0.5, 0.5, -1, 2, -1, 2 + 1e-15});
    const std::vector<int> c = audit_two_valued(g, 1e-12);
    EXPECT_EQ(c, (std::vector<int>{1, 2}));
    const GradientMap three(GridShape({3}), ClassSet(1), {0, 0, 0, 1, 2, 3});
    EXPECT_EQ(audit_two_valued(three, 1e-12)[1], 3);
}

TEST(Bound, DiceRespectsItCeDoesNot)
{
    Rng rng(4);
    std::size_t dice_violations = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const GridShape shape(1 + rng.below(6), 1 + rng.below(6));
        const ClassSet classes(1 + static_cast<int>(rng.below(3)));
        const LabelMap y = random_labels(shape, classes, rng);
        const ProbabilityMap s = random_probabilities(shape, classes, rng);
        const double avg = 1.0 / classes.total();
        dice_violations += audit_bound(dice_grad(y, s), overlap_stats(y, s), avg);
    }
    EXPECT_EQ(dice_violations, 0u);

    // CE near s = 0 on a foreground pixel blows far past 2/U.
    const LabelMap y = labels_1d({1, 1, 0, 0}, 1);
    const ProbabilityMap s = binary_probs({1e-4, 0.9, 0.1, 0.1});
    EXPECT_GT(audit_bound(ce_grad(y, s), overlap_stats(y, s), 0.5), 0u);
}

TEST(DynamicRange, KnownValuesAndScaleInvariance)
{
    const GradientMap g(GridShape({2}), ClassSet(1), {0, 1, -2, 0});
    EXPECT_NEAR(dynamic_range_db(g), 3.0103, 1e-4);
    const GradientMap g10(GridShape({2}), ClassSet(1), {0, 10, -20, 0});
    EXPECT_NEAR(dynamic_range_db(g10), dynamic_range_db(g), 1e-12);
    const GradientMap flat(GridShape({2}), ClassSet(1), {0.3, -0.3, 0.3, 0.3});
    EXPECT_EQ(dynamic_range_db(flat), 0.0);
    EXPECT_THROW(dynamic_range_db(GradientMap::zeros(GridShape({2}), ClassSet(1))), RangeError);
}

TEST(DynamicRange, CeWiderThanDiceOnNoisyPredictions)
{
    Rng rng(5);
    int wider = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const GridShape shape(16, 16);
        std::vector<int> idx(shape.pixel_count());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            idx[i] = (i % 16) < 8 ? 1 : 0;
        }
        const LabelMap y = one_hot_from_indices(idx, shape, ClassSet(1));
        const ProbabilityMap s = noisy_prediction(y, 0.3, rng);
        wider += dynamic_range_db(ce_grad(y, s)) > dynamic_range_db(dice_grad(y, s)) ? 1 : 0;
    }
    EXPECT_EQ(wider, 20);
}

TEST(NoisyPrediction, OnSimplex)
{
    Rng rng(6);
    const LabelMap y = random_labels(GridShape(5, 5), ClassSet(3), rng);
    const ProbabilityMap s = noisy_prediction(y, 0.2, rng);
    for (std::size_t i = 0; i < 25; ++i) {
        double total = 0.0;
        for (int k = 0; k < 4; ++k) {
            EXPECT_GE(s.at(k, i), 0.0);
            total += s.at(k, i);
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Pfm, HeaderAndPayload)
{
    const fs::path p = scratch("zeros.pfm");
    const std::vector<double> plane(4, 0.0);
    write_pfm(p, plane, 2, 2);
    const std::vector<unsigned char> bytes = slurp(p);
    const std::string header = "Pf\n2 2\n-1.0\n";
    ASSERT_EQ(bytes.size(), header.size() + 16);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + header.size()), header);
    for (std::size_t j = header.size(); j < bytes.size(); ++j) {
        EXPECT_EQ(bytes[j], 0);
    }
}

TEST(Pfm, RoundTripKeepsRowOrder)
{
    const fs::path p = scratch("ramp.pfm");
    const std::vector<double> plane{1, 2, 3, 4, 5, 6};  // 3 wide, 2 high
    write_pfm(p, plane, 3, 2);
    const PfmImage img = read_pfm(p);
    EXPECT_EQ(img.width, 3u);
    EXPECT_EQ(img.height, 2u);
    for (std::size_t j = 0; j < plane.size(); ++j) {
        EXPECT_EQ(img.pixels[j], static_cast<float>(plane[j]));
    }
    // Bottom row (4, 5, 6) comes first on disk.
    const std::vector<unsigned char> bytes = slurp(p);
    float first = 0.0F;
    std::memcpy(&first, bytes.data() + std::string("Pf\n3 2\n-1.0\n").size(), 4);
    EXPECT_EQ(first, 4.0F);
}

TEST(Pfm, ExportWritesOnePlanePerClass)
{
    const GradientMap g(GridShape(2, 2), ClassSet(2), std::vector<double>(12, 0.25));
    const auto paths = export_gradient_map(g, scratch("grad"));
    ASSERT_EQ(paths.size(), 3u);
    EXPECT_EQ(paths[2].filename().string(), "grad_k2.pfm");
    for (const auto& p : paths) {
        EXPECT_TRUE(fs::exists(p));
    }
    EXPECT_THROW(read_pfm(scratch("missing.pfm")), IoError);
}

TEST(AuditReport, Json)
{
    GradAuditReport r;
    r.max_rel_error = 1e-9;
    r.distinct_values = {2, 2};
    r.bound_violations = 0;
    r.dynamic_range_db = 3.5;
    const nlohmann::json j = nlohmann::json::parse(r.to_json());
    EXPECT_EQ(j["distinct_values"], nlohmann::json::array({2, 2}));
    EXPECT_EQ(j["bound_violations"], 0);
    EXPECT_DOUBLE_EQ(j["dynamic_range_db"].get<double>(), 3.5);
}
