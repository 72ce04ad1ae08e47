#include <gtest/gtest.h>

#include <cmath>

#include "seglab/gradcheck.hpp"
#include "seglab/losses.hpp"
#include "test_support.hpp"

using namespace seglab;
using seglab::testing::binary_probs;
using seglab::testing::labels_1d;

namespace {

// The 4-pixel binary case: y_fore = [1,1,0,0], s_fore = [1,0,0,0].
struct WorkedCase {
    LabelMap y = labels_1d({1, 1, 0, 0}, 1);
    ProbabilityMap s = binary_probs({1, 0, 0, 0});
};

LossConfig no_eps()
{
    LossConfig cfg;
    cfg.epsilon = 1e-300;
    return cfg;
}

}  // namespace

TEST(DiceLoss, WorkedCase)
{
    WorkedCase w;
    // 1/2 [(1 - 2/3) + (1 - 4/5)] = 4/15
    EXPECT_NEAR(dice_loss(w.y, w.s, no_eps()), 4.0 / 15.0, 1e-15);
    EXPECT_NEAR(dice_loss(w.y, w.s), 4.0 / 15.0, 1e-8);
}

TEST(DiceLoss, PerfectAndDisjoint)
{
    const LabelMap y = labels_1d({0, 1, 2, 2, 1}, 2);
    const ProbabilityMap s(y.shape(), y.classes(), std::vector<double>(y.values().begin(), y.values().end()));
    EXPECT_NEAR(dice_loss(y, s, no_eps()), 0.0, 1e-15);

    const LabelMap y2 = labels_1d({1, 0}, 1);
    EXPECT_NEAR(dice_loss(y2, binary_probs({0, 1}), no_eps()), 1.0, 1e-15);
}

TEST(DiceLoss, EmptyClassNeverDividesByZero)
{
    // Class 2 absent from y and s.
    const LabelMap y = labels_1d({0, 1, 0}, 2);
    const ProbabilityMap s(y.shape(), y.classes(), {1, 0, 1, 0, 1, 0, 0, 0, 0});
    EXPECT_TRUE(std::isfinite(dice_loss(y, s)));
    const GradientMap g = dice_grad(y, s);
    for (double v : g.values()) {
        EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(DiceGrad, WorkedCaseCaseSplit)
{
    WorkedCase w;
    const GradientMap g = dice_grad(w.y, w.s, no_eps());
    // Foreground class plane: I = 1, U = 3 -> -4/9 on y = 1, 2/9 elsewhere, times 1/|K| = 1/2.
    EXPECT_NEAR(g.at(1, 0), -4.0 / 9.0 / 2.0, 1e-15);
    EXPECT_NEAR(g.at(1, 1), -4.0 / 9.0 / 2.0, 1e-15);
    EXPECT_NEAR(g.at(1, 2), 2.0 / 9.0 / 2.0, 1e-15);
    EXPECT_NEAR(g.at(1, 3), 2.0 / 9.0 / 2.0, 1e-15);
    // Background plane: I = 2, U = 5 -> -6/25 and 4/25, halved.
    EXPECT_NEAR(g.at(0, 2), -6.0 / 25.0 / 2.0, 1e-15);
    EXPECT_NEAR(g.at(0, 0), 4.0 / 25.0 / 2.0, 1e-15);
}

TEST(DiceGrad, NoOverlapGivesZeroBackgroundGradient)
{
    const LabelMap y = labels_1d({1, 0, 0}, 1);
    const ProbabilityMap s = binary_probs({0, 0.6, 0.2});
    const GradientMap g = dice_grad(y, s);
    EXPECT_EQ(g.at(1, 1), 0.0);
    EXPECT_EQ(g.at(1, 2), 0.0);
    EXPECT_LT(g.at(1, 0), 0.0);
}

TEST(DiceGrad, BackgroundGradientZeroIffNoIntersection)
{
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const GridShape shape({2 + rng.below(20)});
        std::vector<int> idx(shape.pixel_count(), 0);
        idx[0] = 1;
        idx[1] = 0;
        for (std::size_t i = 2; i < idx.size(); ++i) {
            idx[i] = static_cast<int>(rng.below(2));
        }
        const LabelMap y = one_hot_from_indices(idx, shape, ClassSet(1));
        std::vector<double> fore(shape.pixel_count());
        const bool overlap = trial % 2 == 0;
        for (std::size_t i = 0; i < fore.size(); ++i) {
            fore[i] = (idx[i] == 1 && !overlap) ? 0.0 : rng.uniform(0.1, 1.0);
        }
        const GradientMap g = dice_grad(y, binary_probs(fore));
        const ClassOverlapStats st = overlap_stats(y, binary_probs(fore));
        const double bg = g.at(1, 1);  // pixel 1 is background for class 1
        ASSERT_EQ(bg == 0.0, st.intersection[1] == 0.0);
        ASSERT_EQ(bg == 0.0, !overlap);
    }
}

TEST(DiceGrad, PerfectSegmentationStillNonZero)
{
    // |Omega_y| = n for the object class; pre-averaging values are -1/(2n) and +1/(2n).
    const LabelMap y = labels_1d({1, 1, 1, 0, 0, 0, 0}, 1);
    const ProbabilityMap s(y.shape(), y.classes(), std::vector<double>(y.values().begin(), y.values().end()));
    const GradientMap g = dice_grad(y, s, no_eps());
    const double n1 = 3.0;
    const double n0 = 4.0;
    EXPECT_NEAR(g.at(1, 0), -1.0 / (2.0 * n1) / 2.0, 1e-15);
    EXPECT_NEAR(g.at(1, 5), 1.0 / (2.0 * n1) / 2.0, 1e-15);
    EXPECT_NEAR(g.at(0, 5), -1.0 / (2.0 * n0) / 2.0, 1e-15);
    EXPECT_NEAR(g.at(0, 0), 1.0 / (2.0 * n0) / 2.0, 1e-15);
}

TEST(DiceGrad, SoftUnionMinusIntersectionVanishesOnlyForEmptySupports)
{
    // U - I = sum (y + s - y s) is the soft union; a matching non-empty prediction
    // keeps it positive, so the foreground gradient stays non-zero.
    const LabelMap y = labels_1d({1, 0}, 1);
    const ProbabilityMap s = binary_probs({1, 0});
    const ClassOverlapStats st = overlap_stats(y, s);
    EXPECT_DOUBLE_EQ(st.union_sum[1] - st.intersection[1], 1.0);
    EXPECT_LT(dice_grad(y, s).at(1, 0), 0.0);
}

TEST(DiceGrad, SignStructureAndTwoValues)
{
    Rng rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        const GridShape shape(1 + rng.below(8), 1 + rng.below(8));
        const ClassSet classes(1 + static_cast<int>(rng.below(3)));
        const LabelMap y = random_labels(shape, classes, rng);
        const ProbabilityMap s = random_probabilities(shape, classes, rng);
        const GradientMap g = dice_grad(y, s);
        for (int k = 0; k < classes.total(); ++k) {
            for (std::size_t i = 0; i < shape.pixel_count(); ++i) {
                if (y.at(k, i) == 1.0) {
                    ASSERT_LE(g.at(k, i), 0.0);
                } else {
                    ASSERT_GE(g.at(k, i), 0.0);
                }
            }
        }
        for (int count : audit_two_valued(g, 1e-12)) {
            ASSERT_LE(count, 2);
        }
    }
}

TEST(DiceLoss, IsOneMinusMeanSoftDice)
{
    Rng rng(29);
    const LabelMap y = random_labels(GridShape(5, 5), ClassSet(2), rng);
    const ProbabilityMap s = random_probabilities(GridShape(5, 5), ClassSet(2), rng);
    const ClassOverlapStats st = overlap_stats(y, s);
    double mean = 0.0;
    for (int k = 0; k < 3; ++k) {
        mean += 2.0 * st.intersection[k] / st.union_sum[k];
    }
    mean /= 3.0;
    const double loss = dice_loss(y, s, no_eps());
    EXPECT_NEAR(loss, 1.0 - mean, 1e-14);
    EXPECT_GE(loss, 0.0);
    EXPECT_LE(loss, 1.0);
}

TEST(CrossEntropy, OnePixelTwoClasses)
{
    const LabelMap y = labels_1d({1}, 1);
    const ProbabilityMap s = binary_probs({0.5});
    EXPECT_NEAR(ce_loss(y, s), 0.5 * -std::log(0.5), 1e-15);
    EXPECT_NEAR(ce_loss(y, s), 0.34657359027997264, 1e-12);
    const GradientMap g = ce_grad(y, s);
    EXPECT_DOUBLE_EQ(g.at(1, 0), -1.0);
    EXPECT_DOUBLE_EQ(g.at(0, 0), 0.0);
}

TEST(CrossEntropy, TwoCorrectPixels)
{
    const LabelMap y = labels_1d({1, 1}, 1);
    EXPECT_NEAR(ce_loss(y, binary_probs({0.9, 0.9})), 0.25 * 2.0 * -std::log(0.9), 1e-15);
    EXPECT_NEAR(ce_loss(y, binary_probs({0.9, 0.9})), 0.052680257828913, 1e-12);
    // Unlike dice, the magnitude follows s per pixel.
    const GradientMap g = ce_grad(y, binary_probs({0.9, 0.5}));
    EXPECT_NE(std::abs(g.at(1, 0)), std::abs(g.at(1, 1)));
    for (double v : g.plane(0)) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(CrossEntropy, ClampFloorsZeroProbabilities)
{
    const LabelMap y = labels_1d({1, 0}, 1);
    const ProbabilityMap exact(y.shape(), y.classes(), std::vector<double>(y.values().begin(), y.values().end()));
    EXPECT_NEAR(ce_loss(y, exact), 0.0, 1e-15);
    const double with_zero = ce_loss(y, binary_probs({0.0, 0.0}));
    EXPECT_NEAR(with_zero, -std::log(1e-12) / 4.0, 1e-9);
    EXPECT_TRUE(std::isfinite(ce_grad(y, binary_probs({0.0, 0.0})).at(1, 0)));
}

TEST(Mime, ReferenceWeights)
{
    // omega = -2y + 0.1 rewritten as -1.9 y + 0.1 (1 - y).
    const LabelMap y = labels_1d({1, 0, 0}, 1);
    const MimeWeights w = mime_weights(y, 1.9, 0.1);
    EXPECT_DOUBLE_EQ(w.map().at(1, 0), -1.9);
    EXPECT_DOUBLE_EQ(w.map().at(1, 1), 0.1);
    EXPECT_DOUBLE_EQ(w.map().at(1, 2), 0.1);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(w.map().at(1, i), -2.0 * y.at(1, i) + 0.1);
    }
    const MimeWeights sym = mime_weights(y, 1.0, 1.0);
    for (std::size_t j = 0; j < y.values().size(); ++j) {
        EXPECT_EQ(sym.map().values()[j], 1.0 - 2.0 * y.values()[j]);
    }
    EXPECT_THROW(mime_weights(y, 0.0, 0.1), ValidationError);
    EXPECT_THROW(mime_weights(y, 1.9, -0.1), ValidationError);
}

TEST(Mime, InnerProduct)
{
    const LabelMap y = labels_1d({1, 0, 0}, 1);
    const MimeWeights w = mime_weights(y, 1.9, 0.1);
    // Only the class-1 plane [0.8, 0.1, 0.1] is non-zero in s.
    const ProbabilityMap s(y.shape(), y.classes(), {0, 0, 0, 0.8, 0.1, 0.1});
    EXPECT_NEAR(mime_loss(s, w), -1.50, 1e-15);
    const ProbabilityMap zeros = ProbabilityMap::zeros(y.shape(), y.classes());
    EXPECT_EQ(mime_loss(zeros, w), 0.0);
    const GradientMap g = mime_grad(s, w);
    for (std::size_t j = 0; j < g.values().size(); ++j) {
        EXPECT_EQ(g.values()[j], w.map().values()[j]);
    }
}

TEST(NegativeMime, InnerProductAndGradient)
{
    const LabelMap y = labels_1d({1}, 1);
    EXPECT_NEAR(nm_loss(y, binary_probs({0.7})), -0.7, 1e-15);

    const LabelMap y3 = labels_1d({0, 2, 1, 2, 3}, 3);
    const ProbabilityMap exact(y3.shape(), y3.classes(), std::vector<double>(y3.values().begin(), y3.values().end()));
    EXPECT_EQ(nm_loss(y3, exact), -5.0);
    const GradientMap g = nm_grad(y3, exact);
    for (std::size_t j = 0; j < g.values().size(); ++j) {
        EXPECT_EQ(g.values()[j], -y3.values()[j]);
    }
}

TEST(Combined, SingleTermMatchesStandalone)
{
    WorkedCase w;
    const std::vector<LossTerm> dice{LossTerm{LossId::dice, 1.0}};
    const LossValue lv = combined_loss(dice, w.y, w.s);
    EXPECT_EQ(lv.value, dice_loss(w.y, w.s));
    const GradientMap g = dice_grad(w.y, w.s);
    for (std::size_t j = 0; j < g.values().size(); ++j) {
        EXPECT_EQ(lv.grad.values()[j], g.values()[j]);
    }
}

TEST(Combined, SumAndScaling)
{
    WorkedCase w;
    const std::vector<LossTerm> both{LossTerm{LossId::ce, 1.0}, LossTerm{LossId::dice, 1.0}};
    EXPECT_NEAR(combined_loss(both, w.y, w.s).value, ce_loss(w.y, w.s) + dice_loss(w.y, w.s), 1e-12);
    EXPECT_NEAR(combined_value(both, w.y, w.s), ce_loss(w.y, w.s) + dice_loss(w.y, w.s), 1e-12);

    const std::vector<LossTerm> twice{LossTerm{LossId::dice, 2.0}};
    const GradientMap g2 = combined_loss(twice, w.y, w.s).grad;
    const GradientMap g1 = dice_grad(w.y, w.s);
    for (std::size_t j = 0; j < g1.values().size(); ++j) {
        EXPECT_EQ(g2.values()[j], 2.0 * g1.values()[j]);
    }
    EXPECT_THROW(combined_loss(std::vector<LossTerm>{}, w.y, w.s), ConfigError);
    EXPECT_THROW(parse_loss_id("tversky"), ConfigError);
}

TEST(Losses, ShapeMismatch)
{
    const LabelMap y = labels_1d({1, 0}, 1);
    const ProbabilityMap s = binary_probs({1, 0, 0});
    EXPECT_THROW(dice_loss(y, s), DimensionError);
    EXPECT_THROW(dice_grad(y, s), DimensionError);
    EXPECT_THROW(ce_loss(y, s), DimensionError);
    EXPECT_THROW(nm_loss(y, s), DimensionError);
    EXPECT_THROW(mime_loss(s, mime_weights(y, 1, 1)), DimensionError);
}
