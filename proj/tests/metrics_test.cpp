#include <gtest/gtest.h>

#include "oracles.hpp"
#include "swinecat/metrics.hpp"

using namespace swinecat;

namespace {

// Independent brute-force reimplementation working from raw pair counts.
MetricsReport brute_force_report(const ConfusionMatrix& cm) {
    size_t k = cm.num_classes;
    MetricsReport rep;
    rep.per_class.resize(k);
    rep.total = cm.total();
    size_t correct = 0;
    for (size_t c = 0; c < k; ++c) {
        double tp = 0, fp = 0, fn = 0;
        for (size_t t = 0; t < k; ++t) {
            for (size_t p = 0; p < k; ++p) {
                double n = static_cast<double>(cm.at(t, p));
                if (t == c && p == c) tp += n;
                if (t != c && p == c) fp += n;
                if (t == c && p != c) fn += n;
            }
        }
        correct += cm.at(c, c);
        double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
        rep.per_class[c] = {prec, rec, f1, static_cast<size_t>(tp + fn)};
        rep.macro_precision += prec / k;
        rep.macro_recall += rec / k;
        rep.macro_f1 += f1 / k;
        double w = (tp + fn) / static_cast<double>(rep.total);
        rep.weighted_precision += w * prec;
        rep.weighted_recall += w * rec;
        rep.weighted_f1 += w * f1;
    }
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(rep.total);
    return rep;
}

ConfusionMatrix random_cm(size_t k, swinecat::Rng& rng, size_t max_cell = 20) {
    ConfusionMatrix cm(k);
    bool any = false;
    for (size_t t = 0; t < k; ++t) {
        for (size_t p = 0; p < k; ++p) {
            cm.at(t, p) = rng.below(max_cell);
            any = any || cm.at(t, p) > 0;
        }
    }
    if (!any) cm.at(0, 0) = 1;
    return cm;
}

TEST(Confuse, PerfectPredictionsAreDiagonal) {
    std::vector<int> labels = {0, 1, 2, 2, 1, 0, 2};
    ConfusionMatrix cm = confuse(labels, labels, 3);
    for (size_t t = 0; t < 3; ++t) {
        for (size_t p = 0; p < 3; ++p) {
            if (t != p) EXPECT_EQ(cm.at(t, p), 0u);
        }
    }
    EXPECT_EQ(cm.at(2, 2), 3u);
    EXPECT_EQ(cm.total(), labels.size());
}

TEST(Confuse, RowsAreTrueColsArePredicted) {
    ConfusionMatrix cm = confuse({0, 1}, {1, 1}, 2);
    EXPECT_EQ(cm.at(1, 0), 1u);
    EXPECT_EQ(cm.at(1, 1), 1u);
    EXPECT_EQ(cm.at(0, 0), 0u);
}

TEST(Confuse, MatchesCountingOracle) {
    Rng rng(31);
    std::vector<int> preds, labels;
    size_t k = 9;
    for (int i = 0; i < 1000; ++i) {
        preds.push_back(static_cast<int>(rng.below(k)));
        labels.push_back(static_cast<int>(rng.below(k)));
    }
    ConfusionMatrix cm = confuse(preds, labels, k);
    for (size_t t = 0; t < k; ++t) {
        for (size_t p = 0; p < k; ++p) {
            size_t count = 0;
            for (size_t i = 0; i < preds.size(); ++i) {
                count += (labels[i] == static_cast<int>(t) && preds[i] == static_cast<int>(p));
            }
            ASSERT_EQ(cm.at(t, p), count);
        }
    }
}

TEST(Confuse, RangeViolationsRejected) {
    EXPECT_THROW(confuse({0, 3}, {0, 0}, 3), ContractError);
    EXPECT_THROW(confuse({0}, {0, 1}, 3), ContractError);
    EXPECT_THROW(confuse({-1}, {0}, 3), ContractError);
}

TEST(Report, DiagonalGivesAllOnes) {
    ConfusionMatrix cm(3);
    cm.at(0, 0) = 5;
    cm.at(1, 1) = 2;
    cm.at(2, 2) = 9;
    MetricsReport rep = report(cm);
    EXPECT_DOUBLE_EQ(rep.accuracy, 1.0);
    EXPECT_DOUBLE_EQ(rep.macro_f1, 1.0);
    EXPECT_DOUBLE_EQ(rep.weighted_precision, 1.0);
    for (const auto& m : rep.per_class) {
        EXPECT_DOUBLE_EQ(m.precision, 1.0);
        EXPECT_DOUBLE_EQ(m.recall, 1.0);
        EXPECT_DOUBLE_EQ(m.f1, 1.0);
    }
}

TEST(Report, HandComputedTwoClassCase) {
    ConfusionMatrix cm(2);
    cm.at(0, 0) = 8;
    cm.at(0, 1) = 2;
    cm.at(1, 0) = 3;
    cm.at(1, 1) = 7;
    MetricsReport rep = report(cm);
    EXPECT_DOUBLE_EQ(rep.accuracy, 0.75);
    EXPECT_DOUBLE_EQ(rep.per_class[0].precision, 8.0 / 11.0);
    EXPECT_DOUBLE_EQ(rep.per_class[0].recall, 0.8);
    // frozen by hand: F1_0 = 16/21, F1_1 = 14/19
    EXPECT_NEAR(rep.per_class[0].f1, 16.0 / 21.0, 1e-12);
    EXPECT_NEAR(rep.per_class[1].f1, 14.0 / 19.0, 1e-12);
    EXPECT_NEAR(rep.macro_f1, 0.5 * (16.0 / 21.0 + 14.0 / 19.0), 1e-12);
}

TEST(Report, WeightedRecallEqualsAccuracy) {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        size_t k = 2 + rng.below(8);
        ConfusionMatrix cm = random_cm(k, rng);
        MetricsReport rep = report(cm);
        EXPECT_NEAR(rep.weighted_recall, rep.accuracy, 1e-12);
    }
}

TEST(Report, MatchesBruteForceOracle) {
    Rng rng(78);
    for (int trial = 0; trial < 100; ++trial) {
        size_t k = 2 + rng.below(8);
        ConfusionMatrix cm = random_cm(k, rng);
        MetricsReport got = report(cm);
        MetricsReport want = brute_force_report(cm);
        EXPECT_NEAR(got.accuracy, want.accuracy, 1e-9);
        EXPECT_NEAR(got.macro_precision, want.macro_precision, 1e-9);
        EXPECT_NEAR(got.macro_recall, want.macro_recall, 1e-9);
        EXPECT_NEAR(got.macro_f1, want.macro_f1, 1e-9);
        EXPECT_NEAR(got.weighted_precision, want.weighted_precision, 1e-9);
        EXPECT_NEAR(got.weighted_recall, want.weighted_recall, 1e-9);
        EXPECT_NEAR(got.weighted_f1, want.weighted_f1, 1e-9);
        for (size_t c = 0; c < k; ++c) {
            EXPECT_NEAR(got.per_class[c].precision, want.per_class[c].precision, 1e-9);
            EXPECT_NEAR(got.per_class[c].recall, want.per_class[c].recall, 1e-9);
            EXPECT_NEAR(got.per_class[c].f1, want.per_class[c].f1, 1e-9);
            EXPECT_EQ(got.per_class[c].support, want.per_class[c].support);
        }
    }
}

TEST(Report, MacroInvariantUnderRelabeling) {
    Rng rng(79);
    size_t k = 5;
    ConfusionMatrix cm = random_cm(k, rng);
    MetricsReport base = report(cm);
    std::vector<size_t> perm = {2, 0, 4, 1, 3};
    ConfusionMatrix permuted(k);
    for (size_t t = 0; t < k; ++t) {
        for (size_t p = 0; p < k; ++p) permuted.at(perm[t], perm[p]) = cm.at(t, p);
    }
    MetricsReport moved = report(permuted);
    EXPECT_NEAR(base.macro_precision, moved.macro_precision, 1e-12);
    EXPECT_NEAR(base.macro_recall, moved.macro_recall, 1e-12);
    EXPECT_NEAR(base.macro_f1, moved.macro_f1, 1e-12);
    EXPECT_NEAR(base.accuracy, moved.accuracy, 1e-12);
}

TEST(Report, BoundsAndSupportTotals) {
    Rng rng(80);
    for (int trial = 0; trial < 20; ++trial) {
        size_t k = 2 + rng.below(8);
        ConfusionMatrix cm = random_cm(k, rng);
        MetricsReport rep = report(cm);
        size_t support = 0;
        for (const auto& m : rep.per_class) {
            EXPECT_GE(m.precision, 0.0);
            EXPECT_LE(m.precision, 1.0);
            EXPECT_GE(m.recall, 0.0);
            EXPECT_LE(m.recall, 1.0);
            EXPECT_GE(m.f1, 0.0);
            EXPECT_LE(m.f1, 1.0);
            support += m.support;
        }
        EXPECT_EQ(support, rep.total);
        EXPECT_GE(rep.macro_f1, 0.0);
        EXPECT_LE(rep.macro_f1, 1.0);
    }
}

TEST(Report, ZeroDivisionConvention) {
    // class 1 never predicted and never true: precision, recall, f1 all 0
    ConfusionMatrix cm(3);
    cm.at(0, 0) = 4;
    cm.at(2, 0) = 1;
    cm.at(2, 2) = 5;
    MetricsReport rep = report(cm);
    EXPECT_DOUBLE_EQ(rep.per_class[1].precision, 0.0);
    EXPECT_DOUBLE_EQ(rep.per_class[1].recall, 0.0);
    EXPECT_DOUBLE_EQ(rep.per_class[1].f1, 0.0);
    EXPECT_TRUE(std::isfinite(rep.macro_f1));
}

TEST(Report, EmptyMatrixRejected) {
    ConfusionMatrix cm(4);
    EXPECT_THROW(report(cm), ContractError);
}

TEST(Render, TableAndKvColumns) {
    ConfusionMatrix cm(2);
    cm.at(0, 0) = 3;
    cm.at(1, 1) = 1;
    MetricsReport rep = report(cm);
    std::string table = render_report(rep, {"alpha", "beta"});
    EXPECT_NE(table.find("precision%"), std::string::npos);
    EXPECT_NE(table.find("alpha"), std::string::npos);
    EXPECT_NE(table.find("accuracy 100.00%"), std::string::npos);
    std::string kv = render_report_kv(rep);
    EXPECT_NE(kv.find("accuracy=1"), std::string::npos);
    EXPECT_NE(kv.find("macro_f1=1"), std::string::npos);
    EXPECT_NE(kv.find("class0_support=3"), std::string::npos);
}

TEST(Merge, ShardsAddElementwise) {
    ConfusionMatrix a(2), b(2);
    a.at(0, 0) = 2;
    b.at(0, 0) = 3;
    b.at(1, 0) = 4;
    a.merge(b);
    EXPECT_EQ(a.at(0, 0), 5u);
    EXPECT_EQ(a.at(1, 0), 4u);
}

} // namespace
