#pragma once

#include <iomanip>
#include <sstream>

#include "swinecat/common.hpp"

namespace swinecat {

// ---------------------------------------------------------------------------
// Confusion-matrix evaluation: accuracy plus macro- and weighted-averaged
// precision, recall, and F1. Zero-division convention: a class with no
// predicted (or no true) samples gets precision (or recall) 0, and F1 0.
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    size_t num_classes = 0;
    std::vector<size_t> counts; // rows = true class, cols = predicted

    explicit ConfusionMatrix(size_t k) : num_classes(k), counts(k * k, 0) {}

    size_t& at(size_t true_class, size_t predicted) {
        return counts[true_class * num_classes + predicted];
    }
    size_t at(size_t true_class, size_t predicted) const {
        return counts[true_class * num_classes + predicted];
    }
    size_t total() const {
        size_t n = 0;
        for (size_t c : counts) n += c;
        return n;
    }
    void merge(const ConfusionMatrix& other) {
        if (other.num_classes != num_classes) throw ContractError("confusion merge: size mismatch");
        for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    }
};

inline ConfusionMatrix confuse(const std::vector<int>& preds, const std::vector<int>& labels,
                               size_t k) {
    if (preds.size() != labels.size()) {
        throw ContractError("confuse: " + std::to_string(preds.size()) + " predictions vs " +
                            std::to_string(labels.size()) + " labels");
    }
    ConfusionMatrix cm(k);
    for (size_t i = 0; i < preds.size(); ++i) {
        int p = preds[i], t = labels[i];
        if (p < 0 || t < 0 || static_cast<size_t>(p) >= k || static_cast<size_t>(t) >= k) {
            throw ContractError("confuse: value outside [0, " + std::to_string(k) + ") at index " +
                                std::to_string(i));
        }
        cm.at(static_cast<size_t>(t), static_cast<size_t>(p)) += 1;
    }
    return cm;
}

struct ClassMetrics {
    double precision = 0, recall = 0, f1 = 0;
    size_t support = 0;
};

struct MetricsReport {
    double accuracy = 0;
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
    double weighted_precision = 0, weighted_recall = 0, weighted_f1 = 0;
    size_t total = 0;
};

inline MetricsReport report(const ConfusionMatrix& cm) {
    size_t k = cm.num_classes;
    size_t total = cm.total();
    if (total == 0) throw ContractError("report: empty confusion matrix");
    MetricsReport rep;
    rep.total = total;
    rep.per_class.resize(k);
    size_t trace = 0;
    for (size_t c = 0; c < k; ++c) {
        size_t tp = cm.at(c, c);
        trace += tp;
        size_t pred_c = 0, true_c = 0;
        for (size_t o = 0; o < k; ++o) {
            pred_c += cm.at(o, c);
            true_c += cm.at(c, o);
        }
        ClassMetrics& m = rep.per_class[c];
        m.support = true_c;
        m.precision = pred_c ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
        m.recall = true_c ? static_cast<double>(tp) / static_cast<double>(true_c) : 0.0;
        m.f1 = (m.precision + m.recall) > 0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        rep.macro_precision += m.precision;
        rep.macro_recall += m.recall;
        rep.macro_f1 += m.f1;
        double w = static_cast<double>(true_c) / static_cast<double>(total);
        rep.weighted_precision += w * m.precision;
        rep.weighted_recall += w * m.recall;
        rep.weighted_f1 += w * m.f1;
    }
    rep.accuracy = static_cast<double>(trace) / static_cast<double>(total);
    rep.macro_precision /= static_cast<double>(k);
    rep.macro_recall /= static_cast<double>(k);
    rep.macro_f1 /= static_cast<double>(k);
    return rep;
}

/// Aligned text table: percentages for accuracy/precision/recall, F1 as a
/// 4-decimal fraction, one row per class plus the macro/weighted summary.
inline std::string render_report(const MetricsReport& rep,
                                 const std::vector<std::string>& names = {}) {
    std::ostringstream os;
    os << std::fixed;
    size_t name_w = 9;
    for (const auto& n : names) name_w = std::max(name_w, n.size());
    os << std::left << std::setw(static_cast<int>(name_w + 2)) << "class"
       << std::right << std::setw(12) << "precision%" << std::setw(10) << "recall%"
       << std::setw(9) << "f1" << std::setw(10) << "support" << '\n';
    for (size_t c = 0; c < rep.per_class.size(); ++c) {
        const auto& m = rep.per_class[c];
        std::string label = c < names.size() ? names[c] : "class_" + std::to_string(c);
        os << std::left << std::setw(static_cast<int>(name_w + 2)) << label << std::right
           << std::setw(12) << std::setprecision(2) << 100.0 * m.precision
           << std::setw(10) << std::setprecision(2) << 100.0 * m.recall
           << std::setw(9) << std::setprecision(4) << m.f1
           << std::setw(10) << m.support << '\n';
    }
    os << std::left << std::setw(static_cast<int>(name_w + 2)) << "macro" << std::right
       << std::setw(12) << std::setprecision(2) << 100.0 * rep.macro_precision
       << std::setw(10) << std::setprecision(2) << 100.0 * rep.macro_recall
       << std::setw(9) << std::setprecision(4) << rep.macro_f1
       << std::setw(10) << rep.total << '\n';
    os << std::left << std::setw(static_cast<int>(name_w + 2)) << "weighted" << std::right
       << std::setw(12) << std::setprecision(2) << 100.0 * rep.weighted_precision
       << std::setw(10) << std::setprecision(2) << 100.0 * rep.weighted_recall
       << std::setw(9) << std::setprecision(4) << rep.weighted_f1
       << std::setw(10) << rep.total << '\n';
    os << "accuracy " << std::setprecision(2) << 100.0 * rep.accuracy << "%\n";
    return os.str();
}

/// Line-oriented key=value rendering for machine consumption.
inline std::string render_report_kv(const MetricsReport& rep) {
    std::ostringstream os;
    os << std::setprecision(12);
    os << "accuracy=" << rep.accuracy << '\n';
    os << "macro_precision=" << rep.macro_precision << '\n';
    os << "macro_recall=" << rep.macro_recall << '\n';
    os << "macro_f1=" << rep.macro_f1 << '\n';
    os << "weighted_precision=" << rep.weighted_precision << '\n';
    os << "weighted_recall=" << rep.weighted_recall << '\n';
    os << "weighted_f1=" << rep.weighted_f1 << '\n';
    os << "total=" << rep.total << '\n';
    for (size_t c = 0; c < rep.per_class.size(); ++c) {
        const auto& m = rep.per_class[c];
        os << "class" << c << "_precision=" << m.precision << '\n';
        os << "class" << c << "_recall=" << m.recall << '\n';
        os << "class" << c << "_f1=" << m.f1 << '\n';
        os << "class" << c << "_support=" << m.support << '\n';
    }
    return os.str();
}

} // namespace swinecat
