#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "endoclass/catalog.hpp"
#include "endoclass/matrix.hpp"

namespace endoclass {
namespace metrics {

// counts(i, j) = number of samples with true class i predicted as class j.
struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::int64_t> counts;

    explicit ConfusionMatrix(std::size_t classes) : k(classes), counts(classes * classes, 0) {}
    std::int64_t& at(std::size_t t, std::size_t p) { return counts[t * k + p]; }
    std::int64_t at(std::size_t t, std::size_t p) const { return counts[t * k + p]; }
    std::int64_t total() const {
        std::int64_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double specificity = 0.0;
    // One-vs-rest AUC; absent when the class has no positives or no negatives
    // in the truth (such classes are excluded from mean_auc, never scored 0.5).
    std::optional<double> auc;
};

struct MetricsReport {
    std::vector<std::string> class_names;  // catalog order
    std::vector<ClassMetrics> per_class;
    double balanced_accuracy = 0.0;  // mean recall over classes with >=1 true sample
    double mean_auc = 0.0;           // mean over classes with a defined AUC
    double combined_score = 0.0;     // (balanced_accuracy + mean_auc) / 2
    // Macro aggregates over all classes, 0/0 -> 0 convention.
    double macro_precision = 0.0;
    double macro_f1 = 0.0;
    double macro_specificity = 0.0;
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& truth,
                          std::size_t k);

// One-vs-rest precision/recall/f1/specificity per class; 0/0 cases yield 0.
std::vector<ClassMetrics> per_class_prfs(const ConfusionMatrix& cm);

// Unweighted mean recall over classes that appear in the truth.
double balanced_accuracy(const ConfusionMatrix& cm);

// Mann-Whitney AUC with mid-ranked ties: P(score_pos > score_neg) + P(tie)/2.
// Returns nullopt when positives or negatives are absent.
std::optional<double> auc_ovr(const std::vector<double>& scores,
                              const std::vector<char>& is_positive);

// Mean one-vs-rest AUC over classes where it is defined. Throws when no class
// has a defined AUC.
double mean_auc(const ProbMatrix& probs, const std::vector<int>& truth);

double combined_score(double bal_acc, double mean_auc_score);

// Row argmax with ties broken toward the lowest index.
std::vector<int> argmax_rows(const ProbMatrix& probs);

// Full evaluation: argmax predictions, confusion, per-class metrics, per-class
// AUCs and the aggregate block.
MetricsReport evaluate(const ProbMatrix& probs, const std::vector<int>& truth,
                       const ClassCatalog& catalog);

}  // namespace metrics
}  // namespace endoclass
