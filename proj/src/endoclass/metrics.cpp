#include "endoclass/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace endoclass {
namespace metrics {

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& truth,
                          std::size_t k) {
    if (preds.size() != truth.size())
        throw std::invalid_argument("confusion: preds and truth length mismatch");
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        int t = truth[i], p = preds[i];
        if (t < 0 || static_cast<std::size_t>(t) >= k || p < 0 || static_cast<std::size_t>(p) >= k)
            throw std::invalid_argument("confusion: label out of range");
        cm.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p))++;
    }
    return cm;
}

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

std::vector<ClassMetrics> per_class_prfs(const ConfusionMatrix& cm) {
    const std::size_t k = cm.k;
    const double total = static_cast<double>(cm.total());
    std::vector<ClassMetrics> out(k);
    for (std::size_t c = 0; c < k; ++c) {
        double tp = static_cast<double>(cm.at(c, c));
        double fn = 0.0, fp = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j == c) continue;
            fn += static_cast<double>(cm.at(c, j));
            fp += static_cast<double>(cm.at(j, c));
        }
        double tn = total - tp - fn - fp;
        ClassMetrics m;
        m.precision = safe_div(tp, tp + fp);
        m.recall = safe_div(tp, tp + fn);
        m.f1 = safe_div(2.0 * m.precision * m.recall, m.precision + m.recall);
        // No negatives at all only happens in a one-class confusion; call that 1.
        m.specificity = (tn + fp == 0.0) ? 1.0 : tn / (tn + fp);
        out[c] = m;
    }
    return out;
}

double balanced_accuracy(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw std::invalid_argument("balanced_accuracy: empty confusion matrix");
    double sum = 0.0;
    int present = 0;
    for (std::size_t c = 0; c < cm.k; ++c) {
        std::int64_t row = 0;
        for (std::size_t j = 0; j < cm.k; ++j) row += cm.at(c, j);
        if (row == 0) continue;  // class absent from truth, excluded from the mean
        sum += static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
        present++;
    }
    return sum / static_cast<double>(present);
}

std::optional<double> auc_ovr(const std::vector<double>& scores,
                              const std::vector<char>& is_positive) {
    if (scores.size() != is_positive.size())
        throw std::invalid_argument("auc_ovr: scores and labels length mismatch");
    for (double s : scores)
        if (std::isnan(s)) throw std::invalid_argument("auc_ovr: NaN score");

    std::size_t n_pos = 0;
    for (char p : is_positive) n_pos += (p != 0);
    std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    // Mann-Whitney U through mid-ranks.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        // ranks are 1-based; ties share the average rank of their block
        double mid_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t t = i; t <= j; ++t)
            if (is_positive[order[t]]) rank_sum_pos += mid_rank;
        i = j + 1;
    }
    double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double mean_auc(const ProbMatrix& probs, const std::vector<int>& truth) {
    if (probs.rows != truth.size())
        throw std::invalid_argument("mean_auc: probs rows and truth length mismatch");
    double sum = 0.0;
    int defined = 0;
    std::vector<double> scores(probs.rows);
    std::vector<char> pos(probs.rows);
    for (std::size_t c = 0; c < probs.cols; ++c) {
        for (std::size_t r = 0; r < probs.rows; ++r) {
            scores[r] = probs(r, c);
            pos[r] = truth[r] == static_cast<int>(c) ? 1 : 0;
        }
        if (auto a = auc_ovr(scores, pos)) {
            sum += *a;
            defined++;
        }
    }
    if (defined == 0) throw std::invalid_argument("mean_auc: no class has a defined AUC");
    return sum / static_cast<double>(defined);
}

double combined_score(double bal_acc, double mean_auc_score) {
    if (bal_acc < 0.0 || bal_acc > 1.0 || mean_auc_score < 0.0 || mean_auc_score > 1.0)
        throw std::invalid_argument("combined_score: inputs must be in [0,1]");
    return (bal_acc + mean_auc_score) / 2.0;
}

std::vector<int> argmax_rows(const ProbMatrix& probs) {
    std::vector<int> out(probs.rows, 0);
    for (std::size_t r = 0; r < probs.rows; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols; ++c)
            if (probs(r, c) > probs(r, best)) best = c;
        out[r] = static_cast<int>(best);
    }
    return out;
}

MetricsReport evaluate(const ProbMatrix& probs, const std::vector<int>& truth,
                       const ClassCatalog& catalog) {
    const std::size_t k = catalog.size();
    if (probs.cols != k) throw std::invalid_argument("evaluate: probs columns != catalog size");
    if (probs.rows != truth.size())
        throw std::invalid_argument("evaluate: probs rows != truth length");
    if (probs.rows == 0) throw std::invalid_argument("evaluate: empty input");

    std::vector<int> preds = argmax_rows(probs);
    ConfusionMatrix cm = confusion(preds, truth, k);

    MetricsReport report;
    report.class_names = catalog.names;
    report.per_class = per_class_prfs(cm);

    std::vector<double> scores(probs.rows);
    std::vector<char> pos(probs.rows);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t r = 0; r < probs.rows; ++r) {
            scores[r] = probs(r, c);
            pos[r] = truth[r] == static_cast<int>(c) ? 1 : 0;
        }
        report.per_class[c].auc = auc_ovr(scores, pos);
    }

    report.balanced_accuracy = balanced_accuracy(cm);
    double auc_sum = 0.0;
    int auc_defined = 0;
    for (const auto& m : report.per_class)
        if (m.auc) {
            auc_sum += *m.auc;
            auc_defined++;
        }
    if (auc_defined == 0) throw std::invalid_argument("evaluate: no class has a defined AUC");
    report.mean_auc = auc_sum / static_cast<double>(auc_defined);
    report.combined_score = combined_score(report.balanced_accuracy, report.mean_auc);

    double p_sum = 0.0, f_sum = 0.0, s_sum = 0.0;
    for (const auto& m : report.per_class) {
        p_sum += m.precision;
        f_sum += m.f1;
        s_sum += m.specificity;
    }
    report.macro_precision = p_sum / static_cast<double>(k);
    report.macro_f1 = f_sum / static_cast<double>(k);
    report.macro_specificity = s_sum / static_cast<double>(k);
    return report;
}

}  // namespace metrics
}  // namespace endoclass
