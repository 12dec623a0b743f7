#include "endoclass/ensemble.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "endoclass/metrics.hpp"
#include "endoclass/nn.hpp"

namespace endoclass {
namespace ensemble {

void ModelOutputs::validate() const {
    if (model_id.empty()) throw std::invalid_argument("ensemble: empty model_id");
    if (image_ids.size() != values.rows)
        throw std::invalid_argument("ensemble: model '" + model_id +
                                    "' row count does not match its image ids");
    if (values.cols < 2)
        throw std::invalid_argument("ensemble: model '" + model_id + "' needs >= 2 classes");
    std::unordered_map<std::string, int> seen;
    for (const auto& id : image_ids)
        if (++seen[id] > 1)
            throw std::invalid_argument("ensemble: duplicate image id '" + id + "' in model '" +
                                        model_id + "'");
}

std::vector<ModelOutputs> align(std::vector<ModelOutputs> outputs) {
    if (outputs.empty()) throw std::invalid_argument("ensemble: no members");
    for (const auto& m : outputs) m.validate();
    const auto& ref = outputs.front();
    for (std::size_t m = 1; m < outputs.size(); ++m) {
        auto& member = outputs[m];
        if (member.image_ids.size() != ref.image_ids.size())
            throw std::invalid_argument("ensemble: model '" + member.model_id +
                                        "' covers a different number of images than '" +
                                        ref.model_id + "'");
        std::unordered_map<std::string, std::size_t> where;
        where.reserve(member.image_ids.size());
        for (std::size_t r = 0; r < member.image_ids.size(); ++r)
            where.emplace(member.image_ids[r], r);

        Matrix reordered(member.values.rows, member.values.cols);
        std::vector<std::string> ids(ref.image_ids.size());
        for (std::size_t r = 0; r < ref.image_ids.size(); ++r) {
            auto it = where.find(ref.image_ids[r]);
            if (it == where.end())
                throw std::invalid_argument("ensemble: model '" + member.model_id +
                                            "' is missing image id '" + ref.image_ids[r] + "'");
            ids[r] = ref.image_ids[r];
            for (std::size_t c = 0; c < member.values.cols; ++c)
                reordered(r, c) = member.values(it->second, c);
        }
        member.image_ids = std::move(ids);
        member.values = std::move(reordered);
    }
    return outputs;
}

ProbMatrix ensemble_average(const std::vector<ModelOutputs>& aligned) {
    if (aligned.empty()) throw std::invalid_argument("ensemble: no members");
    const std::size_t n = aligned.front().values.rows;
    const std::size_t k = aligned.front().values.cols;
    for (const auto& m : aligned) {
        m.validate();
        if (m.values.cols != k)
            throw std::invalid_argument("ensemble: model '" + m.model_id +
                                        "' has a different class count");
        if (m.values.rows != n || m.image_ids != aligned.front().image_ids)
            throw std::invalid_argument("ensemble: members are not aligned; align() them first");
    }

    // sum in model_id-sorted order so the mean is independent of list order
    std::vector<std::size_t> order(aligned.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return aligned[a].model_id < aligned[b].model_id;
    });

    ProbMatrix mean(n, k);
    for (std::size_t idx : order) {
        const auto& m = aligned[idx];
        ProbMatrix probs = m.values_are_probs ? m.values : nn::softmax(m.values);
        if (m.values_are_probs && !is_prob_matrix(probs, 1e-6))
            throw std::invalid_argument("ensemble: model '" + m.model_id +
                                        "' claims probabilities but rows do not sum to 1");
        for (std::size_t i = 0; i < mean.data.size(); ++i) mean.data[i] += probs.data[i];
    }
    const double inv = 1.0 / static_cast<double>(aligned.size());
    for (double& v : mean.data) v *= inv;
    return mean;
}

std::vector<int> predict_labels(const ProbMatrix& probs) { return metrics::argmax_rows(probs); }

}  // namespace ensemble
}  // namespace endoclass
