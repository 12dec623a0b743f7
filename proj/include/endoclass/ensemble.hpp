#pragma once

#include <string>
#include <vector>

#include "endoclass/matrix.hpp"

namespace endoclass {
namespace ensemble {

// One model's outputs over a dataset. `values` holds logits unless
// values_are_probs is set; softmax is applied internally where needed.
struct ModelOutputs {
    std::string model_id;
    std::vector<std::string> image_ids;
    Matrix values;
    bool values_are_probs = false;

    void validate() const;
};

// Re-orders every member to the first member's image-id order. All members
// must cover the same id set; a missing id names both the id and the model.
std::vector<ModelOutputs> align(std::vector<ModelOutputs> outputs);

// Elementwise arithmetic mean of the members' softmax probabilities. Members
// are summed in model_id-sorted order so the result is independent of the
// argument order, bit for bit.
ProbMatrix ensemble_average(const std::vector<ModelOutputs>& aligned);

// Row argmax, ties toward the lowest index.
std::vector<int> predict_labels(const ProbMatrix& probs);

}  // namespace ensemble
}  // namespace endoclass
