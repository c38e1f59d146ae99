#pragma once

#include <cstddef>
#include <cstdint>

#include "disagree/dataset.hpp"

namespace disagree {

/// Planted-signal corpus with a fixed annotator panel.
///
/// Texts are filler pseudo-words plus zero or more trigger words. Trigger
/// words come from three groups: one every annotator reacts to, one only
/// the first half of the panel reacts to, one only the second half. An
/// annotator's label is 1 iff the text holds a trigger from a group they
/// react to, flipped with probability `label_noise`. Several triggers from
/// one group do not add up, so soft labels are not additive in the logit.
/// With `with_aux`, each annotator's `offensive` and `aggressive` labels are
/// drawn conditionally on that annotator's own label.
struct SyntheticConfig {
    std::size_t n_train = 800;
    std::size_t n_dev = 150;
    std::size_t n_eval = 150;
    std::size_t n_annotators = 6;
    std::uint64_t seed = 1;
    double label_noise = 0.08;
    bool with_aux = true;
    // P(aux = 1 | own label = 1) and P(aux = 1 | own label = 0)
    double offensive_given_pos = 0.95;
    double offensive_given_neg = 0.10;
    double aggressive_given_pos = 0.60;
    double aggressive_given_neg = 0.05;
};

struct SyntheticSplits {
    Dataset train;
    Dataset dev;
    Dataset eval;
};

SyntheticSplits make_planted(const SyntheticConfig& cfg);

}  // namespace disagree
