#pragma once

#include <vector>

#include "qgen/corpus.hpp"
#include "qgen/model.hpp"
#include "qgen/tensor.hpp"

namespace qgen {

// State at the step that predicts the last question word; with one-based
// step numbering s_1..s_N this is s_N. states must come from a teacher-forced
// pass over the same question.
ad::Tensor question_vector(const std::vector<ad::Tensor>& decoder_states,
                           std::size_t question_len);

// Two-way softmax over the fused sentence vector and question vector; index 1
// is the matching class.
ad::Tensor sm_forward(const ad::Tensor& z, const ad::Tensor& s_n, const Model& m);

// Mean cross entropy of the pair labels. zs and question_vectors are indexed
// by batch row. An empty pair list yields a constant zero and sets
// empty_flag when given.
ad::Tensor sm_loss(const SmPairs& pairs, const std::vector<ad::Tensor>& zs,
                   const std::vector<ad::Tensor>& question_vectors,
                   const Model& m, bool* empty_flag = nullptr);

// Fraction of pairs whose argmax class equals the label.
double sm_accuracy(const SmPairs& pairs, const std::vector<ad::Tensor>& zs,
                   const std::vector<ad::Tensor>& question_vectors,
                   const Model& m);

}  // namespace qgen
