#pragma once

#include <utility>
#include <vector>

#include "qgen/model.hpp"
#include "qgen/tensor.hpp"

namespace qgen {

// Trilinear similarity between every encoder row h_i and decoder row s_j:
// sim(i, j) = w_h.h_i + w_s.s_j + w_hs.(h_i o s_j). Shape [M, N].
ad::Tensor ap_similarity(const ad::Tensor& H, const ad::Tensor& S, const Model& m);

// Question-aware sentence rows: row-softmax of the similarity over question
// positions, then weighted sums of S. Shape [M, D].
ad::Tensor s2q_attention(const ad::Tensor& H, const ad::Tensor& S, const Model& m);

// Single question-focused sentence summary: softmax over positions of the
// per-row similarity maxima, applied to H. Conceptually tiled across rows;
// returned untiled as a D-vector.
ad::Tensor q2s_attention(const ad::Tensor& H, const ad::Tensor& S, const Model& m);

struct SpanDistributions {
  ad::Tensor p1;  // start distribution over source positions
  ad::Tensor p2;  // end distribution
};

// Full head: fuse [H, H~, H o H~, H o s~] through the MLP, run the two
// stacked modeling BiLSTMs, and score each position for span start and end.
SpanDistributions span_logits(const ad::Tensor& H, const ad::Tensor& S,
                              const Model& m);

// Mean over examples of -(log p1[start] + log p2[end]), floored at 1e-12.
ad::Tensor ap_loss(const std::vector<SpanDistributions>& dists,
                   const std::vector<std::size_t>& answer_starts,
                   const std::vector<std::size_t>& answer_ends);

// Pair (i, j), i <= j, maximizing p1[i]*p2[j]; ties prefer the smallest i,
// then the smallest j.
std::pair<std::size_t, std::size_t> predict_span(const std::vector<double>& p1,
                                                 const std::vector<double>& p2);

}  // namespace qgen
