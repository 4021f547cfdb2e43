#pragma once

#include <utility>

#include "qgen/corpus.hpp"
#include "qgen/model.hpp"
#include "qgen/tensor.hpp"

namespace qgen {

// Encoder view of one batch row. H holds only the real source positions
// (one row per token, no padding); h_a is the row at answer_start, h_m the
// last row, z the gate-fused sentence vector the decoder starts from.
struct EncoderOutput {
  ad::Tensor H;
  ad::Tensor h_a;
  ad::Tensor h_m;
  ad::Tensor z;
};

// Feature-enriched embedding of one batch row: [max_source_len, input_dim],
// real positions are the concatenation of the word, POS, NER, case and
// answer-tag lookups, padded positions are exact zero rows.
ad::Tensor embed_source(const Batch& batch, std::size_t row, const Model& m);

// One LSTM step. x is the input vector, returns (h, c).
std::pair<ad::Tensor, ad::Tensor> lstm_cell(const ad::Tensor& x,
                                            const ad::Tensor& h_prev,
                                            const ad::Tensor& c_prev,
                                            const LstmParams& p);

// Runs both directions over the first real_len rows of embedded and
// concatenates them per position. Rows at real_len and beyond come back as
// zero rows, matching the embedding contract for padding.
ad::Tensor bilstm_encode(const ad::Tensor& embedded, std::size_t real_len,
                         const LstmParams& fwd, const LstmParams& bwd);

// z = g_m*h_m + g_a*h_a with elementwise sigmoid gates computed from
// [h_m; h_a].
ad::Tensor gated_fusion(const ad::Tensor& h_m, const ad::Tensor& h_a,
                        const Model& m);

EncoderOutput encode_example(const Batch& batch, std::size_t row, const Model& m);

}  // namespace qgen
