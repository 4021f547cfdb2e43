#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "qgen/corpus.hpp"
#include "qgen/encoder.hpp"
#include "qgen/model.hpp"
#include "qgen/tensor.hpp"

namespace qgen {

// Recurrent decoder state: hidden s, cell, and the previous attention
// context fed into the next step. Fresh states start at s = z, zero cell,
// zero context.
struct DecoderState {
  ad::Tensor s;
  ad::Tensor cell;
  ad::Tensor context;
};

DecoderState initial_decoder_state(const ad::Tensor& z);

// Everything one step produces. p_generate covers the target vocabulary;
// p_final covers it plus the example's extended ids, mixing the copy and
// generate distributions through g_copy.
struct StepOutput {
  ad::Tensor alpha;
  ad::Tensor context;
  ad::Tensor p_generate;
  ad::Tensor g_copy;
  ad::Tensor p_final;
};

// Additive attention of the decoder state over encoder rows H. The optional
// mask (1 = attend) must match H's row count.
std::pair<ad::Tensor, ad::Tensor> attention(
    const ad::Tensor& s, const ad::Tensor& H,
    const std::optional<ad::Tensor>& source_mask, const Model& m);

// One decoder step: input-fed LSTM, attention, generator head, copy switch,
// and the final mixture. copy_ids maps each H row to its target-vocab or
// extended id; n_oov is the number of extended ids in this example.
StepOutput decode_step(DecoderState& state, const ad::Tensor& w_embedding,
                       const ad::Tensor& H,
                       const std::optional<ad::Tensor>& source_mask,
                       const std::vector<std::size_t>& copy_ids,
                       std::size_t n_oov, const Model& m);

// Teacher-forced pass over one batch row: gold-prefixed inputs, one step per
// output position (question words then eos).
struct TeacherForced {
  std::vector<ad::Tensor> states;    // s_t for each output position
  std::vector<ad::Tensor> p_finals;  // distribution for each output position
};

TeacherForced run_teacher_forced(const Batch& batch, std::size_t row,
                                 const EncoderOutput& enc, const Model& m);

struct NllStats {
  std::size_t floored_tokens = 0;
  std::size_t total_tokens = 0;
};

// Per-position losses -log p_final(gold) for one row, floored at 1e-12
// before the log. Floored positions are counted in stats when given.
std::vector<ad::Tensor> example_nll_terms(const Batch& batch, std::size_t row,
                                          const TeacherForced& tf,
                                          NllStats* stats = nullptr);

// Mean of -log p_final(gold) over every unmasked output position in the
// batch.
ad::Tensor sequence_nll(const Batch& batch, const Model& m,
                        NllStats* stats = nullptr);

// Greedy argmax decode, lowest id on ties, pad and sos never emitted. Stops
// at eos or max_len tokens. Extended ids come back as the copied source
// token.
std::vector<std::string> greedy_decode(const Example& example,
                                       const VocabSet& vocabs, const Model& m,
                                       std::size_t max_len);

// Generic length-normalized beam search. step_logprobs maps a prefix of
// emitted ids to log probabilities of the next id; hypotheses end at eos_id
// or max_len and are ranked by mean log probability per emitted token.
// banned ids are never emitted. Returns the best hypothesis without eos.
std::vector<std::size_t> beam_search(
    const std::function<std::vector<double>(const std::vector<std::size_t>&)>&
        step_logprobs,
    std::size_t beam_size, std::size_t max_len, std::size_t eos_id,
    const std::vector<std::size_t>& banned);

std::vector<std::string> beam_decode(const Example& example,
                                     const VocabSet& vocabs, const Model& m,
                                     std::size_t beam_size, std::size_t max_len);

}  // namespace qgen
