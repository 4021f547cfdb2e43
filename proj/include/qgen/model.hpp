#pragma once

#include <cstddef>

#include "qgen/params.hpp"
#include "qgen/rng.hpp"
#include "qgen/tensor.hpp"

namespace qgen {

// Model widths. hidden is the full bidirectional state size D; each LSTM
// direction runs at D/2, so hidden must be even.
struct Dims {
  std::size_t word_dim = 300;
  std::size_t feat_dim = 16;
  std::size_t hidden = 512;

  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t pos_vocab = 0;
  std::size_t ner_vocab = 0;
  std::size_t case_vocab = 0;

  // Word embedding plus POS, NER, case and answer-position features.
  std::size_t input_dim() const { return word_dim + 4 * feat_dim; }
};

// Fused cell parameters: w is [4h, in+h] with gate blocks ordered input,
// forget, output, candidate; b is [4h] with the forget block set to 1 at init.
struct LstmParams {
  ad::Tensor w;
  ad::Tensor b;
  std::size_t hidden = 0;
};

struct Model {
  Dims dims;

  ad::Tensor src_word_emb;
  ad::Tensor pos_emb;
  ad::Tensor ner_emb;
  ad::Tensor case_emb;
  ad::Tensor bio_emb;
  LstmParams enc_fwd;
  LstmParams enc_bwd;
  ad::Tensor fuse_match_w;
  ad::Tensor fuse_match_b;
  ad::Tensor fuse_answer_w;
  ad::Tensor fuse_answer_b;

  ad::Tensor tgt_word_emb;
  LstmParams dec_cell;
  ad::Tensor att_memory_w;  // applied from the right onto H rows
  ad::Tensor att_query_w;   // applied to the decoder state
  ad::Tensor att_score_v;
  ad::Tensor gen_w1;
  ad::Tensor gen_b1;
  ad::Tensor gen_w2;
  ad::Tensor gen_b2;
  ad::Tensor copy_state_w;
  ad::Tensor copy_context_w;
  ad::Tensor copy_bias;

  ad::Tensor sm_w;
  ad::Tensor sm_b;

  ad::Tensor ap_sim_h;
  ad::Tensor ap_sim_s;
  ad::Tensor ap_sim_hs;
  ad::Tensor ap_mlp_w1;
  ad::Tensor ap_mlp_b1;
  ad::Tensor ap_mlp_w2;
  ad::Tensor ap_mlp_b2;
  LstmParams ap_m1_fwd;
  LstmParams ap_m1_bwd;
  LstmParams ap_m2_fwd;
  LstmParams ap_m2_bwd;
  ad::Tensor ap_p1_w;
  ad::Tensor ap_p2_w;
};

// Registers every parameter in store (prefixes s2s.enc., s2s.dec., sm., ap.)
// and returns handles. Matrices start uniform(-0.1, 0.1), biases zero except
// LSTM forget blocks.
Model build_model(ParamStore& store, const Dims& dims, Rng& rng);

}  // namespace qgen
