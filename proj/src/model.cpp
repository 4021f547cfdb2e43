#include "qgen/model.hpp"

#include "qgen/corpus.hpp"
#include "qgen/error.hpp"

namespace qgen {

namespace {

LstmParams make_lstm(ParamStore& store, const std::string& prefix,
                     std::size_t input, std::size_t hidden, Rng& rng) {
  LstmParams p;
  p.hidden = hidden;
  p.w = store.create(prefix + ".w", {4 * hidden, input + hidden}, rng);
  p.b = store.create_zeros(prefix + ".b", {4 * hidden});
  // Forget block: starting open keeps early cell states from washing out.
  for (std::size_t i = hidden; i < 2 * hidden; ++i) p.b.data()[i] = 1.0;
  return p;
}

}  // namespace

Model build_model(ParamStore& store, const Dims& dims, Rng& rng) {
  if (dims.hidden % 2 != 0) {
    throw ContractError("hidden size must be even, got " +
                        std::to_string(dims.hidden));
  }
  if (dims.src_vocab < Vocab::kReserved || dims.tgt_vocab < Vocab::kReserved) {
    throw ContractError("vocab sizes must include the reserved ids");
  }

  Model m;
  m.dims = dims;
  const std::size_t d = dims.hidden;
  const std::size_t half = d / 2;

  m.src_word_emb = store.create("s2s.enc.word_emb", {dims.src_vocab, dims.word_dim}, rng);
  m.pos_emb = store.create("s2s.enc.pos_emb", {dims.pos_vocab, dims.feat_dim}, rng);
  m.ner_emb = store.create("s2s.enc.ner_emb", {dims.ner_vocab, dims.feat_dim}, rng);
  m.case_emb = store.create("s2s.enc.case_emb", {dims.case_vocab, dims.feat_dim}, rng);
  m.bio_emb = store.create("s2s.enc.bio_emb", {kBioTags, dims.feat_dim}, rng);
  m.enc_fwd = make_lstm(store, "s2s.enc.fwd", dims.input_dim(), half, rng);
  m.enc_bwd = make_lstm(store, "s2s.enc.bwd", dims.input_dim(), half, rng);
  m.fuse_match_w = store.create("s2s.enc.fuse.match_w", {d, 2 * d}, rng);
  m.fuse_match_b = store.create_zeros("s2s.enc.fuse.match_b", {d});
  m.fuse_answer_w = store.create("s2s.enc.fuse.answer_w", {d, 2 * d}, rng);
  m.fuse_answer_b = store.create_zeros("s2s.enc.fuse.answer_b", {d});

  m.tgt_word_emb = store.create("s2s.dec.word_emb", {dims.tgt_vocab, dims.word_dim}, rng);
  m.dec_cell = make_lstm(store, "s2s.dec.cell", dims.word_dim + d, d, rng);
  m.att_memory_w = store.create("s2s.dec.att.memory_w", {d, d}, rng);
  m.att_query_w = store.create("s2s.dec.att.query_w", {d, d}, rng);
  m.att_score_v = store.create("s2s.dec.att.score_v", {d}, rng);
  m.gen_w1 = store.create("s2s.dec.gen.w1", {d, 2 * d}, rng);
  m.gen_b1 = store.create_zeros("s2s.dec.gen.b1", {d});
  m.gen_w2 = store.create("s2s.dec.gen.w2", {dims.tgt_vocab, d}, rng);
  m.gen_b2 = store.create_zeros("s2s.dec.gen.b2", {dims.tgt_vocab});
  m.copy_state_w = store.create("s2s.dec.copy.state_w", {d}, rng);
  m.copy_context_w = store.create("s2s.dec.copy.context_w", {d}, rng);
  m.copy_bias = store.create_zeros("s2s.dec.copy.bias", {});

  m.sm_w = store.create("sm.w", {2, 2 * d}, rng);
  m.sm_b = store.create_zeros("sm.b", {2});

  m.ap_sim_h = store.create("ap.sim.h_w", {d}, rng);
  m.ap_sim_s = store.create("ap.sim.s_w", {d}, rng);
  m.ap_sim_hs = store.create("ap.sim.hs_w", {d}, rng);
  m.ap_mlp_w1 = store.create("ap.mlp.w1", {d, 4 * d}, rng);
  m.ap_mlp_b1 = store.create_zeros("ap.mlp.b1", {d});
  m.ap_mlp_w2 = store.create("ap.mlp.w2", {d, d}, rng);
  m.ap_mlp_b2 = store.create_zeros("ap.mlp.b2", {d});
  m.ap_m1_fwd = make_lstm(store, "ap.m1.fwd", d, half, rng);
  m.ap_m1_bwd = make_lstm(store, "ap.m1.bwd", d, half, rng);
  m.ap_m2_fwd = make_lstm(store, "ap.m2.fwd", d, half, rng);
  m.ap_m2_bwd = make_lstm(store, "ap.m2.bwd", d, half, rng);
  m.ap_p1_w = store.create("ap.p1.w", {2 * d}, rng);
  m.ap_p2_w = store.create("ap.p2.w", {2 * d}, rng);
  return m;
}

}  // namespace qgen
