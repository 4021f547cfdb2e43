#include "qgen/encoder.hpp"

#include <tuple>
#include <vector>

#include "qgen/error.hpp"
#include "qgen/ops.hpp"

namespace qgen {

using ad::Tensor;

Tensor embed_source(const Batch& batch, std::size_t row, const Model& m) {
  if (row >= batch.batch_size) {
    throw IndexError("batch row " + std::to_string(row) + " out of range for " +
                     std::to_string(batch.batch_size));
  }
  const std::size_t len = batch.source_lens[row];
  std::vector<Tensor> rows;
  rows.reserve(batch.max_source_len);
  for (std::size_t j = 0; j < batch.max_source_len; ++j) {
    if (j < len) {
      rows.push_back(ad::concat({ad::row(m.src_word_emb, batch.source_ids[row][j]),
                                 ad::row(m.pos_emb, batch.pos_ids[row][j]),
                                 ad::row(m.ner_emb, batch.ner_ids[row][j]),
                                 ad::row(m.case_emb, batch.case_ids[row][j]),
                                 ad::row(m.bio_emb, batch.bio_ids[row][j])},
                                0));
    } else {
      rows.push_back(Tensor::zeros({m.dims.input_dim()}));
    }
  }
  return ad::stack_rows(rows);
}

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmParams& p) {
  const std::size_t h = p.hidden;
  Tensor gates = ad::affine(p.w, ad::concat({x, h_prev}, 0), p.b);
  Tensor i = ad::sigmoid(ad::slice(gates, 0, h));
  Tensor f = ad::sigmoid(ad::slice(gates, h, h));
  Tensor o = ad::sigmoid(ad::slice(gates, 2 * h, h));
  Tensor g = ad::tanh_op(ad::slice(gates, 3 * h, h));
  Tensor c = ad::add(ad::mul(f, c_prev), ad::mul(i, g));
  return {ad::mul(o, ad::tanh_op(c)), c};
}

Tensor bilstm_encode(const Tensor& embedded, std::size_t real_len,
                     const LstmParams& fwd, const LstmParams& bwd) {
  const std::size_t m = embedded.rows();
  if (real_len == 0 || real_len > m) {
    throw ContractError("bilstm_encode: real length " +
                        std::to_string(real_len) + " out of range for " +
                        ad::shape_str(embedded.shape()));
  }
  const std::size_t half = fwd.hidden;

  std::vector<Tensor> fwd_states(real_len), bwd_states(real_len);
  Tensor h = Tensor::zeros({half});
  Tensor c = Tensor::zeros({half});
  for (std::size_t j = 0; j < real_len; ++j) {
    std::tie(h, c) = lstm_cell(ad::row(embedded, j), h, c, fwd);
    fwd_states[j] = h;
  }
  h = Tensor::zeros({bwd.hidden});
  c = Tensor::zeros({bwd.hidden});
  for (std::size_t j = real_len; j-- > 0;) {
    std::tie(h, c) = lstm_cell(ad::row(embedded, j), h, c, bwd);
    bwd_states[j] = h;
  }

  std::vector<Tensor> rows;
  rows.reserve(m);
  for (std::size_t j = 0; j < real_len; ++j) {
    rows.push_back(ad::concat({fwd_states[j], bwd_states[j]}, 0));
  }
  for (std::size_t j = real_len; j < m; ++j) {
    rows.push_back(Tensor::zeros({fwd.hidden + bwd.hidden}));
  }
  return ad::stack_rows(rows);
}

Tensor gated_fusion(const Tensor& h_m, const Tensor& h_a, const Model& m) {
  Tensor both = ad::concat({h_m, h_a}, 0);
  Tensor g_m = ad::sigmoid(ad::affine(m.fuse_match_w, both, m.fuse_match_b));
  Tensor g_a = ad::sigmoid(ad::affine(m.fuse_answer_w, both, m.fuse_answer_b));
  return ad::add(ad::mul(g_m, h_m), ad::mul(g_a, h_a));
}

EncoderOutput encode_example(const Batch& batch, std::size_t row, const Model& m) {
  const std::size_t len = batch.source_lens[row];
  Tensor embedded = embed_source(batch, row, m);
  Tensor full = bilstm_encode(embedded, len, m.enc_fwd, m.enc_bwd);

  EncoderOutput out;
  if (len == full.rows()) {
    out.H = full;
  } else {
    std::vector<std::size_t> real(len);
    for (std::size_t j = 0; j < len; ++j) real[j] = j;
    out.H = ad::gather_rows(full, real);
  }
  out.h_m = ad::row(out.H, len - 1);
  out.h_a = ad::row(out.H, batch.answer_starts[row]);
  out.z = gated_fusion(out.h_m, out.h_a, m);
  return out;
}

}  // namespace qgen
