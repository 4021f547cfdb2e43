#include "qgen/answer_position.hpp"

#include "qgen/encoder.hpp"
#include "qgen/error.hpp"
#include "qgen/ops.hpp"

namespace qgen {

using ad::Tensor;

Tensor ap_similarity(const Tensor& H, const Tensor& S, const Model& m) {
  Tensor base = ad::outer_add(ad::matvec(H, m.ap_sim_h), ad::matvec(S, m.ap_sim_s));
  Tensor cross = ad::matmul(ad::mul_rowvec(H, m.ap_sim_hs), ad::transpose(S));
  return ad::add(base, cross);
}

Tensor s2q_attention(const Tensor& H, const Tensor& S, const Model& m) {
  Tensor weights = ad::softmax(ap_similarity(H, S, m), 1);
  return ad::matmul(weights, S);
}

Tensor q2s_attention(const Tensor& H, const Tensor& S, const Model& m) {
  Tensor peaks = ad::rowmax(ap_similarity(H, S, m));
  Tensor b = ad::softmax(peaks, 0);
  return ad::vecmat(b, H);
}

SpanDistributions span_logits(const Tensor& H, const Tensor& S, const Model& m) {
  Tensor h_tilde = s2q_attention(H, S, m);
  Tensor s_tilde = q2s_attention(H, S, m);

  Tensor fused = ad::concat(
      {H, h_tilde, ad::mul(H, h_tilde), ad::mul_rowvec(H, s_tilde)}, 1);
  Tensor hidden = ad::tanh_op(ad::add_rowvec(
      ad::matmul(fused, ad::transpose(m.ap_mlp_w1)), m.ap_mlp_b1));
  Tensor g = ad::add_rowvec(ad::matmul(hidden, ad::transpose(m.ap_mlp_w2)),
                            m.ap_mlp_b2);

  const std::size_t rows = g.rows();
  Tensor m1 = bilstm_encode(g, rows, m.ap_m1_fwd, m.ap_m1_bwd);
  Tensor m2 = bilstm_encode(m1, rows, m.ap_m2_fwd, m.ap_m2_bwd);

  SpanDistributions out;
  out.p1 = ad::softmax(ad::matvec(ad::concat({h_tilde, m1}, 1), m.ap_p1_w));
  out.p2 = ad::softmax(ad::matvec(ad::concat({h_tilde, m2}, 1), m.ap_p2_w));
  return out;
}

Tensor ap_loss(const std::vector<SpanDistributions>& dists,
               const std::vector<std::size_t>& answer_starts,
               const std::vector<std::size_t>& answer_ends) {
  if (dists.empty()) throw ContractError("ap_loss: no distributions");
  if (dists.size() != answer_starts.size() ||
      dists.size() != answer_ends.size()) {
    throw ContractError("ap_loss: " + std::to_string(dists.size()) +
                        " distributions for " +
                        std::to_string(answer_starts.size()) + "/" +
                        std::to_string(answer_ends.size()) + " spans");
  }
  constexpr double kFloor = 1e-12;

  Tensor total = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < dists.size(); ++i) {
    if (answer_starts[i] >= dists[i].p1.size() ||
        answer_ends[i] >= dists[i].p2.size()) {
      throw ContractError("ap_loss: span (" + std::to_string(answer_starts[i]) +
                          ", " + std::to_string(answer_ends[i]) +
                          ") beyond the " + std::to_string(dists[i].p1.size()) +
                          " real positions of example " + std::to_string(i));
    }
    Tensor start_term = ad::log_op(
        ad::clamp_min(ad::pick(dists[i].p1, answer_starts[i]), kFloor));
    Tensor end_term = ad::log_op(
        ad::clamp_min(ad::pick(dists[i].p2, answer_ends[i]), kFloor));
    total = ad::add(total, ad::neg(ad::add(start_term, end_term)));
  }
  return ad::scale(total, 1.0 / static_cast<double>(dists.size()));
}

std::pair<std::size_t, std::size_t> predict_span(const std::vector<double>& p1,
                                                 const std::vector<double>& p2) {
  if (p1.empty() || p1.size() != p2.size()) {
    throw ContractError("predict_span: distribution lengths " +
                        std::to_string(p1.size()) + " and " +
                        std::to_string(p2.size()));
  }
  std::size_t best_i = 0, best_j = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    for (std::size_t j = i; j < p2.size(); ++j) {
      double score = p1[i] * p2[j];
      if (score > best) {
        best = score;
        best_i = i;
        best_j = j;
      }
    }
  }
  return {best_i, best_j};
}

}  // namespace qgen
