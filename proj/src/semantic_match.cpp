#include "qgen/semantic_match.hpp"

#include "qgen/error.hpp"
#include "qgen/ops.hpp"

namespace qgen {

using ad::Tensor;

Tensor question_vector(const std::vector<Tensor>& decoder_states,
                       std::size_t question_len) {
  if (question_len == 0 || question_len > decoder_states.size()) {
    throw ContractError("question_vector: length " +
                        std::to_string(question_len) + " out of range for " +
                        std::to_string(decoder_states.size()) + " states");
  }
  return decoder_states[question_len - 1];
}

Tensor sm_forward(const Tensor& z, const Tensor& s_n, const Model& m) {
  return ad::softmax(ad::affine(m.sm_w, ad::concat({z, s_n}, 0), m.sm_b));
}

Tensor sm_loss(const SmPairs& pairs, const std::vector<Tensor>& zs,
               const std::vector<Tensor>& question_vectors, const Model& m,
               bool* empty_flag) {
  if (empty_flag != nullptr) *empty_flag = pairs.pairs.empty();
  if (pairs.pairs.empty()) return Tensor::scalar(0.0);

  Tensor total = Tensor::scalar(0.0);
  for (const SmPair& pair : pairs.pairs) {
    Tensor p = sm_forward(zs[pair.sentence], question_vectors[pair.question], m);
    total = ad::add(total,
                    ad::neg(ad::log_op(ad::pick(p, pair.label == 1 ? 1 : 0))));
  }
  return ad::scale(total, 1.0 / static_cast<double>(pairs.pairs.size()));
}

double sm_accuracy(const SmPairs& pairs, const std::vector<Tensor>& zs,
                   const std::vector<Tensor>& question_vectors, const Model& m) {
  if (pairs.pairs.empty()) return 0.0;
  std::size_t hits = 0;
  for (const SmPair& pair : pairs.pairs) {
    Tensor p = sm_forward(zs[pair.sentence], question_vectors[pair.question], m);
    int predicted = p.at(1) > p.at(0) ? 1 : 0;
    if (predicted == pair.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.pairs.size());
}

}  // namespace qgen
