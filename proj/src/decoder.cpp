#include "qgen/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "qgen/error.hpp"
#include "qgen/ops.hpp"

namespace qgen {

using ad::Tensor;

DecoderState initial_decoder_state(const Tensor& z) {
  DecoderState st;
  st.s = z;
  st.cell = Tensor::zeros(z.shape());
  st.context = Tensor::zeros(z.shape());
  return st;
}

std::pair<Tensor, Tensor> attention(const Tensor& s, const Tensor& H,
                                    const std::optional<Tensor>& source_mask,
                                    const Model& m) {
  Tensor proj = ad::add_rowvec(ad::matmul(H, m.att_memory_w),
                               ad::matvec(m.att_query_w, s));
  Tensor scores = ad::matvec(ad::tanh_op(proj), m.att_score_v);
  Tensor alpha = ad::softmax(scores, 0, source_mask);
  return {alpha, ad::vecmat(alpha, H)};
}

StepOutput decode_step(DecoderState& state, const Tensor& w_embedding,
                       const Tensor& H,
                       const std::optional<Tensor>& source_mask,
                       const std::vector<std::size_t>& copy_ids,
                       std::size_t n_oov, const Model& m) {
  if (copy_ids.size() < H.rows()) {
    throw ContractError("decode_step: " + std::to_string(copy_ids.size()) +
                        " copy ids for " + std::to_string(H.rows()) +
                        " source rows");
  }

  Tensor x = ad::concat({w_embedding, state.context}, 0);
  auto [s, cell] = lstm_cell(x, state.s, state.cell, m.dec_cell);
  auto [alpha, context] = attention(s, H, source_mask, m);

  Tensor hidden =
      ad::tanh_op(ad::affine(m.gen_w1, ad::concat({s, context}, 0), m.gen_b1));
  Tensor p_generate = ad::softmax(ad::affine(m.gen_w2, hidden, m.gen_b2));

  Tensor g_copy = ad::sigmoid(ad::add(
      ad::add(ad::dot(m.copy_state_w, s), ad::dot(m.copy_context_w, context)),
      m.copy_bias));

  const std::size_t extended = m.dims.tgt_vocab + n_oov;
  std::vector<std::size_t> targets(copy_ids.begin(),
                                   copy_ids.begin() +
                                       static_cast<std::ptrdiff_t>(H.rows()));
  Tensor p_copy = ad::scatter_sum(alpha, targets, extended);
  Tensor p_gen_ext =
      n_oov == 0 ? p_generate
                 : ad::concat({p_generate, Tensor::zeros({n_oov})}, 0);
  Tensor p_final = ad::add(ad::smul(g_copy, p_copy),
                           ad::smul(ad::sub(Tensor::scalar(1.0), g_copy),
                                    p_gen_ext));

  state.s = s;
  state.cell = cell;
  state.context = context;

  StepOutput out;
  out.alpha = alpha;
  out.context = context;
  out.p_generate = p_generate;
  out.g_copy = g_copy;
  out.p_final = p_final;
  return out;
}

TeacherForced run_teacher_forced(const Batch& batch, std::size_t row,
                                 const EncoderOutput& enc, const Model& m) {
  const std::size_t steps = batch.target_lens[row] + 1;
  DecoderState st = initial_decoder_state(enc.z);
  TeacherForced tf;
  tf.states.reserve(steps);
  tf.p_finals.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor w = ad::row(m.tgt_word_emb, batch.decoder_inputs[row][t]);
    StepOutput so = decode_step(st, w, enc.H, std::nullopt,
                                batch.copy_target_ids[row],
                                batch.oov_lists[row].size(), m);
    tf.states.push_back(st.s);
    tf.p_finals.push_back(so.p_final);
  }
  return tf;
}

std::vector<Tensor> example_nll_terms(const Batch& batch, std::size_t row,
                                      const TeacherForced& tf, NllStats* stats) {
  constexpr double kFloor = 1e-12;
  std::vector<Tensor> terms;
  terms.reserve(tf.p_finals.size());
  for (std::size_t t = 0; t < tf.p_finals.size(); ++t) {
    std::size_t gold = batch.decoder_outputs[row][t];
    Tensor p = ad::pick(tf.p_finals[t], gold);
    if (stats != nullptr) {
      ++stats->total_tokens;
      if (p.value() < kFloor) ++stats->floored_tokens;
    }
    terms.push_back(ad::neg(ad::log_op(ad::clamp_min(p, kFloor))));
  }
  return terms;
}

namespace {

Tensor sum_terms(const std::vector<Tensor>& terms) {
  Tensor total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  return total;
}

}  // namespace

Tensor sequence_nll(const Batch& batch, const Model& m, NllStats* stats) {
  std::vector<Tensor> terms;
  for (std::size_t row = 0; row < batch.batch_size; ++row) {
    EncoderOutput enc = encode_example(batch, row, m);
    TeacherForced tf = run_teacher_forced(batch, row, enc, m);
    std::vector<Tensor> row_terms = example_nll_terms(batch, row, tf, stats);
    terms.insert(terms.end(), row_terms.begin(), row_terms.end());
  }
  return ad::scale(sum_terms(terms), 1.0 / static_cast<double>(terms.size()));
}

namespace {

// Argmax over a final distribution with pad and sos excluded; the scan keeps
// the first maximum, so ties resolve to the lowest id.
std::size_t pick_best(const std::vector<double>& p) {
  std::size_t best = Vocab::kUnk;
  double best_p = -1.0;
  for (std::size_t id = 0; id < p.size(); ++id) {
    if (id == Vocab::kPad || id == Vocab::kSos) continue;
    if (p[id] > best_p) {
      best_p = p[id];
      best = id;
    }
  }
  return best;
}

std::size_t feedback_id(std::size_t id, std::size_t tgt_vocab) {
  return id < tgt_vocab ? id : Vocab::kUnk;
}

}  // namespace

std::vector<std::string> greedy_decode(const Example& example,
                                       const VocabSet& vocabs, const Model& m,
                                       std::size_t max_len) {
  Batch batch = make_batch({example}, vocabs);
  EncoderOutput enc = encode_example(batch, 0, m);
  DecoderState st = initial_decoder_state(enc.z);

  std::vector<std::size_t> out_ids;
  std::size_t prev = Vocab::kSos;
  for (std::size_t step = 0; step < max_len; ++step) {
    Tensor w = ad::row(m.tgt_word_emb, feedback_id(prev, m.dims.tgt_vocab));
    StepOutput so = decode_step(st, w, enc.H, std::nullopt,
                                batch.copy_target_ids[0],
                                batch.oov_lists[0].size(), m);
    std::size_t best = pick_best(so.p_final.data());
    if (best == Vocab::kEos) break;
    out_ids.push_back(best);
    prev = best;
  }
  return restore_tokens(out_ids, vocabs.target, batch.oov_lists[0]);
}

std::vector<std::size_t> beam_search(
    const std::function<std::vector<double>(const std::vector<std::size_t>&)>&
        step_logprobs,
    std::size_t beam_size, std::size_t max_len, std::size_t eos_id,
    const std::vector<std::size_t>& banned) {
  if (beam_size == 0) throw ContractError("beam_search: beam size 0");
  if (max_len == 0) return {};

  struct Hyp {
    std::vector<std::size_t> ids;
    double sum = 0.0;
  };
  struct Done {
    std::vector<std::size_t> ids;
    double score = 0.0;
  };

  auto is_banned = [&banned](std::size_t id) {
    return std::find(banned.begin(), banned.end(), id) != banned.end();
  };

  std::vector<Hyp> live{{{}, 0.0}};
  std::vector<Done> finished;

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    struct Cand {
      double sum;
      std::size_t parent;
      std::size_t id;
    };
    std::vector<Cand> cands;
    for (std::size_t h = 0; h < live.size(); ++h) {
      std::vector<double> logp = step_logprobs(live[h].ids);
      for (std::size_t id = 0; id < logp.size(); ++id) {
        if (is_banned(id)) continue;
        cands.push_back({live[h].sum + logp[id], h, id});
      }
    }
    if (cands.empty()) break;
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.sum != b.sum) return a.sum > b.sum;
      if (a.id != b.id) return a.id < b.id;
      return a.parent < b.parent;
    });
    if (cands.size() > beam_size) cands.resize(beam_size);

    std::vector<Hyp> next;
    for (const Cand& c : cands) {
      std::vector<std::size_t> ids = live[c.parent].ids;
      double emitted = static_cast<double>(ids.size()) + 1.0;
      if (c.id == eos_id) {
        finished.push_back({std::move(ids), c.sum / emitted});
      } else {
        ids.push_back(c.id);
        next.push_back({std::move(ids), c.sum});
      }
    }
    live = std::move(next);
  }

  for (const Hyp& h : live) {
    if (h.ids.empty()) continue;
    finished.push_back({h.ids, h.sum / static_cast<double>(h.ids.size())});
  }
  if (finished.empty()) return {};

  const Done* best = &finished.front();
  for (const Done& d : finished) {
    if (d.score > best->score ||
        (d.score == best->score && d.ids < best->ids)) {
      best = &d;
    }
  }
  return best->ids;
}

std::vector<std::string> beam_decode(const Example& example,
                                     const VocabSet& vocabs, const Model& m,
                                     std::size_t beam_size, std::size_t max_len) {
  Batch batch = make_batch({example}, vocabs);
  EncoderOutput enc = encode_example(batch, 0, m);

  auto step_fn = [&](const std::vector<std::size_t>& prefix) {
    DecoderState st = initial_decoder_state(enc.z);
    std::size_t prev = Vocab::kSos;
    StepOutput so;
    for (std::size_t t = 0; t <= prefix.size(); ++t) {
      Tensor w = ad::row(m.tgt_word_emb, feedback_id(prev, m.dims.tgt_vocab));
      so = decode_step(st, w, enc.H, std::nullopt, batch.copy_target_ids[0],
                       batch.oov_lists[0].size(), m);
      if (t < prefix.size()) prev = prefix[t];
    }
    std::vector<double> logp(so.p_final.size());
    for (std::size_t i = 0; i < logp.size(); ++i) {
      logp[i] = std::log(std::max(so.p_final.at(i), 1e-12));
    }
    return logp;
  };

  std::vector<std::size_t> ids =
      beam_search(step_fn, beam_size, max_len, Vocab::kEos,
                  {Vocab::kPad, Vocab::kSos});
  return restore_tokens(ids, vocabs.target, batch.oov_lists[0]);
}

}  // namespace qgen
