#include "qgen/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "qgen/answer_position.hpp"
#include "qgen/encoder.hpp"
#include "qgen/error.hpp"
#include "qgen/metrics.hpp"
#include "qgen/ops.hpp"
#include "qgen/semantic_match.hpp"

namespace qgen {

using ad::Tensor;
using nlohmann::json;

void TrainConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (max_decode_len == 0) throw ConfigError("max decode length must be positive");
  if (clip_norm < 0.0) throw ConfigError("clip norm must be non-negative");
}

namespace {

Tensor sum_terms(const std::vector<Tensor>& terms) {
  Tensor total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  return total;
}

void require_finite(double value, const char* component) {
  if (!std::isfinite(value)) {
    throw ContractError(std::string("non-finite ") + component + " loss: " +
                        std::to_string(value));
  }
}

}  // namespace

Tensor total_loss(const Batch& batch, const Model& m, const SmPairs& pairs,
                  double alpha, double beta, LossComponents* components) {
  std::vector<Tensor> zs(batch.batch_size);
  std::vector<Tensor> qvecs(batch.batch_size);
  std::vector<SpanDistributions> dists;
  dists.reserve(batch.batch_size);
  std::vector<Tensor> s2s_terms;
  NllStats stats;

  for (std::size_t row = 0; row < batch.batch_size; ++row) {
    EncoderOutput enc = encode_example(batch, row, m);
    TeacherForced tf = run_teacher_forced(batch, row, enc, m);

    std::vector<Tensor> terms = example_nll_terms(batch, row, tf, &stats);
    s2s_terms.insert(s2s_terms.end(), terms.begin(), terms.end());

    const std::size_t n = batch.target_lens[row];
    zs[row] = enc.z;
    qvecs[row] = question_vector(tf.states, n);

    std::vector<Tensor> question_states(tf.states.begin(),
                                        tf.states.begin() +
                                            static_cast<std::ptrdiff_t>(n));
    dists.push_back(span_logits(enc.H, ad::stack_rows(question_states), m));
  }

  Tensor l_s2s = ad::scale(sum_terms(s2s_terms),
                           1.0 / static_cast<double>(s2s_terms.size()));
  bool sm_empty = false;
  Tensor l_sm = sm_loss(pairs, zs, qvecs, m, &sm_empty);
  Tensor l_ap = ap_loss(dists, batch.answer_starts, batch.answer_ends);

  require_finite(l_s2s.value(), "generation");
  require_finite(l_sm.value(), "matching");
  require_finite(l_ap.value(), "span");

  Tensor total =
      ad::add(ad::add(l_s2s, ad::scale(l_sm, alpha)), ad::scale(l_ap, beta));

  if (components != nullptr) {
    components->total = total.value();
    components->s2s = l_s2s.value();
    components->sm = l_sm.value();
    components->ap = l_ap.value();
    components->nll = stats;
    components->sm_empty = sm_empty;
  }
  return total;
}

AdamState make_adam_state(const ParamStore& params) {
  AdamState state;
  state.m.reserve(params.entries().size());
  state.v.reserve(params.entries().size());
  for (const auto& [name, tensor] : params.entries()) {
    (void)name;
    state.m.emplace_back(tensor.size(), 0.0);
    state.v.emplace_back(tensor.size(), 0.0);
  }
  return state;
}

void adam_step(ParamStore& params, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
  if (state.m.size() != params.entries().size()) {
    throw ContractError("optimizer state tracks " +
                        std::to_string(state.m.size()) + " tensors, store has " +
                        std::to_string(params.entries().size()));
  }
  ++state.step;
  const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

  for (std::size_t k = 0; k < params.entries().size(); ++k) {
    ad::Tensor tensor = params.entries()[k].second;
    if (!tensor.has_grad()) continue;
    const std::vector<double>& g = tensor.grad();
    std::vector<double>& m = state.m[k];
    std::vector<double>& v = state.v[k];
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      tensor.data()[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

void clip_gradients(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, tensor] : params.entries()) {
    (void)name;
    if (!tensor.has_grad()) continue;
    for (double g : tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const double factor = max_norm / norm;
  for (const auto& [name, tensor] : params.entries()) {
    (void)name;
    if (!tensor.has_grad()) continue;
    auto& grad = tensor.node()->grad;
    for (double& g : *grad) g *= factor;
  }
}

namespace {

double dev_bleu4(const std::vector<Example>& dev_set, const VocabSet& vocabs,
                 const Model& model, std::size_t max_len) {
  std::vector<TokenSeq> hyps, refs;
  hyps.reserve(dev_set.size());
  refs.reserve(dev_set.size());
  for (const Example& ex : dev_set) {
    hyps.push_back(greedy_decode(ex, vocabs, model, max_len));
    refs.push_back(ex.question);
  }
  return bleu(hyps, refs, 4);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<Example>& train_set,
                  const std::vector<Example>& dev_set, const VocabSet& vocabs,
                  Model& model, ParamStore& params,
                  const std::string& checkpoint_path, std::ostream* log) {
  cfg.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");

  Rng rng(cfg.seed);
  AdamState adam = make_adam_state(params);
  double lr = cfg.lr;
  double best = -1.0;
  std::size_t stale = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size, ++step) {
      const std::size_t stop = std::min(start + cfg.batch_size, order.size());
      std::vector<Example> slice;
      slice.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        slice.push_back(train_set[order[i]]);
      }
      Batch batch = make_batch(slice, vocabs);
      SmPairs pairs = sample_sm_pairs(batch, rng, cfg.prefer_same_passage);

      LossComponents comps;
      ad::Tape tape;
      {
        ad::TapeScope scope(tape);
        Tensor loss;
        try {
          loss = total_loss(batch, model, pairs, cfg.alpha, cfg.beta, &comps);
        } catch (const ContractError& e) {
          throw ContractError("epoch " + std::to_string(epoch) + " step " +
                              std::to_string(step) + ": " + e.what());
        }
        params.zero_grads();
        tape.backward(loss);
      }
      if (cfg.clip_norm > 0.0) clip_gradients(params, cfg.clip_norm);
      adam_step(params, adam, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

      if (log != nullptr) {
        json line{{"kind", "step"},
                  {"epoch", epoch},
                  {"step", step},
                  {"loss", comps.total},
                  {"s2s", comps.s2s},
                  {"sm", comps.sm},
                  {"ap", comps.ap},
                  {"lr", lr},
                  {"floored", comps.nll.floored_tokens}};
        (*log) << line.dump() << '\n';
      }
    }

    if (!dev_set.empty()) {
      const double score = dev_bleu4(dev_set, vocabs, model, cfg.max_decode_len);
      result.dev_history.push_back(score);
      if (score > best) {
        best = score;
        result.best_epoch = epoch;
        stale = 0;
        if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, params);
      } else {
        ++stale;
        if (stale >= cfg.patience) {
          lr *= 0.5;
          stale = 0;
        }
      }
      if (log != nullptr) {
        json line{{"kind", "epoch"},
                  {"epoch", epoch},
                  {"dev_bleu4", score},
                  {"lr", lr}};
        (*log) << line.dump() << '\n';
      }
    } else {
      result.best_epoch = epoch;
      if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, params);
      if (log != nullptr) {
        json line{{"kind", "epoch"}, {"epoch", epoch}, {"lr", lr}};
        (*log) << line.dump() << '\n';
      }
    }
  }
  result.best_dev_bleu4 = std::max(best, 0.0);
  result.final_lr = lr;
  return result;
}

std::size_t load_embeddings(const std::string& path, const Vocab& vocab,
                            ad::Tensor embedding) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  if (embedding.rank() != 2 || embedding.rows() != vocab.size()) {
    throw ContractError("embedding table " + ad::shape_str(embedding.shape()) +
                        " does not cover the " + std::to_string(vocab.size()) +
                        "-entry vocabulary");
  }
  const std::size_t dim = embedding.cols();

  std::size_t loaded = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    values.reserve(dim);
    double v = 0.0;
    while (fields >> v) values.push_back(v);
    if (values.size() != dim) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(dim) + " values, got " +
                       std::to_string(values.size()));
    }
    if (!vocab.contains(token)) continue;
    const std::size_t id = vocab.id(token);
    for (std::size_t j = 0; j < dim; ++j) {
      embedding.data()[id * dim + j] = values[j];
    }
    ++loaded;
  }
  return loaded;
}

}  // namespace qgen
