#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "qgen/corpus.hpp"
#include "qgen/decoder.hpp"
#include "qgen/model.hpp"
#include "qgen/params.hpp"

namespace qgen {

struct TrainConfig {
  double alpha = 1.0;  // semantic-matching loss weight
  double beta = 2.0;   // answer-position loss weight
  double lr = 0.001;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  // Epochs of no dev improvement tolerated before the learning rate halves.
  std::size_t patience = 1;
  bool prefer_same_passage = false;
  std::size_t max_decode_len = 30;
  // L2 gradient clip threshold; 0 disables clipping.
  double clip_norm = 0.0;

  void validate() const;
};

// Scalar component values from one total_loss evaluation.
struct LossComponents {
  double total = 0.0;
  double s2s = 0.0;
  double sm = 0.0;
  double ap = 0.0;
  NllStats nll;
  bool sm_empty = false;
};

// One shared forward pass: the encoder states and teacher-forced decoder
// states feed the generation loss, the matching loss, and the span loss.
// Returns s2s + alpha*sm + beta*ap. Throws ContractError naming the first
// non-finite component.
ad::Tensor total_loss(const Batch& batch, const Model& m, const SmPairs& pairs,
                      double alpha, double beta,
                      LossComponents* components = nullptr);

// Adam buffers, one slot per parameter in registration order.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

AdamState make_adam_state(const ParamStore& params);

// One bias-corrected Adam update from the accumulated gradients. Parameters
// that never received a gradient are left untouched.
void adam_step(ParamStore& params, AdamState& state, double lr, double beta1,
               double beta2, double eps);

// Scales all gradients so their joint L2 norm is at most max_norm.
void clip_gradients(ParamStore& params, double max_norm);

struct TrainResult {
  double best_dev_bleu4 = 0.0;
  std::size_t best_epoch = 0;
  std::vector<double> dev_history;
  double final_lr = 0.0;
};

// Epoch loop: seeded shuffling, per-step logging, greedy-decode BLEU-4 on the
// dev set after each epoch, halving the learning rate after `patience` epochs
// without improvement, and checkpointing the best dev score. With an empty
// dev set every epoch checkpoints and the schedule never halves. log, when
// given, receives one JSON object per line for steps and epochs.
TrainResult train(const TrainConfig& cfg, const std::vector<Example>& train_set,
                  const std::vector<Example>& dev_set, const VocabSet& vocabs,
                  Model& model, ParamStore& params,
                  const std::string& checkpoint_path, std::ostream* log = nullptr);

// Overwrites embedding rows for vocabulary tokens found in a plain-text
// "token v1 ... v_dim" file. Returns the number of rows loaded.
std::size_t load_embeddings(const std::string& path, const Vocab& vocab,
                            ad::Tensor embedding);

}  // namespace qgen
