// Acceptance checks for the question-generation system. Each numbered check
// prints exactly one PASS/FAIL line; the process exits with the number of
// failures. Checks are self-contained and run on synthetic fixtures.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qgen/answer_position.hpp"
#include "qgen/corpus.hpp"
#include "qgen/decoder.hpp"
#include "qgen/encoder.hpp"
#include "qgen/gradcheck.hpp"
#include "qgen/metrics.hpp"
#include "qgen/model.hpp"
#include "qgen/ops.hpp"
#include "qgen/params.hpp"
#include "qgen/rng.hpp"
#include "qgen/semantic_match.hpp"
#include "qgen/trainer.hpp"

using namespace qgen;

namespace {

int failures = 0;

void report(int number, const std::string& name, bool ok,
            const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " " << number << " " << name;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << "\n" << std::flush;
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(3);
  out << v;
  return out.str();
}

// ---- fixtures -------------------------------------------------------------

std::vector<Example> random_examples(Rng& rng, std::size_t count, std::size_t m,
                                     std::size_t n, std::size_t vocab) {
  std::vector<Example> out;
  for (std::size_t e = 0; e < count; ++e) {
    Example ex;
    for (std::size_t j = 0; j < m; ++j) {
      ex.tokens.push_back("w" + std::to_string(rng.index(vocab)));
      ex.pos.push_back("p" + std::to_string(rng.index(3)));
      ex.ner.push_back("n" + std::to_string(rng.index(3)));
      ex.case_tags.push_back(rng.index(2) == 0 ? "up" : "low");
    }
    for (std::size_t j = 0; j < n; ++j) {
      ex.question.push_back("w" + std::to_string(rng.index(vocab)));
    }
    ex.answer_start = rng.index(m);
    ex.answer_end = ex.answer_start + rng.index(m - ex.answer_start);
    out.push_back(std::move(ex));
  }
  return out;
}

struct Built {
  ParamStore store;
  VocabSet vocabs;
  Model model;
};

void build(Built& b, const std::vector<Example>& examples, std::size_t hidden,
           std::size_t word_dim, std::size_t feat_dim, std::uint64_t seed) {
  b.vocabs = build_vocabs(examples, 50000, 50000, 1);
  Dims dims;
  dims.word_dim = word_dim;
  dims.feat_dim = feat_dim;
  dims.hidden = hidden;
  dims.src_vocab = b.vocabs.source.size();
  dims.tgt_vocab = b.vocabs.target.size();
  dims.pos_vocab = b.vocabs.pos.size();
  dims.ner_vocab = b.vocabs.ner.size();
  dims.case_vocab = b.vocabs.case_tags.size();
  Rng rng(seed);
  b.model = build_model(b.store, dims, rng);
}

// 32 templated records: unique (name, verb) per record, the object token and
// its position alternating so the answer span moves around.
std::vector<Example> toy_corpus() {
  const char* names[] = {"anna", "ben",  "carla", "dev",
                         "emma", "finn", "gina",  "hugo"};
  const char* verbs[] = {"baked", "painted", "fixed", "wrote"};
  const char* things[] = {"cake", "fence"};
  const char* days[] = {"monday", "friday"};
  std::vector<Example> out;
  for (int ni = 0; ni < 8; ++ni) {
    for (int vi = 0; vi < 4; ++vi) {
      int k = ni * 4 + vi;
      Example e;
      if (k % 2 == 0) {
        e.tokens = {names[ni], verbs[vi], "the", things[k % 2], "on",
                    days[(k / 2) % 2], "."};
        e.answer_start = 3;
        e.answer_end = 3;
        e.ner = {"PER", "O", "O", "O", "O", "DATE", "O"};
      } else {
        e.tokens = {"yesterday", names[ni], verbs[vi], "the", things[k % 2],
                    "quickly", "."};
        e.answer_start = 4;
        e.answer_end = 4;
        e.ner = {"DATE", "PER", "O", "O", "O", "O", "O"};
      }
      e.pos = {"X", "X", "X", "X", "X", "X", "X"};
      e.case_tags = {"low", "up", "low", "low", "low", "low", "low"};
      e.question = {"what", "did", names[ni], verbs[vi], "?"};
      out.push_back(std::move(e));
    }
  }
  return out;
}

struct ToyRun {
  Built b;
  std::vector<Example> examples;
  double seconds = 0.0;

  double per_token_nll() {
    Batch batch = make_batch(examples, b.vocabs);
    return sequence_nll(batch, b.model).value();
  }

  double sm_acc(std::uint64_t seed) {
    Batch batch = make_batch(examples, b.vocabs);
    Rng rng(seed);
    SmPairs pairs = sample_sm_pairs(batch, rng);
    std::vector<ad::Tensor> zs(batch.batch_size), qs(batch.batch_size);
    for (std::size_t r = 0; r < batch.batch_size; ++r) {
      EncoderOutput enc = encode_example(batch, r, b.model);
      TeacherForced tf = run_teacher_forced(batch, r, enc, b.model);
      zs[r] = enc.z;
      qs[r] = question_vector(tf.states, batch.target_lens[r]);
    }
    return sm_accuracy(pairs, zs, qs, b.model);
  }

  double span_acc() {
    Batch batch = make_batch(examples, b.vocabs);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < batch.batch_size; ++r) {
      EncoderOutput enc = encode_example(batch, r, b.model);
      TeacherForced tf = run_teacher_forced(batch, r, enc, b.model);
      std::vector<ad::Tensor> qs(
          tf.states.begin(),
          tf.states.begin() + static_cast<std::ptrdiff_t>(batch.target_lens[r]));
      SpanDistributions d = span_logits(enc.H, ad::stack_rows(qs), b.model);
      auto [s, e] = predict_span(d.p1.data(), d.p2.data());
      if (s == batch.answer_starts[r] && e == batch.answer_ends[r]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(batch.batch_size);
  }

  std::size_t greedy_matches() {
    std::size_t hits = 0;
    for (const Example& ex : examples) {
      if (greedy_decode(ex, b.vocabs, b.model, 8) == ex.question) ++hits;
    }
    return hits;
  }
};

ToyRun train_toy(double alpha, double beta, std::size_t epochs,
                 std::uint64_t seed) {
  ToyRun run;
  run.examples = toy_corpus();
  build(run.b, run.examples, 32, 16, 4, seed);
  TrainConfig cfg;
  cfg.alpha = alpha;
  cfg.beta = beta;
  cfg.lr = 0.002;
  cfg.batch_size = 8;
  cfg.epochs = epochs;
  cfg.seed = seed;
  cfg.clip_norm = 5.0;
  cfg.max_decode_len = 8;
  auto start = std::chrono::steady_clock::now();
  train(cfg, run.examples, {}, run.b.vocabs, run.b.model, run.b.store, "",
        nullptr);
  run.seconds = seconds_since(start);
  return run;
}

// ---- criteria -------------------------------------------------------------

void check_gradients() {
  auto start = std::chrono::steady_clock::now();
  Rng data_rng(7);
  auto examples = random_examples(data_rng, 2, 5, 4, 20);
  Built b;
  build(b, examples, 8, 8, 4, 11);
  Batch batch = make_batch(examples, b.vocabs);
  Rng pair_rng(13);
  SmPairs pairs = sample_sm_pairs(batch, pair_rng);

  auto states_of = [&](std::size_t r, EncoderOutput& enc, TeacherForced& tf) {
    enc = encode_example(batch, r, b.model);
    tf = run_teacher_forced(batch, r, enc, b.model);
  };

  double worst = 0.0;
  std::string worst_name;
  bool ok = true;

  auto run_check = [&](const char* name, const std::function<ad::Tensor()>& fn,
                       const std::vector<std::pair<std::string, ad::Tensor>>&
                           params) {
    ad::GradCheckResult r = ad::finite_diff_check(fn, params);
    if (r.worst_rel_err > worst) {
      worst = r.worst_rel_err;
      worst_name = std::string(name) + "/" + r.worst_param;
    }
    if (!r.ok) ok = false;
  };

  run_check("sequence_nll",
            [&]() { return sequence_nll(batch, b.model); },
            b.store.group("s2s."));
  run_check("sm_loss",
            [&]() {
              std::vector<ad::Tensor> zs(batch.batch_size),
                  qs(batch.batch_size);
              for (std::size_t r = 0; r < batch.batch_size; ++r) {
                EncoderOutput enc;
                TeacherForced tf;
                states_of(r, enc, tf);
                zs[r] = enc.z;
                qs[r] = question_vector(tf.states, batch.target_lens[r]);
              }
              return sm_loss(pairs, zs, qs, b.model);
            },
            b.store.entries());
  run_check("ap_loss",
            [&]() {
              std::vector<SpanDistributions> dists;
              for (std::size_t r = 0; r < batch.batch_size; ++r) {
                EncoderOutput enc;
                TeacherForced tf;
                states_of(r, enc, tf);
                std::vector<ad::Tensor> qs(
                    tf.states.begin(),
                    tf.states.begin() +
                        static_cast<std::ptrdiff_t>(batch.target_lens[r]));
                dists.push_back(
                    span_logits(enc.H, ad::stack_rows(qs), b.model));
              }
              return ap_loss(dists, batch.answer_starts, batch.answer_ends);
            },
            b.store.entries());
  run_check("total_loss",
            [&]() { return total_loss(batch, b.model, pairs, 1.0, 2.0); },
            b.store.entries());

  double elapsed = seconds_since(start);
  ok = ok && elapsed < 60.0;
  report(1, "gradient suite", ok,
         "max rel err " + fmt(worst) + " at " + worst_name + ", " +
             fmt(elapsed) + "s");
}

void check_normalization() {
  Rng rng(29);
  const double tol = 1e-6;
  bool ok = true;
  std::string why;

  auto sums_to_one = [&](const ad::Tensor& p, const char* what) {
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.at(i) < 0.0) {
        ok = false;
        why = std::string(what) + " negative entry";
      }
      total += p.at(i);
    }
    if (std::fabs(total - 1.0) > tol) {
      ok = false;
      why = std::string(what) + " sums to " + fmt(total);
    }
  };

  for (int fixture = 0; fixture < 100 && ok; ++fixture) {
    std::size_t m = 2 + rng.index(5), n = 1 + rng.index(4);
    auto examples = random_examples(rng, 1, m, n, 12);
    Built b;
    build(b, examples, 8, 6, 2, rng.next());
    Batch batch = make_batch(examples, b.vocabs);
    EncoderOutput enc = encode_example(batch, 0, b.model);

    // decoder distributions across two steps
    DecoderState state = initial_decoder_state(enc.z);
    const auto& copy_ids = batch.copy_target_ids[0];
    std::size_t n_oov = batch.oov_lists[0].size();
    std::size_t inputs[2] = {Vocab::kSos, batch.decoder_outputs[0][0]};
    for (std::size_t t = 0; t < 2; ++t) {
      std::size_t id = std::min(inputs[t], b.vocabs.target.size() - 1);
      StepOutput step =
          decode_step(state, ad::row(b.model.tgt_word_emb, id), enc.H,
                      std::nullopt, copy_ids, n_oov, b.model);
      sums_to_one(step.alpha, "attention");
      sums_to_one(step.p_generate, "p_generate");
      sums_to_one(step.p_final, "p_final");
    }

    // attention over explicitly padded rows must zero the padding
    std::size_t padded_rows = m + 1 + rng.index(3);
    ad::Tensor padded = ad::Tensor::zeros({padded_rows, 8});
    for (std::size_t i = 0; i < enc.H.size(); ++i) {
      padded.data()[i] = enc.H.data()[i];
    }
    std::vector<double> mask_data(padded_rows, 0.0);
    for (std::size_t i = 0; i < m; ++i) mask_data[i] = 1.0;
    auto [alpha, ctx] =
        attention(state.s, padded, ad::Tensor::from({padded_rows}, mask_data),
                  b.model);
    sums_to_one(alpha, "masked attention");
    for (std::size_t i = m; i < padded_rows; ++i) {
      if (alpha.at(i) != 0.0) {
        ok = false;
        why = "masked attention weight not exactly zero";
      }
    }

    // matching head distribution
    TeacherForced tf = run_teacher_forced(batch, 0, enc, b.model);
    sums_to_one(sm_forward(enc.z, question_vector(tf.states, n), b.model),
                "p_sm");

    // span distributions
    std::vector<ad::Tensor> qs(tf.states.begin(), tf.states.begin() +
                                                      static_cast<std::ptrdiff_t>(n));
    SpanDistributions d = span_logits(enc.H, ad::stack_rows(qs), b.model);
    sums_to_one(d.p1, "p1");
    sums_to_one(d.p2, "p2");
  }
  report(2, "normalization suite", ok, ok ? "100 fixtures" : why);
}

void check_copy_mixture() {
  Rng rng(37);
  bool ok = true;
  std::string why;
  double worst = 0.0;
  for (int fixture = 0; fixture < 20 && ok; ++fixture) {
    // vocabulary of the questions only, so most source tokens are rare and
    // receive extended ids; repeats share ids
    std::size_t m = 3 + rng.index(4);
    auto examples = random_examples(rng, 1, m, 2, 30);
    examples[0].tokens[m - 1] = examples[0].tokens[0];  // force a repeat
    Built b;
    build(b, examples, 8, 6, 2, rng.next());
    Batch batch = make_batch(examples, b.vocabs);
    EncoderOutput enc = encode_example(batch, 0, b.model);
    DecoderState state = initial_decoder_state(enc.z);
    const auto& copy_ids = batch.copy_target_ids[0];
    std::size_t n_oov = batch.oov_lists[0].size();
    if (n_oov == 0) {
      ok = false;
      why = "fixture without extended ids";
      break;
    }
    StepOutput step =
        decode_step(state, ad::row(b.model.tgt_word_emb, Vocab::kSos), enc.H,
                    std::nullopt, copy_ids, n_oov, b.model);
    const double g = step.g_copy.value();
    std::map<std::size_t, double> pooled;
    for (std::size_t i = 0; i < copy_ids.size(); ++i) {
      pooled[copy_ids[i]] += step.alpha.at(i);
    }
    const std::size_t vocab = b.vocabs.target.size();
    for (std::size_t id = 0; id < step.p_final.size(); ++id) {
      double expect = g * (pooled.count(id) ? pooled[id] : 0.0);
      if (id < vocab) expect += (1.0 - g) * step.p_generate.at(id);
      double err = std::fabs(step.p_final.at(id) - expect);
      worst = std::max(worst, err);
      if (err > 1e-12) {
        ok = false;
        why = "id " + std::to_string(id) + " off by " + fmt(err);
      }
    }
  }
  report(3, "copy mixture exactness", ok,
         ok ? "worst deviation " + fmt(worst) : why);
}

void check_loss_composition() {
  Rng rng(41);
  auto examples = random_examples(rng, 3, 6, 4, 25);
  Built b;
  build(b, examples, 8, 6, 2, 43);
  Batch batch = make_batch(examples, b.vocabs);
  Rng pair_rng(47);
  SmPairs pairs = sample_sm_pairs(batch, pair_rng);
  LossComponents comps;
  ad::Tensor total = total_loss(batch, b.model, pairs, 1.0, 2.0, &comps);
  bool ok = total.value() == comps.s2s + 1.0 * comps.sm + 2.0 * comps.ap;
  report(4, "loss composition", ok,
         "total " + fmt(total.value()) + " = s2s " + fmt(comps.s2s) +
             " + 1*sm " + fmt(comps.sm) + " + 2*ap " + fmt(comps.ap) +
             (ok ? ", exact" : ", MISMATCH"));
}

ToyRun g_full_run;  // shared between criteria 5 and 8

// Known limitation, kept visible on purpose: the matching classifier scores a
// pair as a linear function of the concatenation [z; s_n], and both vectors
// are taken from each example's own aligned forward pass. A pair's score
// therefore decomposes as f(sentence) + g(question), and any such scorer
// satisfies D(i,i) + D(j,j) == D(i,j) + D(j,i), so the two true pairs and the
// two crossed pairs of two examples can never all be classified correctly.
// Balanced shuffled-pair accuracy is capped near 75% in expectation for any
// data, and on this symmetric corpus the cross-entropy optimum is the
// constant predictor: loss pinned at ln 2, accuracy at chance. Observed
// across matching weights 1/5/10, learning rates 0.002/0.01, and up to 600
// epochs: loss 0.693, accuracy 0.45 to 0.55. The 0.95 accuracy requirement
// below is retained rather than weakened so the gap stays on the record; the
// other four requirements hold with large margins.
void check_overfit() {
  g_full_run = train_toy(1.0, 2.0, 300, 61);
  double nll = g_full_run.per_token_nll();
  double sm = g_full_run.sm_acc(71);
  double span = g_full_run.span_acc();
  std::size_t greedy = g_full_run.greedy_matches();
  bool ok = nll < 0.1 && sm >= 0.95 && span == 1.0 && greedy >= 30 &&
            g_full_run.seconds < 600.0;
  report(5, "overfit oracle", ok,
         "nll/token " + fmt(nll) + ", match acc " + fmt(sm) +
             (sm < 0.95 ? " (additive-scorer ceiling, see comment above)"
                        : "") +
             ", span acc " + fmt(span) + ", greedy " + std::to_string(greedy) +
             "/32, " + fmt(g_full_run.seconds) + "s");
}

void check_span_oracle() {
  Rng rng(53);
  bool ok = true;
  std::string why;
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    std::size_t m = 1 + rng.index(12);
    std::vector<double> p1(m), p2(m);
    double n1 = 0.0, n2 = 0.0;
    const bool quantized = trial % 3 == 0;  // provoke ties regularly
    for (std::size_t i = 0; i < m; ++i) {
      p1[i] = quantized ? (1.0 + rng.index(4)) : rng.uniform(0.01, 1.0);
      p2[i] = quantized ? (1.0 + rng.index(4)) : rng.uniform(0.01, 1.0);
      n1 += p1[i];
      n2 += p2[i];
    }
    for (std::size_t i = 0; i < m; ++i) {
      p1[i] /= n1;
      p2[i] /= n2;
    }
    std::size_t want_s = 0, want_e = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i; j < m; ++j) {
        if (p1[i] * p2[j] > best) {
          best = p1[i] * p2[j];
          want_s = i;
          want_e = j;
        }
      }
    }
    auto [got_s, got_e] = predict_span(p1, p2);
    if (got_s != want_s || got_e != want_e) {
      ok = false;
      why = "trial " + std::to_string(trial);
    }
  }
  report(6, "span prediction oracle", ok, ok ? "1000 distributions" : why);
}

void check_metric_oracles() {
  bool ok = true;
  std::string why;
  auto expect = [&](double got, double want, const char* what) {
    if (std::fabs(got - want) > 1e-9) {
      ok = false;
      why = std::string(what) + " got " + fmt(got) + " want " + fmt(want);
    }
  };

  auto split = [](const std::string& s) {
    TokenSeq out;
    std::istringstream in(s);
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
  };

  // clipped unigram precision
  expect(bleu({split("the the the")}, {split("the cat")}, 1), 1.0 / 3.0,
         "bleu clip");
  // identical corpora
  std::vector<TokenSeq> same{split("what is the answer ?")};
  expect(bleu(same, same, 4), 1.0, "bleu identity");
  // brevity penalty
  expect(bleu({split("a b")}, {split("a b c d")}, 1), std::exp(-1.0),
         "brevity penalty");
  // smoothing of an empty higher order
  expect(bleu({split("a c b")}, {split("a b c")}, 2),
         std::exp(0.5 * std::log(1.0 / 3.0)), "bleu smoothing");
  // LCS F-measure with beta^2 = 1.2
  {
    const double r = 1.0, p = 2.0 / 3.0, b2 = 1.2;
    expect(rouge_l({split("a b c")}, {split("a c")}),
           (1.0 + b2) * r * p / (r + b2 * p), "rouge");
  }
  // rare-word precision/recall, exact fractions
  {
    Vocab target;
    for (const char* t : {"what", "did", "make", "?"}) target.add(t);
    CopyScores s = copy_precision_recall(
        {split("what did tesla make ?"), split("what did edison edison make ?")},
        {split("what did tesla make ?"), split("what did marconi make ?")},
        target);
    if (!s.precision || !s.recall) {
      ok = false;
      why = "copy scores absent";
    } else {
      expect(*s.precision, 1.0 / 3.0, "copy precision");
      expect(*s.recall, 1.0 / 2.0, "copy recall");
    }
  }
  report(7, "metric oracles", ok, ok ? "hand-computed values" : why);
}

void check_ablation() {
  // Same seed and schedule, one loss disabled at a time. Shorter runs than
  // the overfit oracle: the comparison needs direction, not convergence.
  ToyRun full = train_toy(1.0, 2.0, 120, 61);
  ToyRun no_span = train_toy(1.0, 0.0, 120, 61);
  ToyRun no_match = train_toy(0.0, 2.0, 120, 61);

  double span_on = full.span_acc(), span_off = no_span.span_acc();
  double sm_on = full.sm_acc(73), sm_off = no_match.sm_acc(73);
  bool ok = span_on >= span_off && sm_on >= sm_off;
  report(8, "ablation monotonicity", ok,
         "span acc " + fmt(span_off) + " -> " + fmt(span_on) +
             " with span loss, match acc " + fmt(sm_off) + " -> " + fmt(sm_on) +
             " with match loss");
}

void check_determinism() {
  auto run_once = [](std::uint64_t seed, std::string* log_out) {
    auto examples = toy_corpus();
    examples.resize(8);
    Built b;
    build(b, examples, 16, 8, 2, seed);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.seed = seed;
    cfg.max_decode_len = 8;
    std::ostringstream log;
    train(cfg, examples, examples, b.vocabs, b.model, b.store, "", &log);
    *log_out = log.str();
    return std::move(b);
  };

  std::string log_a, log_b;
  Built a = run_once(83, &log_a);
  Built bb = run_once(83, &log_b);
  bool ok = !log_a.empty() && log_a == log_b;
  std::string why = ok ? "" : "seed 83 logs differ";

  // save, perturb, reload: values must come back bit-exact
  std::string path = "acceptance_roundtrip.ckpt";
  save_checkpoint(path, a.store);
  std::vector<std::vector<double>> original;
  for (const auto& [name, t] : a.store.entries()) {
    original.push_back(t.data());
    for (double& x : t.node()->data) x = x * 1.0000001 + 1e-9;
  }
  load_checkpoint(path, a.store);
  std::size_t idx = 0;
  for (const auto& [name, t] : a.store.entries()) {
    if (t.data() != original[idx]) {
      ok = false;
      why = "tensor " + name + " not restored bit-exactly";
    }
    ++idx;
  }
  std::remove(path.c_str());
  report(9, "determinism and round-trip", ok,
         ok ? "identical logs, bit-exact reload" : why);
}

}  // namespace

int main() {
  check_gradients();
  check_normalization();
  check_copy_mixture();
  check_loss_composition();
  check_overfit();
  check_span_oracle();
  check_metric_oracles();
  check_ablation();
  check_determinism();
  std::cout << (failures == 0 ? "all criteria passed"
                              : std::to_string(failures) + " criteria failed")
            << "\n";
  return failures;
}
