#include <cmath>
#include <vector>

#include <doctest.h>

#include "qgen/corpus.hpp"
#include "qgen/decoder.hpp"
#include "qgen/encoder.hpp"
#include "qgen/error.hpp"
#include "qgen/gradcheck.hpp"
#include "qgen/model.hpp"
#include "qgen/ops.hpp"
#include "qgen/params.hpp"
#include "qgen/rng.hpp"
#include "qgen/semantic_match.hpp"

using namespace qgen;

namespace {

struct Fixture {
  ParamStore store;
  Model model;

  explicit Fixture(std::size_t hidden = 4, std::uint64_t seed = 21) {
    Dims dims;
    dims.word_dim = 4;
    dims.feat_dim = 2;
    dims.hidden = hidden;
    dims.src_vocab = 8;
    dims.tgt_vocab = 8;
    dims.pos_vocab = 5;
    dims.ner_vocab = 5;
    dims.case_vocab = 5;
    Rng rng(seed);
    model = build_model(store, dims, rng);
  }
};

}  // namespace

TEST_CASE("question vector is the state that predicts the last word") {
  std::vector<ad::Tensor> states;
  for (double v : {1.0, 2.0, 3.0, 4.0}) {
    states.push_back(ad::Tensor::full({2}, v));
  }
  // Four states belong to a three-word question plus the eos step; the
  // third state predicts the final question word.
  ad::Tensor s_n = question_vector(states, 3);
  CHECK(s_n.at(0) == 3.0);
  CHECK_THROWS_AS(question_vector(states, 0), ContractError);
  CHECK_THROWS_AS(question_vector(states, 5), ContractError);
}

TEST_CASE("an all-zero classifier head is indifferent") {
  Fixture f;
  std::fill(f.model.sm_w.data().begin(), f.model.sm_w.data().end(), 0.0);
  std::fill(f.model.sm_b.data().begin(), f.model.sm_b.data().end(), 0.0);
  ad::Tensor p = sm_forward(ad::Tensor::ones({4}), ad::Tensor::ones({4}),
                            f.model);
  CHECK(p.at(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.at(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("constructed logits give the expected class split") {
  Fixture f;
  // Zero weights plus bias [0, ln 3] makes the softmax [0.25, 0.75].
  std::fill(f.model.sm_w.data().begin(), f.model.sm_w.data().end(), 0.0);
  f.model.sm_b.data()[0] = 0.0;
  f.model.sm_b.data()[1] = std::log(3.0);
  ad::Tensor p = sm_forward(ad::Tensor::ones({4}), ad::Tensor::zeros({4}),
                            f.model);
  CHECK(p.at(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p.at(1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("pair loss is the mean cross entropy over the labels") {
  Fixture f;
  std::fill(f.model.sm_w.data().begin(), f.model.sm_w.data().end(), 0.0);
  f.model.sm_b.data()[0] = 0.0;
  f.model.sm_b.data()[1] = std::log(3.0);  // fixed [0.25, 0.75] everywhere

  std::vector<ad::Tensor> zs{ad::Tensor::ones({4}), ad::Tensor::ones({4})};
  std::vector<ad::Tensor> qs{ad::Tensor::ones({4}), ad::Tensor::ones({4})};
  SmPairs pairs;
  pairs.pairs.push_back({0, 0, 1});  // p(match) = 0.75
  pairs.pairs.push_back({1, 0, 0});  // p(mismatch) = 0.25
  ad::Tensor loss = sm_loss(pairs, zs, qs, f.model);
  const double want = -0.5 * (std::log(0.75) + std::log(0.25));
  CHECK(loss.value() == doctest::Approx(want).epsilon(1e-12));

  // Accuracy under the same fixed head: every pair is called a match.
  CHECK(sm_accuracy(pairs, zs, qs, f.model) == doctest::Approx(0.5));
}

TEST_CASE("an empty pair list gives a zero loss and raises the flag") {
  Fixture f;
  bool empty = false;
  ad::Tensor loss = sm_loss(SmPairs{}, {}, {}, f.model, &empty);
  CHECK(loss.value() == 0.0);
  CHECK(empty);
}

TEST_CASE("matching loss differentiates through both towers") {
  Fixture f;
  Example e;
  e.tokens = {"t0", "t1", "t2", "t3"};
  e.pos = {"P", "P", "P", "P"};
  e.ner = {"N", "N", "N", "N"};
  e.case_tags = {"c", "c", "c", "c"};
  e.question = {"t1", "t2"};
  e.answer_start = 1;
  e.answer_end = 2;
  Example e2 = e;
  e2.question = {"t3", "t0", "t2"};
  e2.answer_start = 0;
  e2.answer_end = 0;
  VocabSet vocabs = build_vocabs({e, e2}, 50000, 50000, 1);
  Dims dims;
  dims.word_dim = 4;
  dims.feat_dim = 2;
  dims.hidden = 4;
  dims.src_vocab = vocabs.source.size();
  dims.tgt_vocab = vocabs.target.size();
  dims.pos_vocab = vocabs.pos.size();
  dims.ner_vocab = vocabs.ner.size();
  dims.case_vocab = vocabs.case_tags.size();
  ParamStore store;
  Rng rng(31);
  Model model = build_model(store, dims, rng);
  Batch batch = make_batch({e, e2}, vocabs);
  SmPairs pairs;
  pairs.pairs.push_back({0, 0, 1});
  pairs.pairs.push_back({0, 1, 0});
  pairs.pairs.push_back({1, 1, 1});
  pairs.pairs.push_back({1, 0, 0});

  auto loss = [&]() {
    std::vector<ad::Tensor> zs(batch.batch_size), qs(batch.batch_size);
    for (std::size_t r = 0; r < batch.batch_size; ++r) {
      EncoderOutput enc = encode_example(batch, r, model);
      TeacherForced tf = run_teacher_forced(batch, r, enc, model);
      zs[r] = enc.z;
      qs[r] = question_vector(tf.states, batch.target_lens[r]);
    }
    return sm_loss(pairs, zs, qs, model);
  };
  auto checked = store.group("sm.");
  auto shared = store.group("s2s.enc.fuse.");
  checked.insert(checked.end(), shared.begin(), shared.end());
  ad::GradCheckResult r = ad::finite_diff_check(loss, checked);
  CHECK_MESSAGE(r.ok, r.worst_param, "[", r.worst_index, "] rel ",
                r.worst_rel_err);
}
