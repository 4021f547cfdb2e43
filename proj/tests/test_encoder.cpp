#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "qgen/corpus.hpp"
#include "qgen/encoder.hpp"
#include "qgen/error.hpp"
#include "qgen/model.hpp"
#include "qgen/ops.hpp"
#include "qgen/params.hpp"
#include "qgen/rng.hpp"

using namespace qgen;

namespace {

std::vector<Example> fixture_examples() {
  Example a;
  a.tokens = {"the", "cat", "sat", "here", "."};
  a.pos = {"DT", "NN", "VBD", "RB", "."};
  a.ner = {"O", "O", "O", "O", "O"};
  a.case_tags = {"low", "low", "low", "low", "low"};
  a.question = {"who", "sat", "?"};
  a.answer_start = 1;
  a.answer_end = 1;
  Example b = a;
  b.tokens = {"a", "dog", "ran", "far", "away", "today", "."};
  b.pos = {"DT", "NN", "VBD", "RB", "RB", "NN", "."};
  b.ner = {"O", "O", "O", "O", "O", "DATE", "O"};
  b.case_tags = {"low", "low", "low", "low", "low", "low", "low"};
  b.answer_start = 1;
  b.answer_end = 2;
  return {a, b};
}

struct Fixture {
  ParamStore store;
  VocabSet vocabs;
  Model model;
  std::vector<Example> examples;

  explicit Fixture(std::size_t hidden = 8, std::uint64_t seed = 7)
      : examples(fixture_examples()) {
    vocabs = build_vocabs(examples, 50000, 50000, 1);
    Dims dims;
    dims.word_dim = 6;
    dims.feat_dim = 2;
    dims.hidden = hidden;
    dims.src_vocab = vocabs.source.size();
    dims.tgt_vocab = vocabs.target.size();
    dims.pos_vocab = vocabs.pos.size();
    dims.ner_vocab = vocabs.ner.size();
    dims.case_vocab = vocabs.case_tags.size();
    Rng rng(seed);
    model = build_model(store, dims, rng);
  }
};

}  // namespace

TEST_CASE("default dimensions concatenate to the documented input width") {
  Dims d;
  CHECK(d.word_dim == 300);
  CHECK(d.feat_dim == 16);
  CHECK(d.input_dim() == 364);
}

TEST_CASE("source embedding concatenates features and zeroes padding") {
  Fixture f;
  Batch batch = make_batch(f.examples, f.vocabs);
  ad::Tensor emb = embed_source(batch, 0, f.model);
  REQUIRE(emb.rows() == batch.max_source_len);
  REQUIRE(emb.cols() == f.model.dims.input_dim());

  // A real row is the word vector followed by the four feature vectors.
  const std::size_t wd = f.model.dims.word_dim;
  std::size_t word_id = batch.source_ids[0][1];
  for (std::size_t k = 0; k < wd; ++k) {
    CHECK(emb.at(1, k) == f.model.src_word_emb.at(word_id, k));
  }
  std::size_t bio = batch.bio_ids[0][1];
  for (std::size_t k = 0; k < f.model.dims.feat_dim; ++k) {
    CHECK(emb.at(1, wd + 3 * f.model.dims.feat_dim + k) ==
          f.model.bio_emb.at(bio, k));
  }

  // Columns past the real length are exact zeros.
  for (std::size_t i = batch.source_lens[0]; i < batch.max_source_len; ++i) {
    for (std::size_t k = 0; k < emb.cols(); ++k) CHECK(emb.at(i, k) == 0.0);
  }
}

TEST_CASE("lstm cell matches hand arithmetic at zero weights") {
  ParamStore store;
  LstmParams p;
  p.hidden = 2;
  p.w = store.create_zeros("cell.w", {8, 5});
  p.b = store.create_zeros("cell.b", {8});
  // forget-gate bias block set to one, as at model init
  for (std::size_t i = 2; i < 4; ++i) p.b.data()[i] = 1.0;

  ad::Tensor x = ad::Tensor::from({3}, {0.3, -0.2, 0.8});
  ad::Tensor h0 = ad::Tensor::zeros({2});
  ad::Tensor c0 = ad::Tensor::ones({2});
  auto [h, c] = lstm_cell(x, h0, c0, p);

  // All gate pre-activations are the biases: i=o=sigmoid(0), f=sigmoid(1),
  // candidate=tanh(0)=0, so c = f*c0 and h = sigmoid(0)*tanh(c).
  const double f_gate = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(c.at(0) == doctest::Approx(f_gate).epsilon(1e-12));
  CHECK(h.at(0) == doctest::Approx(0.5 * std::tanh(f_gate)).epsilon(1e-12));
}

TEST_CASE("bidirectional halves mirror each other on a palindrome") {
  Fixture f;
  // Make both directions share weights.
  f.model.enc_bwd.w.data() = f.model.enc_fwd.w.data();
  f.model.enc_bwd.b.data() = f.model.enc_fwd.b.data();

  const std::size_t len = 5, dim = f.model.dims.input_dim();
  Rng rng(3);
  std::vector<double> rows(len * dim);
  for (std::size_t i = 0; i < len / 2 + 1; ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      double v = rng.uniform(-1.0, 1.0);
      rows[i * dim + k] = v;
      rows[(len - 1 - i) * dim + k] = v;
    }
  }
  ad::Tensor emb = ad::Tensor::from({len, dim}, rows);
  ad::Tensor H = bilstm_encode(emb, len, f.model.enc_fwd, f.model.enc_bwd);

  // Reading a palindrome backwards is the same scan, so the backward half at
  // position i equals the forward half at the mirrored position.
  const std::size_t half = f.model.dims.hidden / 2;
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t k = 0; k < half; ++k) {
      CHECK(H.at(i, half + k) ==
            doctest::Approx(H.at(len - 1 - i, k)).epsilon(1e-12));
    }
  }
}

TEST_CASE("fusion with zero weights averages the two states") {
  Fixture f;
  std::fill(f.model.fuse_match_w.data().begin(),
            f.model.fuse_match_w.data().end(), 0.0);
  std::fill(f.model.fuse_answer_w.data().begin(),
            f.model.fuse_answer_w.data().end(), 0.0);
  ad::Tensor h_m = ad::Tensor::from({8}, {1, 2, 3, 4, 5, 6, 7, 8});
  ad::Tensor h_a = ad::Tensor::from({8}, {8, 7, 6, 5, 4, 3, 2, 1});
  ad::Tensor z = gated_fusion(h_m, h_a, f.model);
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK(z.at(k) == doctest::Approx(0.5 * (h_m.at(k) + h_a.at(k)))
                         .epsilon(1e-12));
  }
}

TEST_CASE("encoder output slices real rows and answer state") {
  Fixture f;
  Batch batch = make_batch(f.examples, f.vocabs);
  EncoderOutput enc = encode_example(batch, 0, f.model);
  REQUIRE(enc.H.rows() == batch.source_lens[0]);
  REQUIRE(enc.H.cols() == f.model.dims.hidden);
  for (std::size_t k = 0; k < f.model.dims.hidden; ++k) {
    CHECK(enc.h_m.at(k) == enc.H.at(batch.source_lens[0] - 1, k));
    CHECK(enc.h_a.at(k) == enc.H.at(batch.answer_starts[0], k));
  }
}

TEST_CASE("moving the answer span changes the fused vector") {
  Fixture f;
  auto examples = fixture_examples();
  Example moved = examples[0];
  moved.answer_start = 3;
  moved.answer_end = 3;
  Batch original = make_batch({examples[0]}, f.vocabs);
  Batch shifted = make_batch({moved}, f.vocabs);
  ad::Tensor z0 = encode_example(original, 0, f.model).z;
  ad::Tensor z1 = encode_example(shifted, 0, f.model).z;
  bool differs = false;
  for (std::size_t k = 0; k < z0.size(); ++k) {
    if (z0.at(k) != z1.at(k)) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("padding length does not affect encoder values") {
  Fixture f;
  auto examples = fixture_examples();
  Batch alone = make_batch({examples[0]}, f.vocabs);   // padded to 5
  Batch padded = make_batch(examples, f.vocabs);       // padded to 7
  EncoderOutput a = encode_example(alone, 0, f.model);
  EncoderOutput b = encode_example(padded, 0, f.model);
  REQUIRE(a.H.rows() == b.H.rows());
  for (std::size_t i = 0; i < a.H.size(); ++i) {
    CHECK(a.H.data()[i] == b.H.data()[i]);  // bitwise: same ops on same rows
  }
  for (std::size_t k = 0; k < a.z.size(); ++k) CHECK(a.z.at(k) == b.z.at(k));
}

TEST_CASE("model construction rejects odd hidden sizes") {
  ParamStore store;
  Dims dims;
  dims.hidden = 7;
  dims.src_vocab = 10;
  dims.tgt_vocab = 10;
  dims.pos_vocab = 5;
  dims.ner_vocab = 5;
  dims.case_vocab = 5;
  Rng rng(1);
  CHECK_THROWS_AS(build_model(store, dims, rng), ContractError);
}
