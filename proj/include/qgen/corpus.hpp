#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "qgen/rng.hpp"

namespace qgen {

// One annotated sentence/question pair. answer_start/answer_end are 0-based
// token indices into tokens, end inclusive. The tag sequences align with
// tokens one to one.
struct Example {
  std::vector<std::string> tokens;
  std::vector<std::string> pos;
  std::vector<std::string> ner;
  std::vector<std::string> case_tags;
  std::vector<std::string> question;
  std::size_t answer_start = 0;
  std::size_t answer_end = 0;
  std::string passage_id;  // empty when the record had none
};

// Parses line-delimited records, one JSON object per line. Throws ParseError
// for lines that do not parse or have wrongly typed fields, ValidationError
// for records that parse but break the Example invariants; both name the
// offending line number.
std::vector<Example> load_examples(const std::string& path);

// Token table with four fixed ids at the bottom. Non-reserved ids are handed
// out in insertion order.
class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kSos = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kReserved = 4;

  Vocab();

  std::size_t add(const std::string& token);
  std::size_t id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const;
  const std::string& token(std::size_t id) const;
  std::size_t size() const { return id_to_token_.size(); }

  // One non-reserved token per line; line k holds the token with id k+4.
  static Vocab load_file(const std::string& path);
  void save_file(const std::string& path) const;

 private:
  std::unordered_map<std::string, std::size_t> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Answer-position tag ids used in Batch::bio_ids and by the feature
// embedding table.
inline constexpr std::size_t kBioPad = 0;
inline constexpr std::size_t kBioB = 1;
inline constexpr std::size_t kBioI = 2;
inline constexpr std::size_t kBioO = 3;
inline constexpr std::size_t kBioTags = 4;

struct VocabSet {
  Vocab source;
  Vocab target;
  Vocab pos;
  Vocab ner;
  Vocab case_tags;
};

// Source/target tables are capped (reserved ids excluded from the cap) and
// ranked by frequency, ties broken lexicographically; tokens seen fewer than
// min_count times are dropped. Tag tables take every value seen.
VocabSet build_vocabs(const std::vector<Example>& examples,
                      std::size_t max_source_vocab, std::size_t max_target_vocab,
                      std::size_t min_count);

// Examples padded to the longest sentence / question in the batch. Decoder
// rows have max_target_len + 1 columns: inputs start with sos, outputs end
// with eos, and target_mask is 1 on exactly the question words plus eos.
// copy_target_ids maps each source position to its target-vocab id, or to an
// extended id target.size()+k for the k-th distinct source OOV of that
// example (first-occurrence order, mirrored in oov_lists).
struct Batch {
  std::size_t batch_size = 0;
  std::size_t max_source_len = 0;
  std::size_t max_target_len = 0;

  std::vector<std::size_t> source_lens;
  std::vector<std::size_t> target_lens;

  std::vector<std::vector<std::size_t>> source_ids;
  std::vector<std::vector<std::size_t>> pos_ids;
  std::vector<std::vector<std::size_t>> ner_ids;
  std::vector<std::vector<std::size_t>> case_ids;
  std::vector<std::vector<std::size_t>> bio_ids;
  std::vector<std::vector<double>> source_mask;

  std::vector<std::vector<std::size_t>> decoder_inputs;
  std::vector<std::vector<std::size_t>> decoder_outputs;
  std::vector<std::vector<double>> target_mask;

  std::vector<std::size_t> answer_starts;
  std::vector<std::size_t> answer_ends;

  std::vector<std::vector<std::size_t>> copy_target_ids;
  std::vector<std::vector<std::string>> oov_lists;
  std::vector<std::string> passage_ids;
};

Batch make_batch(const std::vector<Example>& examples, const VocabSet& vocabs);

// Sentence/question pairing for the matching classifier. label is 1 when the
// question belongs to the sentence.
struct SmPair {
  std::size_t sentence = 0;
  std::size_t question = 0;
  int label = 1;
};

struct SmPairs {
  std::vector<SmPair> pairs;
  // Set when the batch had a single example, which leaves no way to draw a
  // negative; pairs then holds positives only.
  bool positives_only = false;
};

// Emits one positive pair per example plus one negative with a question drawn
// uniformly from the other examples. With prefer_same_passage, negatives come
// from examples sharing a nonempty passage_id when any exist.
SmPairs sample_sm_pairs(const Batch& batch, Rng& rng,
                        bool prefer_same_passage = false);

// Maps decoder output ids back to tokens; extended ids resolve through the
// example's oov_list.
std::vector<std::string> restore_tokens(const std::vector<std::size_t>& ids,
                                        const Vocab& target,
                                        const std::vector<std::string>& oov_list);

}  // namespace qgen
