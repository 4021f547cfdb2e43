#include "qgen/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "qgen/error.hpp"

namespace qgen {

namespace {

using nlohmann::json;

std::vector<std::string> string_array(const json& record, const char* field,
                                      std::size_t line_no) {
  if (!record.contains(field)) {
    throw ParseError("line " + std::to_string(line_no) + ": missing field '" +
                     field + "'");
  }
  const json& value = record[field];
  if (!value.is_array()) {
    throw ParseError("line " + std::to_string(line_no) + ": field '" + field +
                     "' is not an array");
  }
  std::vector<std::string> out;
  out.reserve(value.size());
  for (const json& item : value) {
    if (!item.is_string()) {
      throw ParseError("line " + std::to_string(line_no) + ": field '" + field +
                       "' holds a non-string entry");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

long long integer_field(const json& record, const char* field,
                        std::size_t line_no) {
  if (!record.contains(field) || !record[field].is_number_integer()) {
    throw ParseError("line " + std::to_string(line_no) + ": field '" + field +
                     "' missing or not an integer");
  }
  return record[field].get<long long>();
}

}  // namespace

std::vector<Example> load_examples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);

  std::vector<Example> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!record.is_object()) {
      throw ParseError("line " + std::to_string(line_no) + ": not an object");
    }

    Example ex;
    ex.tokens = string_array(record, "tokens", line_no);
    ex.pos = string_array(record, "pos", line_no);
    ex.ner = string_array(record, "ner", line_no);
    ex.case_tags = string_array(record, "case", line_no);
    ex.question = string_array(record, "question", line_no);
    long long start = integer_field(record, "answer_start", line_no);
    long long end = integer_field(record, "answer_end", line_no);
    if (record.contains("passage_id")) {
      if (!record["passage_id"].is_string()) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": field 'passage_id' is not a string");
      }
      ex.passage_id = record["passage_id"].get<std::string>();
    }

    const std::size_t m = ex.tokens.size();
    if (m == 0) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": empty token sequence");
    }
    for (const auto* tags : {&ex.pos, &ex.ner, &ex.case_tags}) {
      if (tags->size() != m) {
        throw ValidationError("line " + std::to_string(line_no) +
                              ": feature sequence length " +
                              std::to_string(tags->size()) +
                              " does not match " + std::to_string(m) +
                              " tokens");
      }
    }
    if (ex.question.empty()) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": empty question");
    }
    if (start < 0 || end < start || static_cast<std::size_t>(end) >= m) {
      throw ValidationError("line " + std::to_string(line_no) + ": span (" +
                            std::to_string(start) + ", " + std::to_string(end) +
                            ") out of range for " + std::to_string(m) +
                            " tokens");
    }
    ex.answer_start = static_cast<std::size_t>(start);
    ex.answer_end = static_cast<std::size_t>(end);
    examples.push_back(std::move(ex));
  }
  return examples;
}

Vocab::Vocab() : id_to_token_{"<pad>", "<unk>", "<sos>", "<eos>"} {
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    token_to_id_.emplace(id_to_token_[i], i);
  }
}

std::size_t Vocab::add(const std::string& token) {
  auto [it, inserted] = token_to_id_.emplace(token, id_to_token_.size());
  if (inserted) id_to_token_.push_back(token);
  return it->second;
}

std::size_t Vocab::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocab::contains(const std::string& token) const {
  return token_to_id_.count(token) != 0;
}

const std::string& Vocab::token(std::size_t id) const {
  if (id >= id_to_token_.size()) {
    throw IndexError("vocab id " + std::to_string(id) + " out of range, size " +
                     std::to_string(id_to_token_.size()));
  }
  return id_to_token_[id];
}

Vocab Vocab::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  Vocab vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty vocab entry");
    }
    if (vocab.contains(line)) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": duplicate vocab entry '" + line + "'");
    }
    vocab.add(line);
  }
  return vocab;
}

void Vocab::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  for (std::size_t i = kReserved; i < id_to_token_.size(); ++i) {
    out << id_to_token_[i] << '\n';
  }
}

namespace {

// Frequency-ranked token list, ties resolved by string order so builds are
// deterministic regardless of hash iteration.
std::vector<std::string> ranked_tokens(
    const std::map<std::string, std::size_t>& counts, std::size_t cap,
    std::size_t min_count) {
  std::vector<std::pair<std::string, std::size_t>> entries(counts.begin(),
                                                           counts.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  std::vector<std::string> out;
  for (const auto& [token, count] : entries) {
    if (count < min_count) continue;
    if (out.size() >= cap) break;
    out.push_back(token);
  }
  return out;
}

}  // namespace

VocabSet build_vocabs(const std::vector<Example>& examples,
                      std::size_t max_source_vocab, std::size_t max_target_vocab,
                      std::size_t min_count) {
  if (examples.empty()) throw ContractError("build_vocabs: no examples");

  std::map<std::string, std::size_t> source_counts, target_counts;
  std::map<std::string, std::size_t> pos_counts, ner_counts, case_counts;
  for (const Example& ex : examples) {
    for (const std::string& t : ex.tokens) ++source_counts[t];
    for (const std::string& t : ex.question) ++target_counts[t];
    for (const std::string& t : ex.pos) ++pos_counts[t];
    for (const std::string& t : ex.ner) ++ner_counts[t];
    for (const std::string& t : ex.case_tags) ++case_counts[t];
  }

  VocabSet set;
  for (const std::string& t :
       ranked_tokens(source_counts, max_source_vocab, min_count)) {
    set.source.add(t);
  }
  for (const std::string& t :
       ranked_tokens(target_counts, max_target_vocab, min_count)) {
    set.target.add(t);
  }
  constexpr std::size_t no_cap = static_cast<std::size_t>(-1);
  for (const std::string& t : ranked_tokens(pos_counts, no_cap, 1)) set.pos.add(t);
  for (const std::string& t : ranked_tokens(ner_counts, no_cap, 1)) set.ner.add(t);
  for (const std::string& t : ranked_tokens(case_counts, no_cap, 1)) {
    set.case_tags.add(t);
  }
  return set;
}

Batch make_batch(const std::vector<Example>& examples, const VocabSet& vocabs) {
  if (examples.empty()) throw ContractError("make_batch: no examples");

  Batch batch;
  batch.batch_size = examples.size();
  for (const Example& ex : examples) {
    batch.max_source_len = std::max(batch.max_source_len, ex.tokens.size());
    batch.max_target_len = std::max(batch.max_target_len, ex.question.size());
  }
  const std::size_t m_max = batch.max_source_len;
  const std::size_t out_cols = batch.max_target_len + 1;
  const std::size_t vt = vocabs.target.size();

  for (const Example& ex : examples) {
    const std::size_t m = ex.tokens.size();
    const std::size_t n = ex.question.size();
    batch.source_lens.push_back(m);
    batch.target_lens.push_back(n);
    batch.answer_starts.push_back(ex.answer_start);
    batch.answer_ends.push_back(ex.answer_end);
    batch.passage_ids.push_back(ex.passage_id);

    std::vector<std::size_t> src(m_max, Vocab::kPad);
    std::vector<std::size_t> pos(m_max, Vocab::kPad);
    std::vector<std::size_t> ner(m_max, Vocab::kPad);
    std::vector<std::size_t> cas(m_max, Vocab::kPad);
    std::vector<std::size_t> bio(m_max, kBioPad);
    std::vector<double> smask(m_max, 0.0);
    std::vector<std::size_t> copy_ids(m_max, Vocab::kPad);
    std::vector<std::string> oov_list;

    for (std::size_t j = 0; j < m; ++j) {
      src[j] = vocabs.source.id(ex.tokens[j]);
      pos[j] = vocabs.pos.id(ex.pos[j]);
      ner[j] = vocabs.ner.id(ex.ner[j]);
      cas[j] = vocabs.case_tags.id(ex.case_tags[j]);
      smask[j] = 1.0;
      if (j == ex.answer_start) {
        bio[j] = kBioB;
      } else if (j > ex.answer_start && j <= ex.answer_end) {
        bio[j] = kBioI;
      } else {
        bio[j] = kBioO;
      }
      if (vocabs.target.contains(ex.tokens[j])) {
        copy_ids[j] = vocabs.target.id(ex.tokens[j]);
      } else {
        auto found = std::find(oov_list.begin(), oov_list.end(), ex.tokens[j]);
        std::size_t k = static_cast<std::size_t>(found - oov_list.begin());
        if (found == oov_list.end()) oov_list.push_back(ex.tokens[j]);
        copy_ids[j] = vt + k;
      }
    }

    std::vector<std::size_t> dec_in(out_cols, Vocab::kPad);
    std::vector<std::size_t> dec_out(out_cols, Vocab::kPad);
    std::vector<double> tmask(out_cols, 0.0);
    dec_in[0] = Vocab::kSos;
    for (std::size_t t = 0; t < n; ++t) {
      const std::string& w = ex.question[t];
      dec_in[t + 1] = vocabs.target.id(w);
      if (vocabs.target.contains(w)) {
        dec_out[t] = vocabs.target.id(w);
      } else {
        auto found = std::find(oov_list.begin(), oov_list.end(), w);
        dec_out[t] = found == oov_list.end()
                         ? Vocab::kUnk
                         : vt + static_cast<std::size_t>(found - oov_list.begin());
      }
      tmask[t] = 1.0;
    }
    dec_out[n] = Vocab::kEos;
    tmask[n] = 1.0;

    batch.source_ids.push_back(std::move(src));
    batch.pos_ids.push_back(std::move(pos));
    batch.ner_ids.push_back(std::move(ner));
    batch.case_ids.push_back(std::move(cas));
    batch.bio_ids.push_back(std::move(bio));
    batch.source_mask.push_back(std::move(smask));
    batch.copy_target_ids.push_back(std::move(copy_ids));
    batch.oov_lists.push_back(std::move(oov_list));
    batch.decoder_inputs.push_back(std::move(dec_in));
    batch.decoder_outputs.push_back(std::move(dec_out));
    batch.target_mask.push_back(std::move(tmask));
  }
  return batch;
}

SmPairs sample_sm_pairs(const Batch& batch, Rng& rng, bool prefer_same_passage) {
  const std::size_t b = batch.batch_size;
  if (b == 0) throw ContractError("sample_sm_pairs: empty batch");

  SmPairs out;
  if (b == 1) {
    out.pairs.push_back({0, 0, 1});
    out.positives_only = true;
    return out;
  }

  for (std::size_t i = 0; i < b; ++i) out.pairs.push_back({i, i, 1});
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<std::size_t> candidates;
    if (prefer_same_passage && !batch.passage_ids[i].empty()) {
      for (std::size_t j = 0; j < b; ++j) {
        if (j != i && batch.passage_ids[j] == batch.passage_ids[i]) {
          candidates.push_back(j);
        }
      }
    }
    if (candidates.empty()) {
      for (std::size_t j = 0; j < b; ++j) {
        if (j != i) candidates.push_back(j);
      }
    }
    out.pairs.push_back({i, candidates[rng.index(candidates.size())], 0});
  }
  return out;
}

std::vector<std::string> restore_tokens(const std::vector<std::size_t>& ids,
                                        const Vocab& target,
                                        const std::vector<std::string>& oov_list) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) {
    if (id < target.size()) {
      out.push_back(target.token(id));
    } else if (id - target.size() < oov_list.size()) {
      out.push_back(oov_list[id - target.size()]);
    } else {
      throw IndexError("extended id " + std::to_string(id) +
                       " beyond vocab size " + std::to_string(target.size()) +
                       " plus " + std::to_string(oov_list.size()) +
                       " out-of-vocabulary words");
    }
  }
  return out;
}

}  // namespace qgen
