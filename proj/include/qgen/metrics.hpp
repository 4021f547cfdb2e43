#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qgen/corpus.hpp"

namespace qgen {

using TokenSeq = std::vector<std::string>;

// Corpus-level BLEU: geometric mean of clipped n-gram precisions for
// n = 1..max_n times the brevity penalty. A zero precision at n >= 2 is
// smoothed by adding 1 to its numerator and denominator; a zero unigram
// precision (or an all-empty hypothesis corpus) gives 0.
double bleu(const std::vector<TokenSeq>& hypotheses,
            const std::vector<TokenSeq>& references, std::size_t max_n);

// Mean over pairs of the LCS F-score with beta^2 = 1.2.
double rouge_l(const std::vector<TokenSeq>& hypotheses,
               const std::vector<TokenSeq>& references);

// Micro-averaged precision/recall of out-of-vocabulary tokens (multiset
// intersection per pair). A score whose denominator is zero is absent.
struct CopyScores {
  std::optional<double> precision;
  std::optional<double> recall;
};

CopyScores copy_precision_recall(const std::vector<TokenSeq>& hypotheses,
                                 const std::vector<TokenSeq>& references,
                                 const Vocab& target);

// Fraction of pairs whose first question word (what/who/whom/whose/when/
// where/which/why/how, matched case-insensitively) agrees with the
// reference's. Pairs whose reference has no question word are skipped; if
// every pair is skipped the result is 0.
double question_word_accuracy(const std::vector<TokenSeq>& hypotheses,
                              const std::vector<TokenSeq>& references);

struct EvalReport {
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double bleu3 = 0.0;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  CopyScores copy;
  double question_word_acc = 0.0;
};

EvalReport evaluate_corpus(const std::vector<TokenSeq>& hypotheses,
                           const std::vector<TokenSeq>& references,
                           const Vocab& target);

// Human-readable report; ratio metrics appear scaled by 100.
std::string format_report(const EvalReport& report);

}  // namespace qgen
