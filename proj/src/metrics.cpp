#include "qgen/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "qgen/error.hpp"

namespace qgen {

namespace {

void check_aligned(const std::vector<TokenSeq>& hyps,
                   const std::vector<TokenSeq>& refs) {
  if (hyps.empty() || hyps.size() != refs.size()) {
    throw ContractError("metrics: " + std::to_string(hyps.size()) +
                        " hypotheses for " + std::to_string(refs.size()) +
                        " references");
  }
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(
    const TokenSeq& tokens, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                    tokens.begin() +
                                        static_cast<std::ptrdiff_t>(i + n))]++;
  }
  return counts;
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

}  // namespace

double bleu(const std::vector<TokenSeq>& hypotheses,
            const std::vector<TokenSeq>& references, std::size_t max_n) {
  check_aligned(hypotheses, references);
  if (max_n == 0) throw ContractError("bleu: max_n must be positive");

  std::size_t hyp_len = 0, ref_len = 0;
  for (const TokenSeq& h : hypotheses) hyp_len += h.size();
  for (const TokenSeq& r : references) ref_len += r.size();
  if (hyp_len == 0) return 0.0;

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    std::size_t matched = 0, total = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
      auto hyp_counts = ngram_counts(hypotheses[i], n);
      auto ref_counts = ngram_counts(references[i], n);
      for (const auto& [gram, count] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched += std::min(count, it->second);
        total += count;
      }
    }
    double precision;
    if (matched == 0) {
      if (n == 1) return 0.0;
      precision = 1.0 / (static_cast<double>(total) + 1.0);
    } else {
      precision = static_cast<double>(matched) / static_cast<double>(total);
    }
    log_sum += std::log(precision);
  }

  double brevity =
      hyp_len >= ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) /
                               static_cast<double>(hyp_len));
  return brevity * std::exp(log_sum / static_cast<double>(max_n));
}

double rouge_l(const std::vector<TokenSeq>& hypotheses,
               const std::vector<TokenSeq>& references) {
  check_aligned(hypotheses, references);
  constexpr double kBetaSq = 1.2;

  double f_sum = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const TokenSeq& hyp = hypotheses[i];
    const TokenSeq& ref = references[i];
    std::size_t lcs = lcs_length(hyp, ref);
    if (lcs == 0 || hyp.empty() || ref.empty()) continue;
    double recall = static_cast<double>(lcs) / static_cast<double>(ref.size());
    double precision = static_cast<double>(lcs) / static_cast<double>(hyp.size());
    f_sum += (1.0 + kBetaSq) * recall * precision /
             (recall + kBetaSq * precision);
  }
  return f_sum / static_cast<double>(hypotheses.size());
}

CopyScores copy_precision_recall(const std::vector<TokenSeq>& hypotheses,
                                 const std::vector<TokenSeq>& references,
                                 const Vocab& target) {
  check_aligned(hypotheses, references);

  std::size_t shared = 0, hyp_oov = 0, ref_oov = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    std::map<std::string, std::size_t> hyp_counts, ref_counts;
    for (const std::string& t : hypotheses[i]) {
      if (!target.contains(t)) ++hyp_counts[t];
    }
    for (const std::string& t : references[i]) {
      if (!target.contains(t)) ++ref_counts[t];
    }
    for (const auto& [token, count] : hyp_counts) {
      hyp_oov += count;
      auto it = ref_counts.find(token);
      if (it != ref_counts.end()) shared += std::min(count, it->second);
    }
    for (const auto& [token, count] : ref_counts) ref_oov += count;
  }

  CopyScores scores;
  if (hyp_oov > 0) {
    scores.precision = static_cast<double>(shared) / static_cast<double>(hyp_oov);
  }
  if (ref_oov > 0) {
    scores.recall = static_cast<double>(shared) / static_cast<double>(ref_oov);
  }
  return scores;
}

double question_word_accuracy(const std::vector<TokenSeq>& hypotheses,
                              const std::vector<TokenSeq>& references) {
  check_aligned(hypotheses, references);
  static const std::vector<std::string> kLexicon = {
      "what", "who", "whom", "whose", "when", "where", "which", "why", "how"};

  auto first_question_word = [](const TokenSeq& tokens) -> std::string {
    for (const std::string& t : tokens) {
      std::string low = lowercase(t);
      if (std::find(kLexicon.begin(), kLexicon.end(), low) != kLexicon.end()) {
        return low;
      }
    }
    return "";
  };

  std::size_t considered = 0, matched = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    std::string ref_word = first_question_word(references[i]);
    if (ref_word.empty()) continue;
    ++considered;
    if (first_question_word(hypotheses[i]) == ref_word) ++matched;
  }
  if (considered == 0) return 0.0;
  return static_cast<double>(matched) / static_cast<double>(considered);
}

EvalReport evaluate_corpus(const std::vector<TokenSeq>& hypotheses,
                           const std::vector<TokenSeq>& references,
                           const Vocab& target) {
  EvalReport report;
  report.bleu1 = bleu(hypotheses, references, 1);
  report.bleu2 = bleu(hypotheses, references, 2);
  report.bleu3 = bleu(hypotheses, references, 3);
  report.bleu4 = bleu(hypotheses, references, 4);
  report.rouge_l = rouge_l(hypotheses, references);
  report.copy = copy_precision_recall(hypotheses, references, target);
  report.question_word_acc = question_word_accuracy(hypotheses, references);
  return report;
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "BLEU-1  " << report.bleu1 * 100.0 << "\n"
      << "BLEU-2  " << report.bleu2 * 100.0 << "\n"
      << "BLEU-3  " << report.bleu3 * 100.0 << "\n"
      << "BLEU-4  " << report.bleu4 * 100.0 << "\n"
      << "ROUGE-L " << report.rouge_l * 100.0 << "\n";
  out << "copy precision ";
  if (report.copy.precision.has_value()) {
    out << *report.copy.precision * 100.0;
  } else {
    out << "n/a";
  }
  out << "\ncopy recall    ";
  if (report.copy.recall.has_value()) {
    out << *report.copy.recall * 100.0;
  } else {
    out << "n/a";
  }
  out << "\nquestion word accuracy " << report.question_word_acc * 100.0 << "\n";
  return out.str();
}

}  // namespace qgen
