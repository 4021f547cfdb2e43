#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qgen/answer_position.hpp"
#include "qgen/corpus.hpp"
#include "qgen/decoder.hpp"
#include "qgen/error.hpp"
#include "qgen/gradcheck.hpp"
#include "qgen/metrics.hpp"
#include "qgen/model.hpp"
#include "qgen/ops.hpp"
#include "qgen/semantic_match.hpp"
#include "qgen/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace qgen;

struct RunConfig {
  std::uint64_t seed = 1;
  double alpha = 1.0;
  double beta = 2.0;
  double lr = 0.001;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  std::size_t patience = 1;
  double clip_norm = 0.0;
  std::size_t hidden = 512;
  std::size_t word_dim = 300;
  std::size_t feat_dim = 16;
  std::size_t beam = 1;
  std::size_t max_len = 30;
  std::string train_path;
  std::string dev_path;
  std::string checkpoint_path;
  std::string out_path;
  std::string embeddings_path;
  std::string hyp_path;
  std::string ref_path;
  std::string vocab_path;
  std::string config_path;
  bool corrupt_adjoint = false;
};

// Key/value lines usable both as a human-readable record of the run and as a
// --config file for an exact replay.
std::string effective_config(const RunConfig& c, const std::string& command) {
  std::ostringstream out;
  out << std::setprecision(17);  // doubles survive the round trip exactly
  out << "# effective configuration (" << command << ")\n";
  out << "seed=" << c.seed << "\n";
  out << "alpha=" << c.alpha << "\n";
  out << "beta=" << c.beta << "\n";
  out << "lr=" << c.lr << "\n";
  out << "batch-size=" << c.batch_size << "\n";
  out << "epochs=" << c.epochs << "\n";
  out << "patience=" << c.patience << "\n";
  out << "clip-norm=" << c.clip_norm << "\n";
  out << "hidden=" << c.hidden << "\n";
  out << "word-dim=" << c.word_dim << "\n";
  out << "feat-dim=" << c.feat_dim << "\n";
  out << "beam=" << c.beam << "\n";
  out << "max-len=" << c.max_len << "\n";
  if (!c.train_path.empty()) out << "train=" << c.train_path << "\n";
  if (!c.dev_path.empty()) out << "dev=" << c.dev_path << "\n";
  if (!c.checkpoint_path.empty()) out << "checkpoint=" << c.checkpoint_path << "\n";
  if (!c.out_path.empty()) out << "out=" << c.out_path << "\n";
  if (!c.embeddings_path.empty()) out << "embeddings=" << c.embeddings_path << "\n";
  return out.str();
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ": expected key=value, got '" + line + "'");
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

// File values fill in whatever the command line left untouched; flags given
// on the command line always win.
void apply_config(const std::map<std::string, std::string>& kv, CLI::App* sub,
                  RunConfig& c) {
  auto given = [&](const char* flag) {
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
  };
  for (const auto& [key, value] : kv) {
    try {
      if (key == "seed") {
        if (!given("--seed")) c.seed = std::stoull(value);
      } else if (key == "alpha") {
        if (!given("--alpha")) c.alpha = std::stod(value);
      } else if (key == "beta") {
        if (!given("--beta")) c.beta = std::stod(value);
      } else if (key == "lr") {
        if (!given("--lr")) c.lr = std::stod(value);
      } else if (key == "batch-size") {
        if (!given("--batch-size")) c.batch_size = std::stoull(value);
      } else if (key == "epochs") {
        if (!given("--epochs")) c.epochs = std::stoull(value);
      } else if (key == "patience") {
        if (!given("--patience")) c.patience = std::stoull(value);
      } else if (key == "clip-norm") {
        if (!given("--clip-norm")) c.clip_norm = std::stod(value);
      } else if (key == "hidden") {
        if (!given("--hidden")) c.hidden = std::stoull(value);
      } else if (key == "word-dim") {
        if (!given("--word-dim")) c.word_dim = std::stoull(value);
      } else if (key == "feat-dim") {
        if (!given("--feat-dim")) c.feat_dim = std::stoull(value);
      } else if (key == "beam") {
        if (!given("--beam")) c.beam = std::stoull(value);
      } else if (key == "max-len") {
        if (!given("--max-len")) c.max_len = std::stoull(value);
      } else if (key == "train") {
        if (!given("--train")) c.train_path = value;
      } else if (key == "dev") {
        if (!given("--dev")) c.dev_path = value;
      } else if (key == "checkpoint") {
        if (!given("--checkpoint")) c.checkpoint_path = value;
      } else if (key == "out") {
        if (!given("--out")) c.out_path = value;
      } else if (key == "embeddings") {
        if (!given("--embeddings")) c.embeddings_path = value;
      } else if (key == "hyp") {
        if (!given("--hyp")) c.hyp_path = value;
      } else if (key == "ref") {
        if (!given("--ref")) c.ref_path = value;
      } else if (key == "vocab") {
        if (!given("--vocab")) c.vocab_path = value;
      } else {
        throw ConfigError("unknown configuration key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError("configuration key '" + key + "' has a non-numeric value '" +
                        value + "'");
    } catch (const std::out_of_range&) {
      throw ConfigError("configuration key '" + key + "' is out of range");
    }
  }
}

VocabSet load_vocab_dir(const fs::path& dir) {
  VocabSet set;
  set.source = Vocab::load_file((dir / "source.vocab").string());
  set.target = Vocab::load_file((dir / "target.vocab").string());
  set.pos = Vocab::load_file((dir / "pos.vocab").string());
  set.ner = Vocab::load_file((dir / "ner.vocab").string());
  set.case_tags = Vocab::load_file((dir / "case.vocab").string());
  return set;
}

void save_vocab_dir(const fs::path& dir, const VocabSet& set) {
  set.source.save_file((dir / "source.vocab").string());
  set.target.save_file((dir / "target.vocab").string());
  set.pos.save_file((dir / "pos.vocab").string());
  set.ner.save_file((dir / "ner.vocab").string());
  set.case_tags.save_file((dir / "case.vocab").string());
}

Dims dims_for(const RunConfig& c, const VocabSet& vocabs) {
  Dims dims;
  dims.word_dim = c.word_dim;
  dims.feat_dim = c.feat_dim;
  dims.hidden = c.hidden;
  dims.src_vocab = vocabs.source.size();
  dims.tgt_vocab = vocabs.target.size();
  dims.pos_vocab = vocabs.pos.size();
  dims.ner_vocab = vocabs.ner.size();
  dims.case_vocab = vocabs.case_tags.size();
  return dims;
}

int cmd_train(const RunConfig& c) {
  if (c.train_path.empty()) throw ConfigError("--train is required");
  if (c.out_path.empty()) throw ConfigError("--out is required");

  std::vector<Example> train_set = load_examples(c.train_path);
  if (train_set.empty()) throw ConfigError("training set " + c.train_path + " is empty");
  std::vector<Example> dev_set;
  if (!c.dev_path.empty()) dev_set = load_examples(c.dev_path);

  fs::create_directories(c.out_path);
  const fs::path out_dir(c.out_path);

  VocabSet vocabs = build_vocabs(train_set, 50000, 50000, 1);
  save_vocab_dir(out_dir, vocabs);

  Rng rng(c.seed);
  ParamStore params;
  Model model = build_model(params, dims_for(c, vocabs), rng);
  if (!c.embeddings_path.empty()) {
    std::size_t n = load_embeddings(c.embeddings_path, vocabs.source,
                                    model.src_word_emb);
    std::cout << "loaded " << n << " pre-trained embedding rows\n";
  }

  TrainConfig tc;
  tc.alpha = c.alpha;
  tc.beta = c.beta;
  tc.lr = c.lr;
  tc.batch_size = c.batch_size;
  tc.epochs = c.epochs;
  tc.patience = c.patience;
  tc.clip_norm = c.clip_norm;
  tc.seed = c.seed;
  tc.max_decode_len = c.max_len;
  tc.validate();

  const std::string echo = effective_config(c, "train");
  std::cout << echo;
  std::ofstream(out_dir / "config.ini") << echo;

  std::ofstream log(out_dir / "train_log.jsonl");
  TrainResult result = train(tc, train_set, dev_set, vocabs, model, params,
                             (out_dir / "model.ckpt").string(), &log);

  std::cout << "best dev BLEU-4 " << result.best_dev_bleu4 * 100.0 << " at epoch "
            << result.best_epoch << ", final lr " << result.final_lr << "\n";
  return 0;
}

int cmd_generate(const RunConfig& c) {
  if (c.checkpoint_path.empty()) throw ConfigError("--checkpoint is required");
  if (c.train_path.empty()) throw ConfigError("--train (input records) is required");
  if (c.out_path.empty()) throw ConfigError("--out is required");
  if (c.beam == 0) throw ConfigError("--beam must be positive");

  const fs::path ckpt(c.checkpoint_path);
  const fs::path dir = ckpt.parent_path().empty() ? "." : ckpt.parent_path();
  VocabSet vocabs = load_vocab_dir(dir);

  RunConfig effective = c;
  const fs::path saved_config = dir / "config.ini";
  if (fs::exists(saved_config)) {
    auto kv = read_kv_file(saved_config.string());
    if (kv.count("hidden")) effective.hidden = std::stoull(kv["hidden"]);
    if (kv.count("word-dim")) effective.word_dim = std::stoull(kv["word-dim"]);
    if (kv.count("feat-dim")) effective.feat_dim = std::stoull(kv["feat-dim"]);
  }

  Rng rng(c.seed);
  ParamStore params;
  Model model = build_model(params, dims_for(effective, vocabs), rng);
  load_checkpoint(c.checkpoint_path, params);

  std::vector<Example> inputs = load_examples(c.train_path);
  std::ofstream out(c.out_path);
  if (!out) throw ConfigError("cannot open " + c.out_path + " for writing");
  for (const Example& ex : inputs) {
    std::vector<std::string> question =
        c.beam == 1 ? greedy_decode(ex, vocabs, model, c.max_len)
                    : beam_decode(ex, vocabs, model, c.beam, c.max_len);
    for (std::size_t i = 0; i < question.size(); ++i) {
      if (i > 0) out << ' ';
      out << question[i];
    }
    out << '\n';
  }
  std::cout << "generated " << inputs.size() << " questions to " << c.out_path
            << "\n";
  return 0;
}

std::vector<TokenSeq> read_token_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<TokenSeq> lines;
  std::string line;
  while (std::getline(in, line)) {
    TokenSeq tokens;
    std::istringstream fields(line);
    std::string t;
    while (fields >> t) tokens.push_back(t);
    lines.push_back(std::move(tokens));
  }
  return lines;
}

int cmd_evaluate(const RunConfig& c) {
  if (c.hyp_path.empty() || c.ref_path.empty() || c.vocab_path.empty()) {
    throw ConfigError("--hyp, --ref and --vocab are required");
  }
  std::vector<TokenSeq> hyps = read_token_lines(c.hyp_path);
  std::vector<TokenSeq> refs = read_token_lines(c.ref_path);
  if (hyps.empty() || hyps.size() != refs.size()) {
    throw ConfigError("hypothesis/reference line counts differ: " +
                      std::to_string(hyps.size()) + " vs " +
                      std::to_string(refs.size()));
  }
  Vocab target = Vocab::load_file(c.vocab_path);
  EvalReport report = evaluate_corpus(hyps, refs, target);
  std::cout << format_report(report);
  if (!c.out_path.empty()) {
    std::ofstream(c.out_path) << format_report(report);
  }
  return 0;
}

// Deterministic synthetic corpus for the gradient check: small vocab, every
// record with a valid span and aligned tags.
std::vector<Example> synth_examples(Rng& rng, std::size_t count, std::size_t m,
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

int cmd_gradcheck(const RunConfig& c) {
  const auto started = std::chrono::steady_clock::now();
  if (c.corrupt_adjoint) ad::set_tanh_adjoint_skew(1.02);

  Rng data_rng(c.seed);
  std::vector<Example> examples = synth_examples(data_rng, 2, 5, 4, 20);
  VocabSet vocabs = build_vocabs(examples, 50000, 50000, 1);

  RunConfig small = c;
  small.hidden = c.hidden;
  small.word_dim = std::min<std::size_t>(c.word_dim, c.hidden);
  small.feat_dim = std::min<std::size_t>(c.feat_dim, c.hidden / 2);

  Rng rng(c.seed + 1);
  ParamStore params;
  Model model = build_model(params, dims_for(small, vocabs), rng);

  Batch batch = make_batch(examples, vocabs);
  Rng pair_rng(c.seed + 2);
  SmPairs pairs = sample_sm_pairs(batch, pair_rng);

  struct Check {
    const char* name;
    std::function<ad::Tensor()> loss;
    std::vector<std::pair<std::string, ad::Tensor>> params;
  };

  auto forward_parts = [&](double alpha, double beta) {
    return total_loss(batch, model, pairs, alpha, beta);
  };

  std::vector<Check> checks;
  checks.push_back({"generation",
                    [&]() { return sequence_nll(batch, model); },
                    params.group("s2s.")});
  checks.push_back({"matching",
                    [&]() {
                      std::vector<ad::Tensor> zs(batch.batch_size),
                          qvecs(batch.batch_size);
                      for (std::size_t r = 0; r < batch.batch_size; ++r) {
                        EncoderOutput enc = encode_example(batch, r, model);
                        TeacherForced tf = run_teacher_forced(batch, r, enc, model);
                        zs[r] = enc.z;
                        qvecs[r] = question_vector(tf.states, batch.target_lens[r]);
                      }
                      return sm_loss(pairs, zs, qvecs, model);
                    },
                    params.group("sm.")});
  checks.push_back({"span",
                    [&]() {
                      std::vector<SpanDistributions> dists;
                      for (std::size_t r = 0; r < batch.batch_size; ++r) {
                        EncoderOutput enc = encode_example(batch, r, model);
                        TeacherForced tf = run_teacher_forced(batch, r, enc, model);
                        std::vector<ad::Tensor> qs(
                            tf.states.begin(),
                            tf.states.begin() +
                                static_cast<std::ptrdiff_t>(batch.target_lens[r]));
                        dists.push_back(
                            span_logits(enc.H, ad::stack_rows(qs), model));
                      }
                      return ap_loss(dists, batch.answer_starts,
                                     batch.answer_ends);
                    },
                    params.group("ap.")});
  checks.push_back(
      {"joint", [&]() { return forward_parts(1.0, 2.0); }, params.entries()});

  bool ok = true;
  for (const Check& check : checks) {
    ad::GradCheckResult r = ad::finite_diff_check(check.loss, check.params);
    std::cout << check.name << ": max rel err " << r.worst_rel_err << " over "
              << r.coords_checked << " coordinates";
    if (!r.ok) {
      std::cout << " FAIL at " << r.worst_param << "[" << r.worst_index
                << "] analytic " << r.worst_analytic << " numeric "
                << r.worst_numeric;
      ok = false;
    }
    std::cout << "\n";
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  std::cout << (ok ? "gradient check passed" : "gradient check FAILED") << " in "
            << seconds << "s\n";
  return ok ? 0 : 1;
}

void add_common(CLI::App* sub, RunConfig& c) {
  sub->add_option("--config", c.config_path,
                  "flat key=value configuration file");
  sub->add_option("--seed", c.seed, "deterministic run seed");
  sub->add_option("--hidden", c.hidden, "encoder/decoder state size (even)");
  sub->add_option("--word-dim", c.word_dim, "word embedding width");
  sub->add_option("--feat-dim", c.feat_dim, "feature embedding width");
  sub->add_option("--max-len", c.max_len, "maximum decoded question length");
  sub->add_option("--beam", c.beam, "beam size, 1 is greedy");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"answer-aware question generation"};
  app.require_subcommand(1);
  RunConfig c;

  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd, c);
  train_cmd->add_option("--alpha", c.alpha, "matching loss weight");
  train_cmd->add_option("--beta", c.beta, "span loss weight");
  train_cmd->add_option("--lr", c.lr, "initial learning rate");
  train_cmd->add_option("--batch-size", c.batch_size, "examples per step");
  train_cmd->add_option("--epochs", c.epochs, "training epochs");
  train_cmd->add_option("--patience", c.patience,
                        "epochs without dev improvement before halving");
  train_cmd->add_option("--clip-norm", c.clip_norm,
                        "gradient L2 clip, 0 disables");
  train_cmd->add_option("--train", c.train_path, "training records (JSON lines)");
  train_cmd->add_option("--dev", c.dev_path, "dev records (JSON lines)");
  train_cmd->add_option("--embeddings", c.embeddings_path,
                        "pre-trained word vectors");
  train_cmd->add_option("--out", c.out_path, "output directory");

  CLI::App* gen_cmd = app.add_subcommand("generate", "decode questions");
  add_common(gen_cmd, c);
  gen_cmd->add_option("--checkpoint", c.checkpoint_path, "trained model file");
  gen_cmd->add_option("--train", c.train_path, "input records (JSON lines)");
  gen_cmd->add_option("--out", c.out_path, "output questions file");

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "score generated questions");
  eval_cmd->add_option("--config", c.config_path,
                       "flat key=value configuration file");
  eval_cmd->add_option("--hyp", c.hyp_path, "hypothesis questions, one per line");
  eval_cmd->add_option("--ref", c.ref_path, "reference questions, one per line");
  eval_cmd->add_option("--vocab", c.vocab_path, "target vocabulary file");
  eval_cmd->add_option("--out", c.out_path, "optional report file");

  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "verify gradients");
  add_common(grad_cmd, c);
  grad_cmd->add_flag("--corrupt-adjoint", c.corrupt_adjoint,
                     "skew one adjoint to prove the check can fail")
      ->group("");  // hidden: test hook only

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    CLI::App* active = train_cmd->parsed()  ? train_cmd
                       : gen_cmd->parsed()  ? gen_cmd
                       : eval_cmd->parsed() ? eval_cmd
                                            : grad_cmd;
    if (grad_cmd->parsed()) {
      // gradcheck defaults to tiny verification dimensions
      if (!grad_cmd->count("--hidden")) c.hidden = 8;
      if (!grad_cmd->count("--word-dim")) c.word_dim = 8;
      if (!grad_cmd->count("--feat-dim")) c.feat_dim = 4;
    }
    if (!c.config_path.empty()) {
      apply_config(read_kv_file(c.config_path), active, c);
    }
    if (train_cmd->parsed()) return cmd_train(c);
    if (gen_cmd->parsed()) return cmd_generate(c);
    if (eval_cmd->parsed()) return cmd_evaluate(c);
    if (grad_cmd->parsed()) return cmd_gradcheck(c);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
