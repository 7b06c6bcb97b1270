#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "hlta/corpus.hpp"
#include "hlta/eval.hpp"
#include "hlta/model.hpp"
#include "hlta/structure.hpp"
#include "hlta/topics.hpp"
#include "json.hpp"

namespace hlta::cli {

namespace {

constexpr const char* kVersion = "1.0.0";
using ojson = nlohmann::ordered_json;

struct VocabArgs {
  std::string input, stopwords, out_vocab, out_corpus;
  std::size_t size = 1000;
  int max_gram = 1;
  int min_df = 3;
};

struct SplitArgs {
  std::string corpus, vocab, out_train, out_test;
  double fraction = 0.8;
  std::uint64_t seed = 1;
};

struct LearnArgs {
  std::string corpus, vocab, out_model, manifest, out_topics;
  HltaConfig config;
  std::string em = "batch";
  std::size_t subsample = 0;
};

struct TopicsArgs {
  std::string model, corpus, vocab, out_json, out_html;
  std::size_t top_k = 0;
  std::size_t display = kDisplayWords;
  bool skip_level_1 = false;
  bool narrow = false;
  int narrow_updates = 10;
  std::size_t narrow_words = kDisplayWords;
};

struct EvalArgs {
  std::string model, test, vocab, topics, analyzed, embeddings, out;
  std::size_t words = kCoherenceWords;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string version_text() {
  const HltaConfig d;
  std::ostringstream s;
  s << "hlta " << kVersion << "\n"
    << "defaults: delta=" << d.delta << " mu=" << d.mu << " kappa=" << d.kappa
    << " tau=" << d.tau << " (30 suggested for corpora of 100k+ documents)"
    << " alpha=" << d.alpha << " minibatch=" << d.minibatch
    << " stepwise_updates=" << d.stepwise_updates
    << " subsample(stepwise)=10000 island_restarts=" << d.island_restarts
    << " island_iters=" << d.island_iters << " seed=" << d.seed
    << " vocab_min_df=3 coherence_words=" << kCoherenceWords
    << " narrow_updates=10\n";
  return s.str();
}

int cmd_vocab(const VocabArgs& a, std::ostream& out, std::ostream& err) {
  if (a.size == 0) throw std::invalid_argument("--size must be positive");
  if (a.max_gram < 1 || a.max_gram > 3) throw std::invalid_argument("--max-gram must be 1, 2 or 3");
  SelectionOptions options;
  options.min_doc_freq = a.min_df;
  if (!a.stopwords.empty()) {
    if (std::filesystem::exists(a.stopwords))
      options.stopwords = read_stopwords(a.stopwords);
    else
      err << "warning: stopword file " << a.stopwords << " not found; using none\n";
  }
  const TextCorpus text = read_text_corpus(a.input);
  if (text.size() == 0) throw DataError("no documents in " + a.input);
  NgramVocabulary result;
  if (a.max_gram == 1) {
    result.vocab = select_vocabulary(text, a.size, options);
    result.corpus = text;
  } else {
    result = promote_ngrams(text, a.size, a.max_gram, options);
  }
  write_vocabulary(result.vocab, a.out_vocab);
  if (!a.out_corpus.empty())
    write_sparse_corpus(binarize(result.corpus, result.vocab), a.out_corpus);
  out << "documents: " << text.size() << "\nterms: " << result.vocab.size() << "\n";
  return kOk;
}

int cmd_split(const SplitArgs& a, std::ostream& out) {
  const Vocabulary vocab = read_vocabulary(a.vocab);
  const auto corpus = read_sparse_corpus(a.corpus, vocab);
  const auto [train, test] = split(corpus, a.fraction, a.seed);
  write_sparse_corpus(train, a.out_train);
  write_sparse_corpus(test, a.out_test);
  out << "train: " << train.num_docs() << "\ntest: " << test.num_docs() << "\n";
  return kOk;
}

int cmd_learn(LearnArgs a, bool minibatch_given, bool subsample_given, std::ostream& out,
              std::ostream& err) {
  HltaConfig& c = a.config;
  c.final_em = a.em == "stepwise" ? FinalEm::kStepwise : FinalEm::kBatch;
  if (c.final_em == FinalEm::kBatch && minibatch_given)
    err << "warning: --minibatch only applies to --em stepwise; ignored\n";
  c.subsample = subsample_given ? a.subsample : (c.final_em == FinalEm::kStepwise ? 10000 : 0);

  const Vocabulary vocab = read_vocabulary(a.vocab);
  const auto corpus = read_sparse_corpus(a.corpus, vocab);
  const HltaResult result = run_hlta(corpus, c);
  write_model(result.model, a.out_model);

  ojson m;
  m["command"] = "learn";
  m["version"] = kVersion;
  m["corpus"] = a.corpus;
  m["vocab"] = a.vocab;
  m["documents"] = corpus.num_docs();
  m["terms"] = corpus.num_terms();
  m["config"] = {{"tau", c.tau},
                 {"mu", c.mu},
                 {"delta", c.delta},
                 {"kappa", c.kappa},
                 {"subsample", c.subsample},
                 {"em", a.em},
                 {"minibatch", c.minibatch},
                 {"stepwise_updates", c.stepwise_updates},
                 {"alpha", c.alpha},
                 {"island_restarts", c.island_restarts},
                 {"island_iters", c.island_iters},
                 {"seed", c.seed}};
  ojson levels = ojson::array();
  for (const auto& l : result.levels)
    levels.push_back({{"level", l.level}, {"inputs", l.inputs}, {"latents", l.latents}});
  m["levels"] = std::move(levels);
  m["variables"] = result.model.size();
  m["train_loglik"] = result.train_log_likelihood;
  m["model"] = a.out_model;
  write_text(a.manifest.empty() ? a.out_model + ".manifest.json" : a.manifest, m.dump(1) + "\n");

  const TopicHierarchy topics = extract_hierarchy(result.model, 0, false);
  if (!a.out_topics.empty()) write_text(a.out_topics, hierarchy_json(topics));
  err << "structure " << result.structure_seconds << " s, final EM " << result.final_seconds
      << " s\n";
  out << "levels: " << result.levels.size() << "\nvariables: " << result.model.size()
      << "\ntrain loglik: " << result.train_log_likelihood << "\n";
  return kOk;
}

int cmd_topics(const TopicsArgs& a, std::ostream& out) {
  const LatentTreeModel model = read_model(a.model);
  TopicHierarchy h = extract_hierarchy(model, a.top_k, a.skip_level_1);
  if (a.narrow) {
    if (a.corpus.empty() || a.vocab.empty())
      throw std::invalid_argument("--narrow needs --corpus and --vocab");
    const auto corpus = read_sparse_corpus(a.corpus, read_vocabulary(a.vocab));
    for (auto& node : h.nodes) {
      const Topic narrow =
          narrow_topic(model, model.index_of(node.topic.latent), a.narrow_words,
                       a.narrow_updates, corpus);
      node.topic.narrow_size = narrow.size;
    }
  }
  if (!a.out_json.empty()) write_text(a.out_json, hierarchy_json(h));
  if (!a.out_html.empty()) write_text(a.out_html, hierarchy_html(h, a.display));
  out << hierarchy_text(h, a.display);
  return kOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const LatentTreeModel model = read_model(a.model);
  const Vocabulary vocab = read_vocabulary(a.vocab);
  const auto test = read_sparse_corpus(a.test, vocab);
  const auto analyzed = a.analyzed.empty() ? test : read_sparse_corpus(a.analyzed, vocab);
  const TopicHierarchy topics = hierarchy_from_json(read_text(a.topics));
  std::unique_ptr<Embeddings> emb;
  if (!a.embeddings.empty()) emb = std::make_unique<Embeddings>(read_embeddings(a.embeddings));
  const EvalReport report = evaluate_run(model, test, analyzed, topics, emb.get(), a.words);
  if (!a.out.empty()) write_text(a.out, report_json(report));
  out << report_table(report);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical latent tree analysis for topic detection", "hlta"};
  app.require_subcommand(0, 1);
  bool version = false;
  unsigned threads = 0;
  bool verbose = false;
  app.add_flag("--version", version, "Print the version and default settings");
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");
  app.add_flag("-v,--verbose", verbose, "Progress lines on stderr");

  VocabArgs va;
  auto* vocab = app.add_subcommand("vocab", "Select a vocabulary and binarize a text corpus");
  vocab->add_option("--input", va.input, "Directory of .txt files or one document per line")
      ->required();
  vocab->add_option("--size", va.size, "Vocabulary size")->capture_default_str();
  vocab->add_option("--max-gram", va.max_gram, "Longest promoted n-gram (1-3)")
      ->capture_default_str();
  vocab->add_option("--stopwords", va.stopwords, "Stopword file, one word per line");
  vocab->add_option("--min-df", va.min_df, "Drop terms in fewer documents")
      ->capture_default_str();
  vocab->add_option("--out-vocab", va.out_vocab, "Vocabulary output")->required();
  vocab->add_option("--out-corpus", va.out_corpus, "Sparse binary corpus output");

  SplitArgs sa;
  auto* split_cmd = app.add_subcommand("split", "Split a sparse corpus into train and test");
  split_cmd->add_option("--corpus", sa.corpus)->required();
  split_cmd->add_option("--vocab", sa.vocab)->required();
  split_cmd->add_option("--train-fraction", sa.fraction)->capture_default_str();
  split_cmd->add_option("--seed", sa.seed)->capture_default_str();
  split_cmd->add_option("--out-train", sa.out_train)->required();
  split_cmd->add_option("--out-test", sa.out_test)->required();

  LearnArgs la;
  auto* learn = app.add_subcommand("learn", "Learn a hierarchical latent tree model");
  learn->add_option("--corpus", la.corpus, "Sparse binary corpus")->required();
  learn->add_option("--vocab", la.vocab, "Vocabulary of the corpus")->required();
  learn->add_option("--out-model", la.out_model, "Model JSON output")->required();
  learn->add_option("--manifest", la.manifest, "Run manifest (default: <model>.manifest.json)");
  learn->add_option("--out-topics", la.out_topics, "Topic hierarchy JSON output");
  learn->add_option("--tau", la.config.tau, "Upper bound on top-level latents")
      ->capture_default_str();
  learn->add_option("--mu", la.config.mu, "Upper bound on island size")->capture_default_str();
  learn->add_option("--delta", la.config.delta, "UD-test threshold")->capture_default_str();
  learn->add_option("--kappa", la.config.kappa, "Final batch EM iterations")
      ->capture_default_str();
  auto* subsample = learn->add_option("--subsample", la.subsample,
                                      "Documents for structure learning (0 = all; "
                                      "default 10000 with --em stepwise)");
  auto* minibatch = learn->add_option("--minibatch", la.config.minibatch, "Stepwise minibatch")
                        ->capture_default_str();
  learn->add_option("--updates", la.config.stepwise_updates, "Stepwise EM updates")
      ->capture_default_str();
  learn->add_option("--alpha", la.config.alpha, "Stepwise stepsize exponent")
      ->capture_default_str();
  learn->add_option("--seed", la.config.seed)->capture_default_str();
  learn->add_option("--em", la.em, "Final EM: batch or stepwise")
      ->check(CLI::IsMember({"batch", "stepwise"}))
      ->capture_default_str();

  TopicsArgs ta;
  auto* topics = app.add_subcommand("topics", "Extract the topic hierarchy of a model");
  topics->add_option("--model", ta.model)->required();
  topics->add_option("--top-k", ta.top_k, "Words kept per topic (0 = whole subtree)")
      ->capture_default_str();
  topics->add_option("--display", ta.display, "Words shown per topic")->capture_default_str();
  topics->add_flag("--skip-level-1", ta.skip_level_1, "Leave out level-1 topics");
  topics->add_flag("--narrow", ta.narrow, "Add narrow topic sizes (needs --corpus, --vocab)");
  topics->add_option("--narrow-updates", ta.narrow_updates)->capture_default_str();
  topics->add_option("--narrow-words", ta.narrow_words)->capture_default_str();
  topics->add_option("--corpus", ta.corpus);
  topics->add_option("--vocab", ta.vocab);
  topics->add_option("--out-json", ta.out_json);
  topics->add_option("--out-html", ta.out_html);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score a model and its topics");
  eval->add_option("--model", ea.model)->required();
  eval->add_option("--test-corpus", ea.test)->required();
  eval->add_option("--vocab", ea.vocab)->required();
  eval->add_option("--topics", ea.topics, "Topic hierarchy JSON")->required();
  eval->add_option("--analyzed-corpus", ea.analyzed,
                   "Corpus for coherence counts (default: the test corpus)");
  eval->add_option("--embeddings", ea.embeddings, "Word vectors in text format");
  eval->add_option("--coherence-words", ea.words)->capture_default_str();
  eval->add_option("--out", ea.out, "Metrics JSON output");

  std::vector<std::string> argv_store{"hlta"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  if (version) {
    out << version_text();
    return kOk;
  }
  if (app.get_subcommands().empty()) {
    err << app.help();
    return kUsage;
  }

  set_num_threads(threads);
  set_log_level(verbose ? 1 : 0);
  try {
    if (vocab->parsed()) return cmd_vocab(va, out, err);
    if (split_cmd->parsed()) return cmd_split(sa, out);
    if (learn->parsed())
      return cmd_learn(la, minibatch->count() > 0, subsample->count() > 0, out, err);
    if (topics->parsed()) return cmd_topics(ta, out);
    if (eval->parsed()) return cmd_eval(ea, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const InvariantError& e) {
    err << "invariant violation: " << e.what() << "\n";
    return kInvariant;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInvariant;
  }
  return kUsage;
}

}  // namespace hlta::cli
