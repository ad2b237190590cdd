#include "topiceq/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "topiceq/align.hpp"
#include "topiceq/apps.hpp"
#include "topiceq/corpus.hpp"
#include "topiceq/error.hpp"
#include "topiceq/evalsuite.hpp"
#include "topiceq/mathtok.hpp"
#include "topiceq/model.hpp"
#include "topiceq/parallel.hpp"
#include "topiceq/topicnet.hpp"
#include "topiceq/trainer.hpp"

namespace topiceq::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Output {
  std::string path;
  std::string format;
  std::ostream* stdout_stream = nullptr;

  bool json_format() const { return format == "json"; }

  void write(const std::string& text) const {
    if (path.empty()) {
      *stdout_stream << text;
      return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::IoError, "cannot write " + path);
    f << text;
  }
};

void add_output(CLI::App* sub, Output& o, const std::string& default_format, std::ostream& out) {
  o.stdout_stream = &out;
  o.format = default_format;
  sub->add_option("--out", o.path, "output file (standard output when empty)");
  sub->add_option("--format", o.format, "output format")
      ->check(CLI::IsMember({"json", "text"}))
      ->capture_default_str();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::vector<double> values(const Array& a) {
  const auto d = a.data();
  return {d.begin(), d.end()};
}

std::string join_tokens(const std::vector<std::string>& tokens) { return mathtok::detokenize(tokens); }

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Array parse_theta(const std::string& s, std::size_t k) {
  std::vector<double> vals;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) {
    try {
      vals.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw UsageError("--theta expects comma-separated numbers, got '" + s + "'");
    }
  }
  Array theta(Shape{vals.size()});
  for (std::size_t i = 0; i < vals.size(); ++i) theta[i] = vals[i];
  apps::validate_theta(theta, k);
  return theta;
}

// Exactly one of --topic / --theta / --context selects theta.
struct ThetaChoice {
  int topic = -1;
  std::string theta;
  std::string context;
  CLI::Option* topic_opt = nullptr;
  CLI::Option* theta_opt = nullptr;
  CLI::Option* context_opt = nullptr;

  void add(CLI::App* sub) {
    topic_opt = sub->add_option("--topic", topic, "one-hot topic index");
    theta_opt = sub->add_option("--theta", theta, "explicit topic proportions, comma-separated");
    context_opt = sub->add_option("--context", context, "context text whose inferred topic proportions are used");
    topic_opt->excludes(theta_opt)->excludes(context_opt);
    theta_opt->excludes(context_opt);
  }

  bool given() const { return topic_opt->count() + theta_opt->count() + context_opt->count() > 0; }

  Array resolve(const Model& m) const {
    const std::size_t k = m.config.topic.num_topics;
    if (topic_opt->count()) {
      if (topic < 0) throw UsageError("--topic must be non-negative");
      return apps::one_hot(static_cast<std::size_t>(topic), k);
    }
    if (theta_opt->count()) return parse_theta(theta, k);
    const auto bow = corpus::preprocess_context(corpus::split_sentences(context), m.vocabs.words);
    return topicnet::posterior_mean(m.params, m.config.topic, bow).theta;
  }
};

std::vector<fs::path> tex_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".tex") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw Error(ErrorKind::IoError, "no such input: " + in);
    }
  }
  return files;
}

void write_split(const std::vector<corpus::ContextEqPair>& pairs, const std::string& dir, std::uint64_t seed,
                 json& summary) {
  const auto split = corpus::split_corpus(pairs, {0.8, 0.1, 0.1}, seed);
  fs::create_directories(dir);
  corpus::write_pairs(fs::path(dir) / "train.jsonl", split.train);
  corpus::write_pairs(fs::path(dir) / "valid.jsonl", split.valid);
  corpus::write_pairs(fs::path(dir) / "test.jsonl", split.test);
  summary["split"] = {{"dir", dir},
                      {"train", split.train.size()},
                      {"valid", split.valid.size()},
                      {"test", split.test.size()}};
}

std::string summary_text(const json& j) {
  std::ostringstream os;
  for (const auto& [k, v] : j.items()) os << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
  return os.str();
}

// Training flags. Each flag overrides the config file only when given.
struct TrainFlags {
  std::string config, train, valid, out, metrics, vocab_dir, phrases;
  TrainConfig d;  // defaults shown in --help
  VocabOptions vocab;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  std::string variant = "TE";
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* sub, bool alignment) {
    if (alignment) {
      d.model.eq.variant = EqVariant::None;
      d.model.align.enabled = true;
    }
    sub->add_option("--config", config, "JSON training config (flags override its keys)");
    sub->add_option("--train", train, "training pairs (JSON Lines)")->required();
    sub->add_option("--valid", valid, "validation pairs (JSON Lines)");
    sub->add_option("--out", out, "checkpoint path")->required();
    sub->add_option("--metrics", metrics, "per-epoch metrics (JSON Lines)");
    sub->add_option("--vocab-dir", vocab_dir, "directory with words.txt / math.txt / symbols.txt from build-vocabs");
    auto opt = [&](const std::string& name, auto& target, const std::string& help) {
      opts[name] = sub->add_option("--" + name, target, help)->capture_default_str();
    };
    opt("topics", d.model.topic.num_topics, "number of topics K");
    opt("hidden", d.model.topic.hidden, "inference network width");
    opt("diversity-weight", d.model.diversity_weight, "topic diversity regularizer weight");
    if (!alignment) {
      opt("variant", variant, "equation model");
      opts["variant"]->check(CLI::IsMember({"TE", "TD", "PLAIN", "FIXED_TOPIC_CONCAT", "BOW", "NONE"}));
      opt("layers", d.model.eq.layers, "LSTM layers");
      opt("width", d.model.eq.width, "LSTM width");
      opt("embed", d.model.eq.embed_dim, "token embedding size");
      opt("dropout", d.model.eq.dropout, "LSTM output dropout");
      opt("fixed-topic-checkpoint", d.fixed_topic_checkpoint, "context-only checkpoint for FIXED_TOPIC_CONCAT");
      opts["shuffle-equations"] =
          sub->add_flag("--shuffle-equations", d.shuffle_equations, "train on token-shuffled equations");
    } else {
      sub->add_option("--phrases", phrases, "phrase list, one phrase per line")->required();
      opts["baseline"] = sub->add_flag("--baseline", "topic-independent alignment matrix");
      opt("factors", d.model.align.factors, "alignment factors F (0: K)");
    }
    opt("lr", d.lr, "Adam learning rate");
    opt("batch", d.batch_size, "minibatch size");
    opt("clip", d.clip, "global gradient-norm clip");
    opt("epochs", d.epochs, "training epochs");
    opt("restarts", d.restarts, "independent initializations, best validation perplexity kept");
    opt("eval-every", d.eval_every, "epochs between validation passes");
    opts["kl-annealing"] = sub->add_flag("--kl-annealing", d.kl_annealing, "ramp the KL weight up linearly");
    opt("kl-anneal-epochs", d.kl_anneal_epochs, "epochs of KL ramp");
    opts["seed"] = sub->add_option("--seed", seed, "random seed")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads (0: TOPICEQ_THREADS, else 1)")->capture_default_str();
    sub->add_option("--min-doc-freq", vocab.min_doc_freq, "word vocabulary document-frequency cut")
        ->capture_default_str();
    sub->add_option("--max-words", vocab.max_words, "word vocabulary size cap")->capture_default_str();
    sub->add_option("--max-math", vocab.max_math, "math vocabulary size cap")->capture_default_str();
    sub->add_option("--max-symbols", vocab.max_symbols, "alignment symbol vocabulary size cap")
        ->capture_default_str();
  }

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }

  TrainConfig resolve(bool alignment) const {
    TrainConfig c;
    if (alignment) {
      c.model.eq.variant = EqVariant::None;
      c.model.align.enabled = true;
    }
    if (!config.empty()) {
      json j;
      try {
        j = json::parse(read_file(config));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::InputError, "config " + config + ": " + e.what());
      }
      from_json(j, c);
    }
    if (given("topics")) c.model.topic.num_topics = d.model.topic.num_topics;
    if (given("hidden")) c.model.topic.hidden = d.model.topic.hidden;
    if (given("diversity-weight")) c.model.diversity_weight = d.model.diversity_weight;
    if (given("variant")) c.model.eq.variant = parse_variant(variant);
    if (given("layers")) c.model.eq.layers = d.model.eq.layers;
    if (given("width")) c.model.eq.width = d.model.eq.width;
    if (given("embed")) c.model.eq.embed_dim = d.model.eq.embed_dim;
    if (given("dropout")) c.model.eq.dropout = d.model.eq.dropout;
    if (given("fixed-topic-checkpoint")) c.fixed_topic_checkpoint = d.fixed_topic_checkpoint;
    if (given("shuffle-equations")) c.shuffle_equations = true;
    if (given("baseline")) c.model.align.topic_aware = false;
    if (given("factors")) c.model.align.factors = d.model.align.factors;
    if (given("lr")) c.lr = d.lr;
    if (given("batch")) c.batch_size = d.batch_size;
    if (given("clip")) c.clip = d.clip;
    if (given("epochs")) c.epochs = d.epochs;
    if (given("restarts")) c.restarts = d.restarts;
    if (given("eval-every")) c.eval_every = d.eval_every;
    if (given("kl-annealing")) c.kl_annealing = true;
    if (given("kl-anneal-epochs")) c.kl_anneal_epochs = d.kl_anneal_epochs;
    if (given("seed") || config.empty()) c.seed = seed;
    c.threads = threads;
    if (alignment) {
      c.model.eq.variant = EqVariant::None;
      c.model.align.enabled = true;
    }
    return c;
  }
};

int run_train(const TrainFlags& f, bool alignment, std::ostream& err) {
  TrainConfig cfg = f.resolve(alignment);
  const auto train_pairs = corpus::read_pairs(f.train);
  const auto valid_pairs = f.valid.empty() ? std::vector<corpus::ContextEqPair>{} : corpus::read_pairs(f.valid);

  Vocabs vocabs;
  const bool wants_math = !alignment && cfg.model.eq.variant != EqVariant::None;
  if (!f.vocab_dir.empty()) {
    const fs::path dir(f.vocab_dir);
    vocabs.words = Vocab::load(dir / "words.txt");
    if (wants_math) vocabs.math = Vocab::load(dir / "math.txt");
    if (alignment) vocabs.symbols = Vocab::load(dir / "symbols.txt");
  } else {
    VocabOptions vo = f.vocab;
    vo.math = wants_math;
    vo.symbols = alignment;
    vocabs = build_vocabs(train_pairs, vo);
  }
  if (alignment) vocabs.phrases = align::load_phrase_vocab(f.phrases);

  Model model = Model::create(cfg.model, std::move(vocabs), cfg.seed);
  cfg.model = model.config;
  if (cfg.model.eq.variant == EqVariant::FixedTopicConcat) {
    adopt_frozen_topic_model(model, Model::load(cfg.fixed_topic_checkpoint));
  }
  const auto tr = prepare_pairs(train_pairs, model);
  const auto va = prepare_pairs(valid_pairs, model);

  std::ofstream metrics;
  TrainHooks hooks;
  hooks.progress = &err;
  if (!f.metrics.empty()) {
    metrics.open(f.metrics, std::ios::binary);
    if (!metrics) throw Error(ErrorKind::IoError, "cannot write " + f.metrics);
    hooks.metrics_jsonl = &metrics;
  }
  TrainResult res = train(cfg, model, tr, va, hooks);
  model.params = res.best_params;
  model.save(f.out);
  err << "saved " << f.out << " (epoch " << res.best_epoch << ")\n";
  return 0;
}

std::function<bool(const std::vector<std::string>&)> external_checker(const std::string& cmd) {
  return [cmd](const std::vector<std::string>& tokens) {
    static std::atomic<unsigned long> counter{0};
    const fs::path file = fs::temp_directory_path() /
                          ("topiceq-check-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".tex");
    {
      std::ofstream f(file);
      f << mathtok::detokenize(tokens) << '\n';
    }
    const int rc = std::system((cmd + " '" + file.string() + "' >/dev/null 2>&1").c_str());
    fs::remove(file);
    return rc == 0;
  };
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"topiceq: joint topic and equation models for scientific text", "topiceq"};
  app.require_subcommand(1);
  std::function<int()> action;

  // build-corpus
  auto* bc = app.add_subcommand("build-corpus", "extract context-equation pairs from LaTeX sources");
  std::vector<std::string> bc_inputs;
  std::string bc_split;
  std::uint64_t bc_seed = 1;
  Output bc_out;
  bc->add_option("--input", bc_inputs, ".tex files or directories searched recursively")->required();
  bc->add_option("--corpus-out", bc_out.path, "pairs file (JSON Lines)")->required();
  bc->add_option("--split-dir", bc_split, "also write train/valid/test.jsonl (80/10/10) here");
  bc->add_option("--seed", bc_seed, "split seed")->capture_default_str();
  Output bc_report;
  add_output(bc, bc_report, "text", out);
  bc->callback([&] {
    action = [&] {
      std::vector<corpus::ContextEqPair> pairs;
      const auto files = tex_inputs(bc_inputs);
      for (const auto& f : files) {
        auto got = corpus::extract_pairs(read_file(f));
        pairs.insert(pairs.end(), got.begin(), got.end());
      }
      corpus::write_pairs(bc_out.path, pairs);
      json summary{{"documents", files.size()}, {"pairs", pairs.size()}, {"corpus", bc_out.path}};
      if (!bc_split.empty()) write_split(pairs, bc_split, bc_seed, summary);
      bc_report.write(bc_report.json_format() ? dump(summary) : summary_text(summary));
      return 0;
    };
  });

  // build-vocabs
  auto* bv = app.add_subcommand("build-vocabs", "build word, math and symbol vocabularies from training pairs");
  std::string bv_corpus, bv_dir;
  VocabOptions bv_opts;
  bv->add_option("--corpus", bv_corpus, "training pairs (JSON Lines)")->required();
  bv->add_option("--out-dir", bv_dir, "directory for words.txt, math.txt, symbols.txt")->required();
  bv->add_option("--min-doc-freq", bv_opts.min_doc_freq, "word document-frequency cut")->capture_default_str();
  bv->add_option("--max-words", bv_opts.max_words, "word vocabulary size cap")->capture_default_str();
  bv->add_option("--max-math", bv_opts.max_math, "math vocabulary size cap")->capture_default_str();
  bv->add_option("--max-symbols", bv_opts.max_symbols, "symbol vocabulary size cap")->capture_default_str();
  Output bv_report;
  add_output(bv, bv_report, "text", out);
  bv->callback([&] {
    action = [&] {
      VocabOptions vo = bv_opts;
      vo.symbols = true;
      const Vocabs v = build_vocabs(corpus::read_pairs(bv_corpus), vo);
      fs::create_directories(bv_dir);
      v.words.save(fs::path(bv_dir) / "words.txt");
      v.math.save(fs::path(bv_dir) / "math.txt");
      v.symbols.save(fs::path(bv_dir) / "symbols.txt");
      json summary{{"words", v.words.size()}, {"math", v.math.size()}, {"symbols", v.symbols.size()}};
      bv_report.write(bv_report.json_format() ? dump(summary) : summary_text(summary));
      return 0;
    };
  });

  // synth
  auto* sy = app.add_subcommand("synth", "generate a synthetic corpus with known topics");
  std::string sy_preset = "equation", sy_spec, sy_corpus, sy_split, sy_spec_out;
  std::size_t sy_docs = 3000;
  std::uint64_t sy_seed = 1;
  Output sy_report;
  auto* sy_preset_opt = sy->add_option("--preset", sy_preset, "built-in spec")
                            ->check(CLI::IsMember({"equation", "alignment"}))
                            ->capture_default_str();
  sy->add_option("--spec", sy_spec, "synthetic corpus settings JSON (instead of --preset)")->excludes(sy_preset_opt);
  auto* sy_docs_opt = sy->add_option("--num-docs", sy_docs, "pairs to generate")->capture_default_str();
  auto* sy_seed_opt = sy->add_option("--seed", sy_seed, "generator seed")->capture_default_str();
  sy->add_option("--corpus-out", sy_corpus, "pairs file (JSON Lines)")->required();
  sy->add_option("--split-dir", sy_split, "also write train/valid/test.jsonl (80/10/10) here");
  sy->add_option("--spec-out", sy_spec_out, "write the corpus settings used (JSON)");
  add_output(sy, sy_report, "text", out);
  sy->callback([&] {
    action = [&] {
      corpus::SyntheticSpec spec;
      if (!sy_spec.empty()) {
        spec = corpus::read_synthetic_spec(sy_spec);
        if (sy_docs_opt->count()) spec.num_docs = sy_docs;
        if (sy_seed_opt->count()) spec.seed = sy_seed;
      } else {
        spec = sy_preset == "alignment" ? corpus::alignment_preset(sy_docs, sy_seed)
                                        : corpus::equation_preset(sy_docs, sy_seed);
      }
      const auto pairs = corpus::generate_synthetic(spec);
      corpus::write_pairs(sy_corpus, pairs);
      if (!sy_spec_out.empty()) corpus::write_synthetic_spec(sy_spec_out, spec);
      json summary{{"pairs", pairs.size()}, {"topics", spec.num_topics()}, {"corpus", sy_corpus}};
      if (!sy_split.empty()) write_split(pairs, sy_split, spec.seed, summary);
      sy_report.write(sy_report.json_format() ? dump(summary) : summary_text(summary));
      return 0;
    };
  });

  // train / align-train
  auto* tr = app.add_subcommand("train", "train a topic model with an equation model");
  TrainFlags tr_flags;
  tr_flags.add(tr, false);
  tr->callback([&] { action = [&] { return run_train(tr_flags, false, err); }; });

  auto* at = app.add_subcommand("align-train", "train a topic model with the symbol-phrase alignment model");
  TrainFlags at_flags;
  at_flags.add(at, true);
  at->callback([&] { action = [&] { return run_train(at_flags, true, err); }; });

  // eval
  auto* ev = app.add_subcommand("eval", "coherence, perplexity and syntax error rate on test pairs");
  std::string ev_model, ev_test, ev_check;
  eval::SyntaxEvalOptions ev_syntax;
  std::size_t ev_top = 10;
  Output ev_out;
  ev->add_option("--model", ev_model, "checkpoint")->required();
  ev->add_option("--test", ev_test, "test pairs (JSON Lines)")->required();
  ev->add_option("--samples", ev_syntax.num_samples, "equations sampled for the syntax error rate")
      ->capture_default_str();
  ev->add_option("--temperature", ev_syntax.temperature, "sampling temperature")->capture_default_str();
  ev->add_option("--max-len", ev_syntax.max_len, "maximum sampled length")->capture_default_str();
  ev->add_flag("--posterior", ev_syntax.use_posterior, "sample theta from test posteriors instead of the prior");
  ev->add_option("--top-n", ev_top, "top words per topic for NPMI")->capture_default_str();
  ev->add_option("--latex-check-cmd", ev_check,
                 "external checker; run with a file holding one equation, exit status 0 means valid");
  ev->add_option("--seed", ev_syntax.seed, "sampling seed")->capture_default_str();
  ev->add_option("--threads", ev_syntax.threads, "worker threads (0: TOPICEQ_THREADS, else 1)")
      ->capture_default_str();
  add_output(ev, ev_out, "json", out);
  ev->callback([&] {
    action = [&] {
      const Model m = Model::load(ev_model);
      if (!ev_check.empty()) ev_syntax.oracle = external_checker(ev_check);
      const json report = eval::eval_report(m, corpus::read_pairs(ev_test), ev_syntax, ev_top);
      if (ev_out.json_format()) {
        ev_out.write(dump(report));
      } else {
        std::ostringstream os;
        os << "coherence " << report["coherence"]["mean"].dump() << '\n'
           << "perplexity " << report["perplexity"].dump() << '\n'
           << "syntax_error_rate " << report["syntax_error_rate"].dump() << '\n';
        ev_out.write(os.str());
      }
      return 0;
    };
  });

  // generate
  auto* ge = app.add_subcommand("generate", "sample equations for a topic, a topic mixture or a context");
  std::string ge_model, ge_prefix;
  std::size_t ge_num = 5;
  std::uint64_t ge_seed = 1;
  apps::GenerateOptions ge_opts;
  ThetaChoice ge_theta;
  Output ge_out;
  ge->add_option("--model", ge_model, "checkpoint")->required();
  ge_theta.add(ge);
  ge->add_option("--num", ge_num, "equations to generate")->capture_default_str();
  ge->add_flag("--greedy", ge_opts.greedy, "argmax decoding");
  ge->add_option("--temperature", ge_opts.temperature, "sampling temperature")->capture_default_str();
  ge->add_option("--max-len", ge_opts.max_len, "maximum length")->capture_default_str();
  ge->add_option("--prefix", ge_prefix, "LaTeX the equation must start with");
  ge->add_option("--seed", ge_seed, "sampling seed")->capture_default_str();
  add_output(ge, ge_out, "text", out);
  ge->callback([&] {
    action = [&] {
      if (!ge_theta.given()) throw UsageError("generate needs one of --topic, --theta or --context");
      const Model m = Model::load(ge_model);
      ge_opts.prefix = mathtok::tokenize(ge_prefix);
      const Array theta = ge_theta.resolve(m);
      const auto eqs = apps::generate_from_topic(m, theta, ge_num, ge_opts, ge_seed);
      if (ge_out.json_format()) {
        json arr = json::array();
        for (const auto& e : eqs) arr.push_back(join_tokens(e));
        ge_out.write(dump({{"theta", values(theta)}, {"equations", arr}}));
      } else {
        std::string text;
        for (const auto& e : eqs) text += join_tokens(e) + "\n";
        ge_out.write(text);
      }
      return 0;
    };
  });

  // interpolate
  auto* ip = app.add_subcommand("interpolate", "greedy decodes along the segment between two one-hot topics");
  std::string ip_model, ip_prefix;
  std::size_t ip_from = 0, ip_to = 1, ip_steps = 5, ip_max = 200;
  Output ip_out;
  ip->add_option("--model", ip_model, "checkpoint")->required();
  ip->add_option("--from", ip_from, "start topic")->required();
  ip->add_option("--to", ip_to, "end topic")->required();
  ip->add_option("--steps", ip_steps, "evenly spaced points including both ends")->capture_default_str();
  ip->add_option("--prefix", ip_prefix, "LaTeX every decode starts with");
  ip->add_option("--max-len", ip_max, "maximum length")->capture_default_str();
  add_output(ip, ip_out, "text", out);
  ip->callback([&] {
    action = [&] {
      const Model m = Model::load(ip_model);
      const auto steps = apps::interpolate_topics(m, ip_from, ip_to, ip_steps, mathtok::tokenize(ip_prefix), ip_max);
      if (ip_out.json_format()) {
        json arr = json::array();
        for (const auto& s : steps) arr.push_back({{"t", s.t}, {"theta", values(s.theta)}, {"equation", join_tokens(s.tokens)}});
        ip_out.write(dump({{"steps", arr}}));
      } else {
        std::ostringstream os;
        for (const auto& s : steps) os << std::fixed << std::setprecision(3) << s.t << '\t' << join_tokens(s.tokens) << '\n';
        ip_out.write(os.str());
      }
      return 0;
    };
  });

  // infer-topic
  auto* it = app.add_subcommand("infer-topic", "rank topics by the likelihood of an equation");
  std::string it_model, it_eq;
  std::size_t it_top = 0, it_words = 5;
  Output it_out;
  it->add_option("--model", it_model, "checkpoint")->required();
  it->add_option("--equation", it_eq, "LaTeX equation")->required();
  it->add_option("--top-n", it_top, "topics to report (0: all)")->capture_default_str();
  it->add_option("--words", it_words, "top words shown per topic")->capture_default_str();
  add_output(it, it_out, "json", out);
  it->callback([&] {
    action = [&] {
      const Model m = Model::load(it_model);
      const auto ranking = apps::infer_equation_topic(m, it_eq, it_top, it_words);
      if (it_out.json_format()) {
        it_out.write(dump(apps::to_json(ranking)));
      } else {
        std::ostringstream os;
        for (const auto& s : ranking) {
          os << s.topic << '\t' << std::setprecision(10) << s.log_likelihood << '\t';
          for (std::size_t i = 0; i < s.top_words.size(); ++i) os << (i ? " " : "") << s.top_words[i];
          os << '\n';
        }
        it_out.write(os.str());
      }
      return 0;
    };
  });

  // align-predict
  auto* ap = app.add_subcommand("align-predict", "top phrases for a math symbol");
  std::string ap_model, ap_symbol;
  std::size_t ap_top = 10;
  ThetaChoice ap_theta;
  Output ap_out;
  ap->add_option("--model", ap_model, "alignment checkpoint")->required();
  ap->add_option("--symbol", ap_symbol, "math symbol, e.g. \\sigma")->required();
  ap_theta.add(ap);
  ap->add_option("--top-n", ap_top, "phrases to report")->capture_default_str();
  add_output(ap, ap_out, "text", out);
  ap->callback([&] {
    action = [&] {
      const Model m = Model::load(ap_model);
      if (!m.config.align.enabled) throw Error(ErrorKind::InputError, ap_model + " is not an alignment model");
      const std::size_t k = m.config.topic.num_topics;
      Array theta(Shape{k});
      if (ap_theta.given()) {
        theta = ap_theta.resolve(m);
      } else {
        for (std::size_t i = 0; i < k; ++i) theta[i] = 1.0 / static_cast<double>(k);
      }
      const auto ranked =
          align::predict_phrases(m.params, m.config.align, m.vocabs.phrases, m.vocabs.symbols, ap_symbol, theta, ap_top);
      if (ap_out.json_format()) {
        json arr = json::array();
        for (const auto& [p, prob] : ranked) arr.push_back({{"phrase", p}, {"probability", prob}});
        ap_out.write(dump({{"symbol", ap_symbol}, {"theta", values(theta)}, {"phrases", arr}}));
      } else {
        std::ostringstream os;
        for (const auto& [p, prob] : ranked) os << p << '\t' << std::setprecision(6) << prob << '\n';
        ap_out.write(os.str());
      }
      return 0;
    };
  });

  // topics
  auto* tp = app.add_subcommand("topics", "top words of every topic");
  std::string tp_model;
  std::size_t tp_top = 10;
  Output tp_out;
  tp->add_option("--model", tp_model, "checkpoint")->required();
  tp->add_option("--top-n", tp_top, "words per topic")->capture_default_str();
  add_output(tp, tp_out, "text", out);
  tp->callback([&] {
    action = [&] {
      const Model m = Model::load(tp_model);
      const Array beta = topicnet::beta_values(m.params);
      const std::size_t n = std::min(tp_top, m.vocabs.words.size());
      json arr = json::array();
      std::ostringstream os;
      for (std::size_t k = 0; k < m.config.topic.num_topics; ++k) {
        const auto words = topicnet::top_words_with_probs(beta, k, n, m.vocabs.words);
        json jw = json::array();
        os << "topic " << k << ':';
        for (const auto& [w, p] : words) {
          jw.push_back({{"word", w}, {"probability", p}});
          os << ' ' << w;
        }
        os << '\n';
        arr.push_back({{"topic", k}, {"words", jw}});
      }
      tp_out.write(tp_out.json_format() ? dump({{"topics", arr}}) : os.str());
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 1;
  }
  try {
    return action ? action() : 1;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"topiceq"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace topiceq::cli
