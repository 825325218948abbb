// scitag: command-line front end wiring corpus ingestion, CRF training,
// graph construction, label propagation, semi-supervised rounds, tagging,
// and evaluation into reproducible pipelines.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "scitag/corpus.hpp"
#include "scitag/encoder.hpp"
#include "scitag/eval.hpp"
#include "scitag/graph.hpp"
#include "scitag/serialize.hpp"
#include "scitag/ssl.hpp"
#include "scitag/util.hpp"

namespace fs = std::filesystem;
using namespace scitag;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDataError = 2;
constexpr int kExitUsage = 64;

// Invalid flag values or contradictory settings, as opposed to bad data.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int g_log_level = 1;  // 0 quiet, 1 info, 2 debug

void info(const std::string& message) {
  if (g_log_level >= 1) std::cerr << message << "\n";
}

// `key = value` lines with '#' comments; returned in file order.
std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file: " + path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto begin = s.find_first_not_of(" \t");
    const auto end = s.find_last_not_of(" \t");
    return begin == std::string::npos ? std::string() : s.substr(begin, end - begin + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos,
            path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), path + ":" + std::to_string(line_no) + ": empty key");
    entries.emplace_back(key, value);
  }
  return entries;
}

std::vector<corpus::LabeledSentence> read_labeled(const std::string& path) {
  auto sentences = corpus::read_column(path);
  for (const auto& sentence : sentences) {
    require(sentence.labeled(), path + ": sentence " + std::to_string(sentence.index) +
                                    " has no label column");
  }
  return sentences;
}

std::vector<corpus::LabeledSentence> read_many(const std::vector<std::string>& paths) {
  std::vector<corpus::LabeledSentence> all;
  for (const std::string& path : paths) {
    for (auto& sentence : corpus::read_column(path)) {
      sentence.labels.clear();  // unlabeled scope regardless of extra columns
      all.push_back(std::move(sentence));
    }
  }
  return all;
}

void write_metrics(const fs::path& out_dir, const std::vector<eval::MetricReport>& reports) {
  std::ofstream tsv(out_dir / "metrics.tsv");
  require(tsv.good(), "cannot write " + (out_dir / "metrics.tsv").string());
  eval::write_tsv(tsv, reports);
  std::ofstream kv(out_dir / "metrics.kv");
  require(kv.good(), "cannot write " + (out_dir / "metrics.kv").string());
  eval::write_kv(kv, reports);
}

std::vector<eval::MetricReport> full_reports(
    const std::vector<corpus::LabeledSentence>& gold,
    const std::vector<std::vector<int>>& pred_labels) {
  std::vector<std::vector<corpus::Span>> gold_spans, pred_spans;
  std::vector<std::vector<int>> gold_labels;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    gold_labels.push_back(gold[s].labels);
    gold_spans.push_back(corpus::iobes_to_spans(gold[s].labels));
    pred_spans.push_back(corpus::iobes_to_spans(pred_labels[s]));
  }
  return {
      eval::span_prf(gold_spans, pred_spans, eval::Subtask::Classification),
      eval::span_prf(gold_spans, pred_spans, eval::Subtask::Identification),
      eval::token_prf(gold_labels, pred_labels, eval::Subtask::Classification),
      eval::token_prf(gold_labels, pred_labels, eval::Subtask::Identification),
  };
}

void print_reports(const std::vector<eval::MetricReport>& reports) {
  std::ostringstream line;
  line << std::fixed << std::setprecision(3);
  for (const auto& report : reports) {
    line.str("");
    line << eval::level_name(report.level) << " " << eval::subtask_name(report.subtask) << ": P "
         << report.overall.precision << "  R " << report.overall.recall << "  F1 "
         << report.overall.f1;
    std::cout << line.str() << "\n";
  }
}

// Shared model-construction options.
struct ModelOptions {
  std::string embeddings;
  unsigned long long seed = 1;
  double learning_rate = 0.05;
  int epochs = 100;
  int patience = 10;
  double clip_norm = 0.0;
};

void add_model_options(CLI::App* cmd, ModelOptions& opts) {
  cmd->add_option("--embeddings", opts.embeddings,
                  "pretrained embeddings (word2vec text, 250-dim); random init when absent");
  cmd->add_option("--seed", opts.seed, "master RNG seed");
  cmd->add_option("--lr", opts.learning_rate, "SGD learning rate");
  cmd->add_option("--epochs", opts.epochs, "maximum training epochs");
  cmd->add_option("--patience", opts.patience, "early-stopping patience in epochs");
  cmd->add_option("--clip-norm", opts.clip_norm, "gradient norm clip (0 disables)");
}

encoder::EmbeddingTable make_embeddings(
    const ModelOptions& opts,
    const std::vector<const std::vector<corpus::LabeledSentence>*>& corpora,
    std::mt19937_64& rng) {
  if (!opts.embeddings.empty()) return encoder::EmbeddingTable::load(opts.embeddings);
  return encoder::EmbeddingTable::random(encoder::collect_word_vocab(corpora), 250, rng);
}

encoder::TrainConfig train_config(const ModelOptions& opts) {
  encoder::TrainConfig config;
  config.learning_rate = opts.learning_rate;
  config.max_epochs = opts.epochs;
  config.patience = opts.patience;
  config.clip_norm = opts.clip_norm;
  config.verbose = g_log_level >= 2;
  return config;
}

int cmd_convert(const std::string& brat_dir, const std::string& out_file) {
  std::vector<std::string> stems, orphans;
  for (const auto& entry : fs::directory_iterator(brat_dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path path = entry.path();
    if (path.extension() == ".txt") {
      if (fs::exists(fs::path(path).replace_extension(".ann"))) {
        stems.push_back(path.stem().string());
      } else {
        orphans.push_back(path.filename().string() + " (missing .ann)");
      }
    } else if (path.extension() == ".ann") {
      if (!fs::exists(fs::path(path).replace_extension(".txt"))) {
        orphans.push_back(path.filename().string() + " (missing .txt)");
      }
    }
  }
  if (!orphans.empty()) {
    std::sort(orphans.begin(), orphans.end());
    for (const auto& orphan : orphans) std::cerr << "unpaired file: " << orphan << "\n";
    return kExitDataError;
  }
  std::sort(stems.begin(), stems.end());

  std::vector<corpus::LabeledSentence> all;
  std::size_t warning_count = 0;
  for (const std::string& stem : stems) {
    const fs::path base = fs::path(brat_dir) / stem;
    corpus::BratDocument doc =
        corpus::read_brat(base.string() + ".txt", base.string() + ".ann");
    for (const auto& warning : doc.warnings) {
      ++warning_count;
      info("warning: " + warning.file + ": " + warning.message);
    }
    for (auto& sentence : doc.sentences) all.push_back(std::move(sentence));
  }
  std::ofstream out(out_file);
  require(out.good(), "cannot write " + out_file);
  corpus::write_column(out, all);
  std::cout << "converted " << stems.size() << " documents, " << all.size() << " sentences, "
            << warning_count << " warnings\n";
  return kExitOk;
}

struct TrainArgs {
  std::string train, dev, out;
  ModelOptions model;
};

int cmd_train(const TrainArgs& args) {
  const auto train = read_labeled(args.train);
  const auto dev = read_labeled(args.dev);
  std::mt19937_64 rng(args.model.seed);

  encoder::EmbeddingTable table = make_embeddings(args.model, {&train, &dev}, rng);
  const std::vector<int> chars = encoder::collect_char_vocab({&train, &dev});
  encoder::ModelParams params =
      encoder::ModelParams::init(std::move(table), chars, encoder::Dims{}, rng);

  const encoder::TrainResult result =
      encoder::train_supervised(train, dev, std::move(params), train_config(args.model), rng);

  fs::create_directories(args.out);
  io::save_model((fs::path(args.out) / "model.bin").string(), result.params);

  std::vector<std::vector<int>> pred;
  for (const auto& sentence : dev) pred.push_back(encoder::decode(result.params, sentence));
  const auto reports = full_reports(dev, pred);
  write_metrics(args.out, reports);
  print_reports(reports);
  info("best epoch " + std::to_string(result.best_epoch));
  return kExitOk;
}

struct SslArgs {
  std::string train, dev, out, warm_start_model;
  std::vector<std::string> unlabeled;
  std::string mode = "interp";
  std::string setting = "inductive";
  ssl::SslConfig config;
  ModelOptions model;
};

int cmd_ssl_train(SslArgs args) {
  ssl::SslDataset data;
  data.labeled = read_labeled(args.train);
  data.dev = read_labeled(args.dev);
  data.unlabeled = read_many(args.unlabeled);

  if (args.mode == "interp") args.config.mode = ssl::Mode::Interp;
  else if (args.mode == "feat") args.config.mode = ssl::Mode::Feat;
  else if (args.mode == "hard") args.config.mode = ssl::Mode::HardSelfTrain;
  else if (args.mode == "ulm") args.config.mode = ssl::Mode::UlmOnly;
  else throw UsageError("unknown --mode '" + args.mode + "'");
  if (args.setting == "inductive") args.config.setting = ssl::Setting::Inductive;
  else if (args.setting == "transductive") args.config.setting = ssl::Setting::Transductive;
  else throw UsageError("unknown --setting '" + args.setting + "'");
  try {
    args.config.validate();
  } catch (const std::exception& error) {
    throw UsageError(error.what());
  }
  args.config.retrain = train_config(args.model);

  std::mt19937_64 rng(args.model.seed);
  encoder::ModelParams model = [&] {
    if (!args.warm_start_model.empty()) return io::load_model(args.warm_start_model);
    encoder::EmbeddingTable table =
        make_embeddings(args.model, {&data.labeled, &data.dev, &data.unlabeled}, rng);
    const std::vector<int> chars =
        encoder::collect_char_vocab({&data.labeled, &data.dev, &data.unlabeled});
    encoder::ModelParams fresh =
        encoder::ModelParams::init(std::move(table), chars, encoder::Dims{}, rng);
    info("supervised round-0 training");
    return encoder::train_supervised(data.labeled, data.dev, std::move(fresh),
                                     args.config.retrain, rng)
        .params;
  }();

  std::ostream* log = g_log_level >= 1 ? &std::cerr : nullptr;
  const ssl::SslResult result = ssl::ssl_train(data, std::move(model), args.config, rng, log);

  fs::create_directories(args.out);
  io::save_model((fs::path(args.out) / "model.bin").string(), result.model);
  if (result.state.has_graph) {
    io::save_graph((fs::path(args.out) / "graph.bin").string(), result.state.graph);
  }
  std::ofstream rounds(fs::path(args.out) / "rounds.tsv");
  require(rounds.good(), "cannot write rounds.tsv");
  ssl::write_round_log(rounds, result.rounds);

  std::vector<std::vector<int>> pred;
  for (std::size_t i = 0; i < data.dev.size(); ++i) {
    Eigen::MatrixXd rows;
    const Eigen::MatrixXd* rows_ptr = nullptr;
    if (args.config.mode == ssl::Mode::Feat) {
      const int scope_index = result.state.labeled_count + static_cast<int>(i);
      rows = result.state.graph.q.middleRows(
          result.state.node_offset[static_cast<std::size_t>(scope_index)],
          data.dev[i].size());
      rows_ptr = &rows;
    }
    pred.push_back(encoder::decode(result.model, data.dev[i], rows_ptr));
  }
  const auto reports = full_reports(data.dev, pred);
  write_metrics(args.out, reports);
  print_reports(reports);
  info("selected round " + std::to_string(result.best_round));
  return kExitOk;
}

struct TagArgs {
  std::string model, input, out, graph;
  int scope_start = 0;
};

int cmd_tag(const TagArgs& args) {
  const encoder::ModelParams params = io::load_model(args.model);
  auto sentences = corpus::read_column(args.input);

  std::vector<std::vector<Eigen::Index>> scope_nodes;
  graph::PropagationGraph prop_graph;
  if (!args.graph.empty()) {
    prop_graph = io::load_graph(args.graph);
    int max_sentence = -1;
    for (const auto& ref : prop_graph.refs) max_sentence = std::max(max_sentence, ref.sentence);
    scope_nodes.resize(static_cast<std::size_t>(max_sentence + 1));
    for (std::size_t node = 0; node < prop_graph.refs.size(); ++node) {
      scope_nodes[static_cast<std::size_t>(prop_graph.refs[node].sentence)].push_back(
          static_cast<Eigen::Index>(node));
    }
  }

  for (std::size_t i = 0; i < sentences.size(); ++i) {
    Eigen::MatrixXd rows;
    const Eigen::MatrixXd* rows_ptr = nullptr;
    if (!args.graph.empty()) {
      const std::size_t scope_index = static_cast<std::size_t>(args.scope_start) + i;
      require(scope_index < scope_nodes.size(),
              "tag: input sentence " + std::to_string(i) + " is outside the graph scope");
      const auto& nodes = scope_nodes[scope_index];
      require(static_cast<int>(nodes.size()) == sentences[i].size(),
              "tag: graph scope sentence " + std::to_string(scope_index) +
                  " does not match the input sentence length");
      rows.resize(sentences[i].size(), kNumLabels);
      for (Eigen::Index t = 0; t < rows.rows(); ++t)
        rows.row(t) = prop_graph.q.row(nodes[static_cast<std::size_t>(t)]);
      rows_ptr = &rows;
    }
    sentences[i].labels = encoder::decode(params, sentences[i], rows_ptr);
  }

  fs::create_directories(args.out);
  std::ofstream out(fs::path(args.out) / "tagged.tsv");
  require(out.good(), "cannot write tagged.tsv");
  corpus::write_column(out, sentences);
  std::cout << "tagged " << sentences.size() << " sentences\n";
  return kExitOk;
}

int cmd_eval(const std::string& gold_path, const std::string& pred_path,
             const std::string& out_dir) {
  const auto gold = read_labeled(gold_path);
  const auto pred = read_labeled(pred_path);
  require(gold.size() == pred.size(), "eval: gold and pred sentence counts differ");
  std::vector<std::vector<int>> pred_labels;
  for (const auto& sentence : pred) pred_labels.push_back(sentence.labels);
  const auto reports = full_reports(gold, pred_labels);
  print_reports(reports);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_metrics(out_dir, reports);
  }
  return kExitOk;
}

struct BuildGraphArgs {
  std::string labeled, embeddings, model, out;
  std::vector<std::string> unlabeled;
  int k = 10;
  int pca_dim = 100;
  double sigma = 0.0;
  int threads = 1;
};

int cmd_build_graph(const BuildGraphArgs& args) {
  ssl::SslDataset data;
  data.labeled = read_labeled(args.labeled);
  data.unlabeled = read_many(args.unlabeled);

  ssl::SslConfig config;
  config.mode = ssl::Mode::Interp;  // any graph-building mode
  config.pca_dim = args.pca_dim;
  config.threads = args.threads;
  config.propagation.k = args.k;
  config.propagation.sigma_override = args.sigma;

  encoder::ModelParams model;
  const bool have_model = !args.model.empty();
  if (have_model) {
    model = io::load_model(args.model);
  } else {
    require(!args.embeddings.empty(), "build-graph: need --model or --embeddings");
    model.word_table = encoder::EmbeddingTable::load(args.embeddings);
  }

  ssl::SslState state = ssl::build_ssl_state(data, model.word_table, config);
  for (std::size_t s = 0; s < state.scope.size(); ++s) {
    if (have_model) {
      state.graph.p_tilde.middleRows(state.node_offset[s], state.scope[s].size()) =
          crf::token_marginals(encoder::emissions(model, state.scope[s]), model.transitions);
    } else {
      state.graph.p_tilde.middleRows(state.node_offset[s], state.scope[s].size())
          .setConstant(1.0 / kNumLabels);
    }
  }
  fs::create_directories(args.out);
  io::save_graph((fs::path(args.out) / "graph.bin").string(), state.graph);
  std::cout << "graph: " << state.graph.size() << " nodes, "
            << state.graph.topology.edges.size() << " edges, sigma "
            << state.graph.topology.sigma << "\n";
  return kExitOk;
}

struct PropagateArgs {
  std::string graph, out;
  graph::PropagationConfig config;
};

int cmd_propagate(const PropagateArgs& args) {
  graph::PropagationGraph prop_graph = io::load_graph(args.graph);
  const graph::PropagationResult result = graph::propagate(prop_graph, args.config);
  if (!result.converged) {
    std::cerr << "warning: propagation did not reach tolerance within "
              << args.config.max_iters << " sweeps\n";
  }
  fs::create_directories(args.out);
  io::save_graph((fs::path(args.out) / "graph.bin").string(), prop_graph);
  std::cout << "propagation: " << result.objective.size() - 1 << " sweeps, objective "
            << result.objective.front() << " -> " << result.objective.back() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);

  // Pull out --config and splice its entries in after the subcommand so that
  // explicit flags (which come later) win.
  std::string config_path;
  for (std::size_t i = 0; i < args.size();) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
    } else {
      ++i;
    }
  }

  CLI::App app{"semi-supervised neural CRF tagger for scientific keyphrases"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string log_level = "info";
  app.add_option("--log-level", log_level, "quiet|info|debug")
      ->check(CLI::IsMember({"quiet", "info", "debug"}));

  // convert
  std::string brat_dir, out_file;
  CLI::App* convert = app.add_subcommand("convert", "batch BRAT .txt/.ann to column format");
  convert->add_option("--brat-dir", brat_dir, "directory of .txt/.ann pairs")->required();
  convert->add_option("--out-file", out_file, "output column file")->required();

  // train
  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "supervised CRF training");
  train->add_option("--train", train_args.train, "labeled training column file")->required();
  train->add_option("--dev", train_args.dev, "labeled development column file")->required();
  train->add_option("--out", train_args.out, "output directory")->required();
  add_model_options(train, train_args.model);

  // ssl-train
  SslArgs ssl_args;
  CLI::App* ssl_train = app.add_subcommand("ssl-train", "graph-based semi-supervised training");
  ssl_train->add_option("--train", ssl_args.train, "labeled training column file")->required();
  ssl_train->add_option("--dev", ssl_args.dev, "labeled development column file")->required();
  ssl_train->add_option("--unlabeled", ssl_args.unlabeled, "unlabeled column file (repeatable)");
  ssl_train->add_option("--out", ssl_args.out, "output directory")->required();
  ssl_train->add_option("--model", ssl_args.warm_start_model,
                        "start from this checkpoint instead of supervised training");
  ssl_train->add_option("--mode", ssl_args.mode, "interp|feat|hard|ulm");
  ssl_train->add_option("--setting", ssl_args.setting, "inductive|transductive");
  ssl_train->add_option("--alpha", ssl_args.config.alpha, "GraphInterp mixing coefficient");
  ssl_train->add_option("--eta", ssl_args.config.eta, "confidence threshold");
  ssl_train->add_option("--rounds", ssl_args.config.max_rounds, "self-training round budget");
  ssl_train->add_option("--pseudo-weight", ssl_args.config.pseudo_weight,
                        "weight of pseudo-labeled sentences");
  ssl_train->add_flag("--gate-crf-marginal", ssl_args.config.gate_on_crf_marginal,
                      "apply eta to the raw CRF marginal instead of the fused posterior");
  ssl_train->add_option("--mu", ssl_args.config.propagation.mu, "neighbor coupling weight");
  ssl_train->add_option("--nu", ssl_args.config.propagation.nu, "prior coupling weight");
  ssl_train->add_option("--k", ssl_args.config.propagation.k, "nearest-neighbor count");
  ssl_train->add_option("--prop-iters", ssl_args.config.propagation.max_iters,
                        "propagation sweep budget");
  ssl_train->add_option("--prop-tol", ssl_args.config.propagation.tol,
                        "propagation stopping tolerance");
  ssl_train->add_option("--pca-dim", ssl_args.config.pca_dim, "graph feature dimension");
  ssl_train->add_option("--threads", ssl_args.config.threads, "worker threads for k-NN search");
  add_model_options(ssl_train, ssl_args.model);

  // tag
  TagArgs tag_args;
  CLI::App* tag = app.add_subcommand("tag", "Viterbi-decode a column file");
  tag->add_option("--model", tag_args.model, "model checkpoint")->required();
  tag->add_option("--input", tag_args.input, "column file to tag")->required();
  tag->add_option("--out", tag_args.out, "output directory")->required();
  tag->add_option("--graph", tag_args.graph, "graph checkpoint for GraphFeat emissions");
  tag->add_option("--scope-start", tag_args.scope_start,
                  "graph scope ordinal of the first input sentence");

  // eval
  std::string gold_path, pred_path, eval_out;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against gold labels");
  eval_cmd->add_option("--gold", gold_path, "gold column file")->required();
  eval_cmd->add_option("--pred", pred_path, "predicted column file")->required();
  eval_cmd->add_option("--out", eval_out, "optional output directory for metric files");

  // build-graph
  BuildGraphArgs graph_args;
  CLI::App* build_graph = app.add_subcommand("build-graph", "construct the k-NN token graph");
  build_graph->add_option("--labeled", graph_args.labeled, "labeled column file")->required();
  build_graph->add_option("--unlabeled", graph_args.unlabeled,
                          "unlabeled column file (repeatable)");
  build_graph->add_option("--embeddings", graph_args.embeddings,
                          "embeddings for node features (when no --model)");
  build_graph->add_option("--model", graph_args.model,
                          "model checkpoint: provides embeddings and CRF marginals");
  build_graph->add_option("--k", graph_args.k, "nearest-neighbor count");
  build_graph->add_option("--pca-dim", graph_args.pca_dim, "projected feature dimension");
  build_graph->add_option("--sigma", graph_args.sigma,
                          "similarity bandwidth override (0: mean k-NN distance)");
  build_graph->add_option("--threads", graph_args.threads, "worker threads for k-NN search");
  build_graph->add_option("--out", graph_args.out, "output directory")->required();

  // propagate
  PropagateArgs prop_args;
  CLI::App* propagate = app.add_subcommand("propagate", "run label propagation on a graph");
  propagate->add_option("--graph", prop_args.graph, "graph checkpoint")->required();
  propagate->add_option("--mu", prop_args.config.mu, "neighbor coupling weight");
  propagate->add_option("--nu", prop_args.config.nu, "prior coupling weight");
  propagate->add_option("--max-iters", prop_args.config.max_iters, "sweep budget");
  propagate->add_option("--tol", prop_args.config.tol, "stopping tolerance");
  propagate->add_flag("--jacobi", prop_args.config.jacobi,
                      "parallel-style sweeps with a global step search");
  propagate->add_option("--out", prop_args.out, "output directory")->required();

  // Splice config entries right after the subcommand token.
  if (!config_path.empty()) {
    std::vector<std::string> extra;
    try {
      for (const auto& [key, value] : parse_config_file(config_path)) {
        extra.push_back("--" + key + "=" + value);
      }
    } catch (const std::exception& error) {
      std::cerr << "error: " << error.what() << "\n";
      return kExitUsage;
    }
    auto insert_at = args.begin();
    for (auto it = args.begin(); it != args.end(); ++it) {
      if (!it->empty() && (*it)[0] != '-') {
        insert_at = it + 1;
        break;
      }
    }
    args.insert(insert_at, extra.begin(), extra.end());
  }

  // Later occurrences win so flags override config-file values; global flags
  // like --log-level fall through from subcommands to the app.
  for (CLI::App* sub :
       {convert, train, ssl_train, tag, eval_cmd, build_graph, propagate, &app}) {
    sub->fallthrough(true);
    for (CLI::Option* option : sub->get_options()) {
      if (option->get_expected_min() > 0 && option->get_type_size_max() == 1) {
        option->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
      }
    }
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::CallForAllHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& error) {
    app.exit(error);
    return kExitUsage;
  }

  if (log_level == "quiet") g_log_level = 0;
  else if (log_level == "debug") g_log_level = 2;

  try {
    if (convert->parsed()) return cmd_convert(brat_dir, out_file);
    if (train->parsed()) return cmd_train(train_args);
    if (ssl_train->parsed()) return cmd_ssl_train(ssl_args);
    if (tag->parsed()) return cmd_tag(tag_args);
    if (eval_cmd->parsed()) return cmd_eval(gold_path, pred_path, eval_out);
    if (build_graph->parsed()) return cmd_build_graph(graph_args);
    if (propagate->parsed()) return cmd_propagate(prop_args);
  } catch (const UsageError& error) {
    std::cerr << "error: " << error.what() << "\n" << app.help() << "\n";
    return kExitUsage;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitDataError;
  }
  return kExitOk;
}
