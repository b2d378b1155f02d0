#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "ipursuit/answers.hpp"
#include "ipursuit/corpus.hpp"
#include "ipursuit/exactip.hpp"
#include "ipursuit/io_util.hpp"
#include "ipursuit/metrics.hpp"
#include "ipursuit/parallel.hpp"
#include "ipursuit/pursuit.hpp"
#include "ipursuit/querybank.hpp"
#include "ipursuit/rng.hpp"
#include "ipursuit/trace.hpp"
#include "ipursuit/vip.hpp"

namespace {

using namespace ipursuit;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

void print_summary(const nlohmann::json& summary) { std::cout << summary.dump() << std::endl; }

double parse_number(const std::string& text) {
  try {
    std::size_t pos = 0;
    const double value = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse number '" + text + "'");
  }
}

std::array<double, 3> parse_ratio(const std::string& text) {
  std::array<double, 3> ratio{};
  std::stringstream ss(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ':')) {
    if (i >= 3) throw ValidationError("ratio must have exactly three parts, got '" + text + "'");
    ratio[i++] = parse_number(part);
  }
  if (i != 3) throw ValidationError("ratio must have exactly three parts, got '" + text + "'");
  return ratio;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    const double value = parse_number(part);
    if (value < 0 || value != std::floor(value)) {
      throw ValidationError("expected a non-negative integer, got '" + part + "'");
    }
    out.push_back(static_cast<std::size_t>(value));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(parse_number(part));
  }
  return out;
}

TableFormat parse_format(const std::string& name) {
  if (name == "binary") return TableFormat::kBinary;
  if (name == "csv") return TableFormat::kCsv;
  throw ValidationError("unknown table format '" + name + "'");
}

/// Reads fact texts, one per line.
std::vector<std::string> load_fact_texts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<std::string> texts;
  std::string line;
  while (std::getline(in, line)) texts.push_back(line);
  return texts;
}

/// Interactive provider: the querier still chooses the question; the answers
/// come from standard input as -1, 0, or 1.
class StdinAnswerProvider : public AnswerProvider {
 public:
  StdinAnswerProvider(std::size_t n_queries, const QueryBank* bank)
      : n_queries_(n_queries), bank_(bank) {}
  std::size_t n_queries() const override { return n_queries_; }
  std::size_t n_reports() const override { return 1; }
  Answer answer(std::size_t, std::size_t query) override {
    const std::string text =
        bank_ && query < bank_->size() ? bank_->queries[query].text : std::string{};
    std::cerr << "query " << query;
    if (!text.empty()) std::cerr << " [" << text << "]";
    std::cerr << "? answer -1/0/1: " << std::flush;
    int value = 0;
    while (!(std::cin >> value) || !is_valid_answer(value)) {
      if (std::cin.eof()) throw RuntimeFailure("stdin closed before an answer was given");
      std::cin.clear();
      std::cin.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
      std::cerr << "please answer -1, 0, or 1: " << std::flush;
    }
    return static_cast<Answer>(value);
  }

 private:
  std::size_t n_queries_;
  const QueryBank* bank_;
};

struct CommonOpts {
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string config_path;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--seed", opts.seed, "Root seed; every module derives from it")
      ->envname("IPURSUIT_SEED");
  cmd->add_option("--threads", opts.threads, "Upper bound on worker threads (0 = hardware)")
      ->envname("IPURSUIT_THREADS");
  cmd->add_option("--config", opts.config_path, "Plain-text key=value config file");
}

/// Expands `--config FILE` into `--key=value` tokens for the active
/// subcommand. Keys already given on the command line keep precedence; the
/// expansion happens before CLI11 sees the arguments.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);

  std::string config_path;
  std::vector<std::string> explicit_keys;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& token = args[i];
    if (token.rfind("--", 0) != 0) continue;
    std::string key = token.substr(2);
    const std::size_t eq = key.find('=');
    std::string inline_value;
    if (eq != std::string::npos) {
      inline_value = key.substr(eq + 1);
      key = key.substr(0, eq);
    }
    if (key == "config") {
      if (!inline_value.empty()) {
        config_path = inline_value;
      } else if (i + 1 < args.size()) {
        config_path = args[i + 1];
      }
    }
    explicit_keys.push_back(key);
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw ValidationError("cannot open config file " + config_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    if (line[start] == '#' || line[start] == ';') continue;
    const std::size_t eq = line.find('=', start);
    if (eq == std::string::npos) {
      throw ValidationError(config_path + ":" + std::to_string(line_no) +
                            ": expected key=value");
    }
    std::string key = line.substr(start, eq - start);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::string value = line.substr(eq + 1);
    const std::size_t vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? "" : value.substr(vstart);
    while (!value.empty() && (value.back() == ' ' || value.back() == '\t')) value.pop_back();
    if (key.empty()) {
      throw ValidationError(config_path + ":" + std::to_string(line_no) + ": empty key");
    }
    if (std::find(explicit_keys.begin(), explicit_keys.end(), key) != explicit_keys.end()) {
      continue;  // command line wins
    }
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Sequential information pursuit: query banks, ternary answers, "
               "querier/classifier training, and explanation traces"};
  app.require_subcommand(1);

  // ---- synth ----------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with known ground truth");
  CommonOpts synth_common;
  add_common(synth, synth_common);
  std::size_t synth_n = 1000, synth_queries = 20;
  double synth_prior = 0.5, synth_sharpness = 2.0;
  std::string synth_out = "data", synth_spec_path;
  synth->add_option("--n", synth_n, "Number of reports");
  synth->add_option("--queries", synth_queries, "Number of queries");
  synth->add_option("--prior", synth_prior, "P(Y = 1)");
  synth->add_option("--sharpness", synth_sharpness, "Skew of the generated channels");
  synth->add_option("--spec", synth_spec_path, "Reuse an existing spec JSON instead of sampling");
  synth->add_option("--out", synth_out, "Output directory")->required();

  // ---- build-queries --------------------------------------------------
  auto* build = app.add_subcommand("build-queries", "Cluster fact embeddings into a query bank");
  CommonOpts build_common;
  add_common(build, build_common);
  std::string build_embeddings, build_facts, build_out = "bank.jsonl";
  std::size_t build_k = 600, build_max_iters = 100;
  double build_threshold = 0.97, build_tol = 1e-6;
  build->add_option("--embeddings", build_embeddings, "IPEM1 embedding file")->required();
  build->add_option("--facts", build_facts, "Fact texts, one per line");
  build->add_option("--k", build_k, "Number of clusters")->envname("IPURSUIT_K");
  build->add_option("--dedup-threshold", build_threshold, "Cosine dedup threshold")
      ->envname("IPURSUIT_DEDUP_THRESHOLD");
  build->add_option("--max-iters", build_max_iters, "Lloyd iteration cap");
  build->add_option("--tol", build_tol, "Centroid shift tolerance");
  build->add_option("--out", build_out, "Query bank JSONL output");

  // ---- answer ---------------------------------------------------------
  auto* answer = app.add_subcommand("answer", "Fill an answer matrix via the inference service");
  CommonOpts answer_common;
  add_common(answer, answer_common);
  std::string answer_reports, answer_bank, answer_url, answer_out = "answers.ipam";
  std::string answer_instruction =
      "Decide whether the hypothesis is entailed by the premise: answer 0 for no, "
      "1 for unknown, 2 for yes.";
  std::string answer_format = "binary";
  double answer_timeout = 10.0;
  std::size_t answer_fan_out = 4;
  int answer_retries = 3;
  answer->add_option("--reports", answer_reports, "Report documents JSONL")->required();
  answer->add_option("--bank", answer_bank, "Query bank JSONL")->required();
  answer->add_option("--nli-url", answer_url, "Inference service base URL")
      ->required()
      ->envname("IPURSUIT_NLI_URL");
  answer->add_option("--instruction", answer_instruction, "Fixed NLI instruction");
  answer->add_option("--timeout", answer_timeout, "Per-request timeout in seconds");
  answer->add_option("--fan-out", answer_fan_out, "Bounded parallel requests")
      ->envname("IPURSUIT_FAN_OUT");
  answer->add_option("--retries", answer_retries, "Attempts per request");
  answer->add_option("--format", answer_format, "Output format: binary|csv");
  answer->add_option("--out", answer_out, "Answer matrix output");

  // ---- train ----------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train the querier/classifier pair");
  CommonOpts train_common;
  add_common(train, train_common);
  std::string train_answers, train_labels, train_format = "binary";
  std::string train_out = "model.ipck", train_log, train_ratio = "7:1:2";
  std::string train_task_name = "task";
  std::size_t train_task = 0;
  TrainConfig train_config;
  train->add_option("--answers", train_answers, "Answer matrix")->required();
  train->add_option("--labels", train_labels, "Label set")->required();
  train->add_option("--format", train_format, "Input format: binary|csv");
  train->add_option("--task", train_task, "Label column to train on");
  train->add_option("--task-name", train_task_name, "Task name echoed into artifacts");
  train->add_option("--ratio", train_ratio, "train:val:test split ratio")
      ->envname("IPURSUIT_RATIO");
  train->add_option("--epochs", train_config.epochs, "Training epochs")
      ->envname("IPURSUIT_EPOCHS");
  train->add_option("--batch", train_config.batch_size, "Batch size")->envname("IPURSUIT_BATCH");
  train->add_option("--lr", train_config.lr, "Peak learning rate")->envname("IPURSUIT_LR");
  train->add_option("--lr-min", train_config.lr_min, "Final learning rate");
  train->add_option("--width", train_config.hidden_width, "Hidden layer width")
      ->envname("IPURSUIT_WIDTH");
  train->add_option("--phase1-fraction", train_config.phase1_fraction,
                    "Share of epochs on random histories");
  train->add_option("--temp-start", train_config.temperature_start, "Initial ST temperature");
  train->add_option("--temp-end", train_config.temperature_end, "Final ST temperature");
  train->add_option("--pos-weight", train_config.pos_weight,
                    "BCE positive weight (0 = n_neg/n_pos)");
  train->add_option("--out", train_out, "Checkpoint output");
  train->add_option("--log", train_log, "Training log CSV");

  // ---- evaluate -------------------------------------------------------
  auto* evaluate = app.add_subcommand("evaluate", "Score a trained model on the test split");
  CommonOpts eval_common;
  add_common(evaluate, eval_common);
  std::string eval_model, eval_answers, eval_labels, eval_format = "binary";
  std::string eval_ratio = "7:1:2", eval_split = "test";
  std::string eval_budgets = "0,1,2,5,10,20";
  std::string eval_thresholds;
  std::string eval_out = "eval.json", eval_curve, eval_needed;
  std::size_t eval_task = 0;
  StopRule eval_rule;
  evaluate->add_option("--model", eval_model, "Checkpoint")->required();
  evaluate->add_option("--answers", eval_answers, "Answer matrix")->required();
  evaluate->add_option("--labels", eval_labels, "Label set")->required();
  evaluate->add_option("--format", eval_format, "Input format: binary|csv");
  evaluate->add_option("--task", eval_task, "Label column");
  evaluate->add_option("--ratio", eval_ratio, "Split ratio used at training time");
  evaluate->add_option("--split", eval_split, "Which split to score: train|val|test|all");
  evaluate->add_option("--budgets", eval_budgets, "Comma-separated query budgets");
  evaluate->add_option("--thresholds", eval_thresholds,
                       "Confidence thresholds for the queries-needed curve");
  evaluate->add_option("--confidence", eval_rule.confidence_threshold, "Stop confidence")
      ->envname("IPURSUIT_CONFIDENCE");
  evaluate->add_option("--max-queries", eval_rule.max_queries, "Stop budget")
      ->envname("IPURSUIT_MAX_QUERIES");
  evaluate->add_option("--out", eval_out, "Evaluation report JSON");
  evaluate->add_option("--curve", eval_curve, "AP-vs-budget CSV");
  evaluate->add_option("--needed-out", eval_needed, "Queries-needed CSV");

  // ---- pursue ---------------------------------------------------------
  auto* pursue_cmd = app.add_subcommand("pursue", "Run sequential inference on one report");
  CommonOpts pursue_common;
  add_common(pursue_cmd, pursue_common);
  std::string pursue_model, pursue_answers, pursue_format = "binary", pursue_bank;
  std::string pursue_reports, pursue_url, pursue_trace = "trace.jsonl", pursue_report_id;
  std::string pursue_instruction =
      "Decide whether the hypothesis is entailed by the premise: answer 0 for no, "
      "1 for unknown, 2 for yes.";
  std::size_t pursue_row = 0;
  bool pursue_all = false, pursue_interactive = false;
  double pursue_timeout = 10.0;
  std::size_t pursue_fan_out = 4;
  StopRule pursue_rule;
  pursue_cmd->add_option("--model", pursue_model, "Checkpoint")->required();
  pursue_cmd->add_option("--answers", pursue_answers, "Answer matrix source");
  pursue_cmd->add_option("--format", pursue_format, "Answer matrix format");
  pursue_cmd->add_option("--bank", pursue_bank, "Query bank JSONL for trace texts");
  pursue_cmd->add_option("--reports", pursue_reports, "Report documents JSONL (NLI mode)");
  pursue_cmd->add_option("--nli-url", pursue_url, "Inference service base URL (NLI mode)")
      ->envname("IPURSUIT_NLI_URL");
  pursue_cmd->add_option("--instruction", pursue_instruction, "Fixed NLI instruction");
  pursue_cmd->add_option("--timeout", pursue_timeout, "Per-request timeout in seconds");
  pursue_cmd->add_option("--fan-out", pursue_fan_out, "Bounded parallel requests");
  pursue_cmd->add_flag("--interactive", pursue_interactive, "Answer queries on stdin");
  pursue_cmd->add_option("--report-row", pursue_row, "Row (or report index) to pursue");
  pursue_cmd->add_flag("--all-rows", pursue_all, "Pursue every row");
  pursue_cmd->add_option("--report-id", pursue_report_id, "Identifier recorded in the trace");
  pursue_cmd->add_option("--confidence", pursue_rule.confidence_threshold, "Stop confidence")
      ->envname("IPURSUIT_CONFIDENCE");
  pursue_cmd->add_option("--max-queries", pursue_rule.max_queries, "Stop budget")
      ->envname("IPURSUIT_MAX_QUERIES");
  pursue_cmd->add_option("--trace", pursue_trace, "Trace JSONL output");

  // ---- oracle ---------------------------------------------------------
  auto* oracle = app.add_subcommand("oracle", "Brute-force information pursuit on the tabular joint");
  CommonOpts oracle_common;
  add_common(oracle, oracle_common);
  std::string oracle_answers, oracle_labels, oracle_format = "binary", oracle_bank;
  std::string oracle_trace = "oracle_trace.jsonl", oracle_task_name = "task";
  std::size_t oracle_task = 0, oracle_row = 0, oracle_max_steps = 200;
  bool oracle_all = false;
  double oracle_alpha = 0.5, oracle_epsilon = 1e-3;
  oracle->add_option("--answers", oracle_answers, "Answer matrix")->required();
  oracle->add_option("--labels", oracle_labels, "Label set")->required();
  oracle->add_option("--format", oracle_format, "Input format: binary|csv");
  oracle->add_option("--task", oracle_task, "Label column");
  oracle->add_option("--task-name", oracle_task_name, "Task name recorded in traces");
  oracle->add_option("--report-row", oracle_row, "Row to pursue");
  oracle->add_flag("--all-rows", oracle_all, "Pursue every row");
  oracle->add_option("--alpha", oracle_alpha, "Additive smoothing per contingency cell");
  oracle->add_option("--epsilon-stop", oracle_epsilon, "Stop when best MI falls to this value");
  oracle->add_option("--max-steps", oracle_max_steps, "Step budget");
  oracle->add_option("--trace", oracle_trace, "Trace JSONL output");

  try {
    std::vector<std::string> args = expand_config_args(argc, argv);
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  // ---- dispatch -------------------------------------------------------
  if (synth->parsed()) {
    set_thread_bound(synth_common.threads);
    SyntheticSpec spec;
    if (!synth_spec_path.empty()) {
      spec = load_synthetic_spec(synth_spec_path);
    } else {
      spec = make_random_spec(synth_queries, synth_prior,
                              derive_seed(synth_common.seed, "cli.synth.spec"), synth_sharpness);
    }
    spec.seed = derive_seed(synth_common.seed, "cli.synth.data");
    const auto [answers, labels] = synth_generate(spec, synth_n);
    const std::string answers_path = synth_out + "/answers.ipam";
    const std::string labels_path = synth_out + "/labels.iplb";
    const std::string spec_path = synth_out + "/synth_spec.json";
    write_answer_matrix(answers, answers_path, TableFormat::kBinary);
    write_labels(labels, labels_path, TableFormat::kBinary);
    save_synthetic_spec(spec, spec_path);
    std::size_t n_pos = 0;
    for (std::size_t r = 0; r < labels.n_reports(); ++r) n_pos += labels.at(r, 0);
    print_summary({{"command", "synth"},
                   {"n_reports", synth_n},
                   {"n_queries", spec.n_queries},
                   {"n_pos", n_pos},
                   {"answers", answers_path},
                   {"labels", labels_path},
                   {"spec", spec_path}});
    return kExitOk;
  }

  if (build->parsed()) {
    set_thread_bound(build_common.threads);
    const EmbeddingTable table = load_embeddings(build_embeddings);
    std::vector<std::string> texts;
    if (!build_facts.empty()) texts = load_fact_texts(build_facts);
    const QueryBank bank =
        build_query_bank(table, texts, build_k, build_threshold,
                         derive_seed(build_common.seed, "cli.querybank"), build_max_iters,
                         build_tol);
    write_query_bank(bank, build_out);
    print_summary({{"command", "build-queries"},
                   {"n_facts", table.n_facts()},
                   {"k", build_k},
                   {"bank_size", bank.size()},
                   {"out", build_out}});
    return kExitOk;
  }

  if (answer->parsed()) {
    set_thread_bound(answer_common.threads);
    const std::vector<ReportDoc> docs = load_report_docs(answer_reports);
    const QueryBank bank = load_query_bank(answer_bank);
    if (docs.empty()) throw ValidationError("no report documents in " + answer_reports);
    if (bank.size() == 0) throw ValidationError("empty query bank " + answer_bank);
    NliClientConfig config;
    config.base_url = answer_url;
    config.timeout_seconds = answer_timeout;
    config.fan_out = answer_fan_out;
    config.max_attempts = answer_retries;
    const NliClient client(config);

    AnswerMatrix matrix(docs.size(), bank.size(),
                        std::vector<Answer>(docs.size() * bank.size(), kAnswerUnknown));
    std::vector<NliPrompt> prompts;
    prompts.reserve(bank.size());
    for (std::size_t r = 0; r < docs.size(); ++r) {
      prompts.clear();
      for (const QueryRef& q : bank.queries) {
        prompts.push_back(assemble_nli_prompt(answer_instruction, docs[r], q.text));
      }
      const std::vector<Answer> answers = client.answer_batch(prompts);
      for (std::size_t q = 0; q < answers.size(); ++q) matrix.set(r, q, answers[q]);
    }
    write_answer_matrix(matrix, answer_out, parse_format(answer_format));
    print_summary({{"command", "answer"},
                   {"n_reports", docs.size()},
                   {"n_queries", bank.size()},
                   {"out", answer_out}});
    return kExitOk;
  }

  if (train->parsed()) {
    set_thread_bound(train_common.threads);
    const TableFormat format = parse_format(train_format);
    const AnswerMatrix answers = load_answer_matrix(train_answers, format);
    const LabelSet labels = load_labels(train_labels, format);
    if (labels.n_reports() != answers.n_reports()) {
      throw ValidationError("answers and labels disagree on the number of reports");
    }
    const SplitAssignment split = split_dataset(
        answers.n_reports(), parse_ratio(train_ratio), derive_seed(train_common.seed, "cli.split"));

    TrainData data;
    data.answers = &answers;
    data.labels = labels.task_column(train_task);
    data.train_indices = split.indices(Split::kTrain);
    data.val_indices = split.indices(Split::kVal);

    train_config.seed = derive_seed(train_common.seed, "cli.train");
    train_config.task_name = train_task_name;
    train_config.log_path = train_log;
    train_config.validate();
    const PursuitModel model = train_vip(data, train_config);
    save_model(model, train_out);
    print_summary({{"command", "train"},
                   {"n_train", data.train_indices.size()},
                   {"n_val", data.val_indices.size()},
                   {"pos_weight", model.pos_weight},
                   {"out", train_out}});
    return kExitOk;
  }

  if (evaluate->parsed()) {
    set_thread_bound(eval_common.threads);
    const TableFormat format = parse_format(eval_format);
    const PursuitModel model = load_model(eval_model);
    const AnswerMatrix answers = load_answer_matrix(eval_answers, format);
    const LabelSet labels = load_labels(eval_labels, format);
    eval_rule.validate();

    std::vector<std::size_t> indices;
    if (eval_split == "all") {
      indices.resize(answers.n_reports());
      std::iota(indices.begin(), indices.end(), std::size_t{0});
    } else {
      const SplitAssignment split = split_dataset(
          answers.n_reports(), parse_ratio(eval_ratio), derive_seed(eval_common.seed, "cli.split"));
      Split which = Split::kTest;
      if (eval_split == "train") which = Split::kTrain;
      else if (eval_split == "val") which = Split::kVal;
      else if (eval_split != "test") throw ValidationError("unknown split '" + eval_split + "'");
      indices = split.indices(which);
    }

    const std::vector<std::uint8_t> task = labels.task_column(eval_task);
    std::vector<int> split_labels;
    split_labels.reserve(indices.size());
    for (std::size_t idx : indices) split_labels.push_back(task[idx]);

    MatrixAnswerProvider provider(answers);
    EvalReport report = evaluate_model(model, provider, indices, split_labels,
                                       parse_size_list(eval_budgets), eval_rule);
    write_eval_report(report, eval_out);
    if (!eval_curve.empty()) write_ap_curve_csv(report, eval_curve);
    if (!eval_thresholds.empty() && !eval_needed.empty()) {
      const auto curve =
          queries_needed_curve(model, provider, indices, parse_double_list(eval_thresholds));
      atomic_write(eval_needed, [&](std::ostream& out) {
        out << "threshold,mean_steps,var_steps\n";
        for (const auto& point : curve) {
          out << point.threshold << ',' << point.mean_steps << ',' << point.var_steps << '\n';
        }
      });
    }
    print_summary({{"command", "evaluate"},
                   {"split", eval_split},
                   {"n", indices.size()},
                   {"ap", report.ap},
                   {"f1", report.f1},
                   {"out", eval_out}});
    return kExitOk;
  }

  if (pursue_cmd->parsed()) {
    set_thread_bound(pursue_common.threads);
    const PursuitModel model = load_model(pursue_model);
    pursue_rule.validate();
    QueryBank bank;
    if (!pursue_bank.empty()) bank = load_query_bank(pursue_bank);
    const QueryBank* bank_ptr = bank.size() > 0 ? &bank : nullptr;

    std::unique_ptr<AnswerProvider> provider;
    std::vector<ReportDoc> docs;
    AnswerMatrix matrix;
    if (pursue_interactive) {
      provider = std::make_unique<StdinAnswerProvider>(model.n_queries, bank_ptr);
    } else if (!pursue_reports.empty()) {
      if (pursue_url.empty()) throw ValidationError("--reports requires --nli-url");
      if (bank.size() == 0) throw ValidationError("NLI mode requires --bank for fact texts");
      docs = load_report_docs(pursue_reports);
      NliClientConfig config;
      config.base_url = pursue_url;
      config.timeout_seconds = pursue_timeout;
      config.fan_out = pursue_fan_out;
      provider = std::make_unique<NliAnswerProvider>(config, pursue_instruction, docs, bank);
    } else if (!pursue_answers.empty()) {
      matrix = load_answer_matrix(pursue_answers, parse_format(pursue_format));
      provider = std::make_unique<MatrixAnswerProvider>(matrix);
    } else {
      throw ValidationError("pursue needs --answers, --reports, or --interactive");
    }

    std::vector<std::size_t> rows;
    if (pursue_all) {
      rows.resize(provider->n_reports());
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    } else {
      if (pursue_row >= provider->n_reports()) {
        throw ValidationError("report row " + std::to_string(pursue_row) + " out of range");
      }
      rows.push_back(pursue_row);
    }

    std::vector<PursuitTrace> traces;
    traces.reserve(rows.size());
    for (std::size_t row : rows) {
      std::string report_id = pursue_report_id;
      if (report_id.empty()) {
        report_id = !docs.empty() && row < docs.size() ? docs[row].report_id
                                                       : "row-" + std::to_string(row);
      }
      traces.push_back(pursue(model, *provider, row, report_id, pursue_rule, bank_ptr));
    }
    write_traces_jsonl(traces, pursue_trace);
    const PursuitTrace& last = traces.back();
    print_summary({{"command", "pursue"},
                   {"n_reports", rows.size()},
                   {"prediction", last.prediction},
                   {"posterior", last.final_posterior},
                   {"stop_reason", stop_reason_name(last.stop_reason)},
                   {"n_steps", last.steps.size()},
                   {"trace", pursue_trace}});
    return kExitOk;
  }

  if (oracle->parsed()) {
    set_thread_bound(oracle_common.threads);
    const TableFormat format = parse_format(oracle_format);
    const AnswerMatrix answers = load_answer_matrix(oracle_answers, format);
    const LabelSet labels = load_labels(oracle_labels, format);
    const TaskData data(answers, labels.task_column(oracle_task));
    QueryBank bank;
    if (!oracle_bank.empty()) bank = load_query_bank(oracle_bank);

    std::vector<std::size_t> rows;
    if (oracle_all) {
      rows.resize(answers.n_reports());
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    } else {
      if (oracle_row >= answers.n_reports()) {
        throw ValidationError("report row " + std::to_string(oracle_row) + " out of range");
      }
      rows.push_back(oracle_row);
    }

    std::vector<PursuitTrace> traces;
    for (std::size_t row : rows) {
      ExactIpOptions options;
      options.alpha = oracle_alpha;
      options.epsilon_stop = oracle_epsilon;
      options.max_steps = oracle_max_steps;
      options.task_name = oracle_task_name;
      options.report_id = "row-" + std::to_string(row);
      PursuitTrace trace = ip_run(data, answers.row(row), options);
      for (TraceStep& step : trace.steps) {
        if (step.query_id < bank.size()) step.query_text = bank.queries[step.query_id].text;
      }
      traces.push_back(std::move(trace));
    }
    write_traces_jsonl(traces, oracle_trace);
    const PursuitTrace& last = traces.back();
    print_summary({{"command", "oracle"},
                   {"n_reports", rows.size()},
                   {"prediction", last.prediction},
                   {"posterior", last.final_posterior},
                   {"n_steps", last.steps.size()},
                   {"trace", oracle_trace}});
    return kExitOk;
  }

  return kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << std::endl;
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitRuntime;
  }
}
