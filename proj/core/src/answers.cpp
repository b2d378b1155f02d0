#include "ipursuit/answers.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ipursuit/io_util.hpp"
#include "ipursuit/rng.hpp"

namespace ipursuit {

namespace {

constexpr std::uint64_t kLabelColumn = ~std::uint64_t{0};

Answer index_to_answer(std::size_t idx) { return static_cast<Answer>(static_cast<int>(idx) - 1); }

std::size_t sample_categorical(const std::array<double, 3>& probs, double u) {
  double acc = 0.0;
  for (std::size_t a = 0; a < 3; ++a) {
    acc += probs[a];
    if (u < acc) return a;
  }
  return 2;
}

}  // namespace

std::string NliPrompt::serialize() const {
  return instruction + "\n\nPremise: " + premise + "\n\nHypothesis: " + hypothesis;
}

NliPrompt assemble_nli_prompt(const std::string& instruction, const ReportDoc& report,
                              const std::string& fact_text) {
  if (instruction.empty()) throw ValidationError("nli prompt: empty instruction");
  if (report.text.empty()) throw ValidationError("nli prompt: empty premise");
  if (fact_text.empty()) throw ValidationError("nli prompt: empty hypothesis");
  return NliPrompt{instruction, report.text, fact_text};
}

Answer map_nli_output(int raw) {
  switch (raw) {
    case 0:
      return kAnswerNegative;
    case 1:
      return kAnswerUnknown;
    case 2:
      return kAnswerPositive;
    default:
      throw ValidationError("nli output " + std::to_string(raw) + " outside {0, 1, 2}");
  }
}

void SyntheticSpec::validate() const {
  if (n_queries == 0) throw ValidationError("synthetic spec: n_queries must be positive");
  if (!(prior >= 0.0 && prior <= 1.0)) {
    throw ValidationError("synthetic spec: prior must lie in [0, 1]");
  }
  if (cond_tables.size() != n_queries) {
    throw ValidationError("synthetic spec: cond_tables size does not match n_queries");
  }
  for (std::size_t q = 0; q < n_queries; ++q) {
    for (std::size_t y = 0; y < 2; ++y) {
      double total = 0.0;
      for (double p : cond_tables[q][y]) {
        if (p < 0.0) throw ValidationError("synthetic spec: negative probability");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        throw ValidationError("synthetic spec: categorical for query " + std::to_string(q) +
                              ", class " + std::to_string(y) + " sums to " + std::to_string(total));
      }
    }
  }
}

std::pair<AnswerMatrix, LabelSet> synth_generate(const SyntheticSpec& spec, std::size_t n_reports) {
  spec.validate();
  std::vector<std::uint8_t> labels(n_reports);
  std::vector<Answer> answers(n_reports * spec.n_queries);
  for (std::size_t r = 0; r < n_reports; ++r) {
    const double u = u64_to_unit(cell_hash(spec.seed, r, kLabelColumn));
    labels[r] = u < spec.prior ? 1 : 0;
    for (std::size_t q = 0; q < spec.n_queries; ++q) {
      const double uc = u64_to_unit(cell_hash(spec.seed, r, q));
      answers[r * spec.n_queries + q] =
          index_to_answer(sample_categorical(spec.cond_tables[q][labels[r]], uc));
    }
  }
  return {AnswerMatrix(n_reports, spec.n_queries, std::move(answers)),
          LabelSet(n_reports, 1, std::move(labels))};
}

SyntheticSpec make_random_spec(std::size_t n_queries, double prior, std::uint64_t seed,
                               double sharpness) {
  if (n_queries == 0) throw ValidationError("make_random_spec: n_queries must be positive");
  if (sharpness <= 0.0) throw ValidationError("make_random_spec: sharpness must be positive");
  SyntheticSpec spec;
  spec.n_queries = n_queries;
  spec.prior = prior;
  spec.seed = seed;
  spec.cond_tables.resize(n_queries);
  std::mt19937_64 rng(derive_seed(seed, "answers.random_spec"));
  for (std::size_t q = 0; q < n_queries; ++q) {
    for (std::size_t y = 0; y < 2; ++y) {
      std::array<double, 3> raw{};
      double total = 0.0;
      for (std::size_t a = 0; a < 3; ++a) {
        // Powers of uniforms skew mass onto one or two answers per class.
        raw[a] = std::pow(u64_to_unit(rng()) + 1e-12, sharpness);
        total += raw[a];
      }
      for (std::size_t a = 0; a < 3; ++a) spec.cond_tables[q][y][a] = raw[a] / total;
    }
  }
  spec.validate();
  return spec;
}

void save_synthetic_spec(const SyntheticSpec& spec, const std::string& path) {
  spec.validate();
  nlohmann::json obj;
  obj["n_queries"] = spec.n_queries;
  obj["prior"] = spec.prior;
  obj["seed"] = spec.seed;
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& table : spec.cond_tables) {
    tables.push_back({{"class0", table[0]}, {"class1", table[1]}});
  }
  obj["cond_tables"] = std::move(tables);
  atomic_write(path, [&](std::ostream& out) { out << obj.dump(2) << '\n'; });
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  nlohmann::json obj;
  try {
    in >> obj;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  SyntheticSpec spec;
  spec.n_queries = obj.at("n_queries").get<std::size_t>();
  spec.prior = obj.at("prior").get<double>();
  spec.seed = obj.at("seed").get<std::uint64_t>();
  for (const auto& table : obj.at("cond_tables")) {
    std::array<std::array<double, 3>, 2> t{};
    t[0] = table.at("class0").get<std::array<double, 3>>();
    t[1] = table.at("class1").get<std::array<double, 3>>();
    spec.cond_tables.push_back(t);
  }
  spec.validate();
  return spec;
}

Answer MatrixAnswerProvider::answer(std::size_t report, std::size_t query) {
  if (report >= matrix_->n_reports()) {
    throw ValidationError("report index " + std::to_string(report) + " out of range");
  }
  if (query >= matrix_->n_queries()) {
    throw ValidationError("unknown query_id " + std::to_string(query));
  }
  return matrix_->at(report, query);
}

SyntheticAnswerProvider::SyntheticAnswerProvider(SyntheticSpec spec,
                                                 std::vector<std::uint8_t> labels)
    : spec_(std::move(spec)), labels_(std::move(labels)) {
  spec_.validate();
  for (std::uint8_t y : labels_) {
    if (y > 1) throw ValidationError("synthetic provider: labels must be binary");
  }
}

Answer SyntheticAnswerProvider::answer(std::size_t report, std::size_t query) {
  if (report >= labels_.size()) {
    throw ValidationError("report index " + std::to_string(report) + " out of range");
  }
  if (query >= spec_.n_queries) {
    throw ValidationError("unknown query_id " + std::to_string(query));
  }
  const double u = u64_to_unit(cell_hash(spec_.seed, report, query));
  return index_to_answer(sample_categorical(spec_.cond_tables[query][labels_[report]], u));
}

NliAnswerProvider::NliAnswerProvider(NliClientConfig config, std::string instruction,
                                     std::vector<ReportDoc> reports, const QueryBank& bank)
    : client_(std::move(config)),
      instruction_(std::move(instruction)),
      reports_(std::move(reports)),
      bank_(&bank) {
  if (instruction_.empty()) throw ValidationError("nli provider: empty instruction");
}

std::size_t NliAnswerProvider::n_queries() const { return bank_->size(); }

Answer NliAnswerProvider::answer(std::size_t report, std::size_t query) {
  if (report >= reports_.size()) {
    throw ValidationError("report index " + std::to_string(report) + " out of range");
  }
  if (query >= bank_->size()) {
    throw ValidationError("unknown query_id " + std::to_string(query));
  }
  return client_.answer(
      assemble_nli_prompt(instruction_, reports_[report], bank_->queries[query].text));
}

std::vector<ReportDoc> load_report_docs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<ReportDoc> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    docs.push_back(ReportDoc{obj.at("report_id").get<std::string>(),
                             obj.at("text").get<std::string>()});
  }
  return docs;
}

void write_report_docs(const std::vector<ReportDoc>& docs, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (const ReportDoc& doc : docs) {
      nlohmann::json line = {{"report_id", doc.report_id}, {"text", doc.text}};
      out << line.dump() << '\n';
    }
  });
}

}  // namespace ipursuit
