#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ipursuit/corpus.hpp"
#include "ipursuit/querybank.hpp"

namespace ipursuit {

struct ReportDoc {
  std::string report_id;
  std::string text;
};

/// Three-part entailment prompt. The instruction is fixed per run; the premise
/// is the report text and the hypothesis is the fact under test.
struct NliPrompt {
  std::string instruction;
  std::string premise;
  std::string hypothesis;

  std::string serialize() const;
};

NliPrompt assemble_nli_prompt(const std::string& instruction, const ReportDoc& report,
                              const std::string& fact_text);

/// Remote labels 0/1/2 map to -1 (negative), 0 (unknown), +1 (positive).
Answer map_nli_output(int raw);

/// Class-conditionally independent ternary answer channel with a known joint,
/// used as the ground-truth generator for oracle tests.
struct SyntheticSpec {
  std::size_t n_queries = 0;
  double prior = 0.5;  // P(Y = 1)
  // cond_tables[q][y][a] with a = 0,1,2 standing for answers -1, 0, +1.
  std::vector<std::array<std::array<double, 3>, 2>> cond_tables;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-report label ~ Bernoulli(prior), then each answer independently from
/// cond_tables[q][label]. Cell randomness is a pure function of
/// (seed, report, query), so generation order cannot matter.
std::pair<AnswerMatrix, LabelSet> synth_generate(const SyntheticSpec& spec, std::size_t n_reports);

/// Seeded random spec with informative per-query channels; `sharpness` > 0
/// skews the class-conditional tables away from uniform.
SyntheticSpec make_random_spec(std::size_t n_queries, double prior, std::uint64_t seed,
                               double sharpness = 2.0);

void save_synthetic_spec(const SyntheticSpec& spec, const std::string& path);
SyntheticSpec load_synthetic_spec(const std::string& path);

/// Answer acquisition interface: pursuit only ever sees ternary answers.
class AnswerProvider {
 public:
  virtual ~AnswerProvider() = default;
  virtual std::size_t n_queries() const = 0;
  virtual std::size_t n_reports() const = 0;
  virtual Answer answer(std::size_t report, std::size_t query) = 0;
};

/// Looks answers up in a preloaded matrix.
class MatrixAnswerProvider : public AnswerProvider {
 public:
  explicit MatrixAnswerProvider(const AnswerMatrix& matrix) : matrix_(&matrix) {}
  std::size_t n_queries() const override { return matrix_->n_queries(); }
  std::size_t n_reports() const override { return matrix_->n_reports(); }
  Answer answer(std::size_t report, std::size_t query) override;

 private:
  const AnswerMatrix* matrix_;
};

/// Samples answers on demand from a SyntheticSpec with fixed labels.
class SyntheticAnswerProvider : public AnswerProvider {
 public:
  SyntheticAnswerProvider(SyntheticSpec spec, std::vector<std::uint8_t> labels);
  std::size_t n_queries() const override { return spec_.n_queries; }
  std::size_t n_reports() const override { return labels_.size(); }
  Answer answer(std::size_t report, std::size_t query) override;
  const std::vector<std::uint8_t>& labels() const { return labels_; }

 private:
  SyntheticSpec spec_;
  std::vector<std::uint8_t> labels_;
};

struct NliClientConfig {
  std::string base_url;          // e.g. http://127.0.0.1:8080
  double timeout_seconds = 10.0;
  int max_attempts = 3;          // exponential backoff between attempts
  std::size_t fan_out = 4;       // bounded parallelism for batch calls
  double backoff_initial_ms = 50.0;
};

/// Client for the external inference service: POST /infer with the prompt as
/// JSON, response {"label": 0|1|2}. Failures surface as ServiceError after
/// retries; they are never mapped to the "unknown" answer.
class NliClient {
 public:
  explicit NliClient(NliClientConfig config);
  ~NliClient();
  NliClient(NliClient&&) noexcept;
  NliClient& operator=(NliClient&&) noexcept;

  int infer(const NliPrompt& prompt) const;
  Answer answer(const NliPrompt& prompt) const;
  std::vector<Answer> answer_batch(const std::vector<NliPrompt>& prompts) const;

  const NliClientConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Answers queries by calling the inference service with the fixed instruction,
/// a report document as premise, and the bank's fact text as hypothesis.
class NliAnswerProvider : public AnswerProvider {
 public:
  NliAnswerProvider(NliClientConfig config, std::string instruction,
                    std::vector<ReportDoc> reports, const QueryBank& bank);
  std::size_t n_queries() const override;
  std::size_t n_reports() const override { return reports_.size(); }
  Answer answer(std::size_t report, std::size_t query) override;
  const ReportDoc& report(std::size_t index) const { return reports_.at(index); }

 private:
  NliClient client_;
  std::string instruction_;
  std::vector<ReportDoc> reports_;
  const QueryBank* bank_;
};

/// JSONL report documents: one {"report_id", "text"} object per line.
std::vector<ReportDoc> load_report_docs(const std::string& path);
void write_report_docs(const std::vector<ReportDoc>& docs, const std::string& path);

}  // namespace ipursuit
