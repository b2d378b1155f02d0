#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ipursuit/common.hpp"

namespace ipursuit {

/// Reports x queries table of ternary answers in {-1, 0, 1}.
class AnswerMatrix {
 public:
  AnswerMatrix() = default;
  AnswerMatrix(std::size_t n_reports, std::size_t n_queries, std::vector<Answer> values);

  std::size_t n_reports() const { return rows_; }
  std::size_t n_queries() const { return cols_; }

  Answer at(std::size_t report, std::size_t query) const {
    return values_[report * cols_ + query];
  }
  void set(std::size_t report, std::size_t query, Answer value);

  std::span<const Answer> row(std::size_t report) const {
    return {values_.data() + report * cols_, cols_};
  }
  const std::vector<Answer>& values() const { return values_; }

  bool operator==(const AnswerMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Answer> values_;
};

/// Reports x tasks table of binary labels.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::size_t n_reports, std::size_t n_tasks, std::vector<std::uint8_t> values);

  std::size_t n_reports() const { return rows_; }
  std::size_t n_tasks() const { return cols_; }

  std::uint8_t at(std::size_t report, std::size_t task) const {
    return values_[report * cols_ + task];
  }
  /// One task's labels as a dense column.
  std::vector<std::uint8_t> task_column(std::size_t task) const;
  const std::vector<std::uint8_t>& values() const { return values_; }

  bool operator==(const LabelSet&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> values_;
};

/// Dense fact embeddings, one row per fact, uniform dimension, no zero rows.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t n_facts, std::size_t dim, std::vector<float> vectors);

  std::size_t n_facts() const { return rows_; }
  std::size_t dim() const { return dim_; }

  std::span<const float> row(std::size_t fact) const {
    return {vectors_.data() + fact * dim_, dim_};
  }
  const std::vector<float>& vectors() const { return vectors_; }

  bool operator==(const EmbeddingTable&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> vectors_;
};

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

const char* split_name(Split split);

/// Exhaustive, disjoint train/val/test partition over report rows.
struct SplitAssignment {
  std::vector<Split> split;
  std::uint64_t seed = 0;

  std::vector<std::size_t> indices(Split which) const;
  std::array<std::size_t, 3> sizes() const;
};

enum class TableFormat { kBinary, kCsv };

/// Largest-remainder rounding of n * w_i / sum(w): sizes sum to n and each
/// deviates from its exact target by less than one report.
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& weights);

/// Deterministic shuffled partition; a pure function of (n_reports, ratio, seed).
SplitAssignment split_dataset(std::size_t n_reports, const std::array<double, 3>& ratio,
                              std::uint64_t seed);

AnswerMatrix load_answer_matrix(const std::string& path, TableFormat format);
void write_answer_matrix(const AnswerMatrix& matrix, const std::string& path, TableFormat format);

LabelSet load_labels(const std::string& path, TableFormat format);
void write_labels(const LabelSet& labels, const std::string& path, TableFormat format);

EmbeddingTable load_embeddings(const std::string& path);
void write_embeddings(const EmbeddingTable& table, const std::string& path);

}  // namespace ipursuit
