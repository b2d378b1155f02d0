#include "ipursuit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ipursuit/io_util.hpp"
#include "ipursuit/rng.hpp"

namespace ipursuit {

namespace {

constexpr char kAnswerMagic[] = "IPAM1";
constexpr char kLabelMagic[] = "IPLB1";
constexpr char kEmbeddingMagic[] = "IPEM1";

void check_magic(std::istream& in, const char* magic, const std::string& path) {
  char buf[5];
  in.read(buf, 5);
  if (!in || std::memcmp(buf, magic, 5) != 0) {
    throw ValidationError("malformed header in " + path + ": expected magic " + magic);
  }
}

std::uint32_t read_u32(std::istream& in, const std::string& path, const char* field) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) {
    throw ValidationError("malformed header in " + path + ": truncated " + std::string(field));
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::ifstream open_input(const std::string& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw ValidationError("cannot open " + path);
  return in;
}

/// Parses a CSV of integers (comma-separated, newline rows, no header) and
/// validates every cell through `accept`.
template <typename Accept>
std::tuple<std::size_t, std::size_t, std::vector<long>> parse_int_csv(const std::string& path,
                                                                      Accept accept) {
  std::ifstream in = open_input(path, std::ios::in);
  std::vector<long> values;
  std::size_t n_cols = 0;
  std::size_t row = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    std::size_t col = 0;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t pos = 0;
      long v = 0;
      try {
        v = std::stol(cell, &pos);
      } catch (const std::exception&) {
        throw ValidationError(path + ": unparsable value '" + cell + "' at (" +
                              std::to_string(row) + ", " + std::to_string(col) + ")");
      }
      while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
      if (pos != cell.size()) {
        throw ValidationError(path + ": unparsable value '" + cell + "' at (" +
                              std::to_string(row) + ", " + std::to_string(col) + ")");
      }
      accept(v, row, col);
      values.push_back(v);
      ++col;
    }
    if (row == 0) {
      n_cols = col;
    } else if (col != n_cols) {
      throw ValidationError(path + ": dimension mismatch, row " + std::to_string(row) + " has " +
                            std::to_string(col) + " values, expected " + std::to_string(n_cols));
    }
    ++row;
  }
  return {row, n_cols, std::move(values)};
}

}  // namespace

AnswerMatrix::AnswerMatrix(std::size_t n_reports, std::size_t n_queries, std::vector<Answer> values)
    : rows_(n_reports), cols_(n_queries), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ValidationError("answer matrix dimension mismatch: " + std::to_string(values_.size()) +
                          " values for " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!is_valid_answer(values_[i])) {
      throw ValidationError("out-of-alphabet answer " + std::to_string(values_[i]) + " at (" +
                            std::to_string(i / cols_) + ", " + std::to_string(i % cols_) + ")");
    }
  }
}

void AnswerMatrix::set(std::size_t report, std::size_t query, Answer value) {
  if (!is_valid_answer(value)) {
    throw ValidationError("out-of-alphabet answer " + std::to_string(value) + " at (" +
                          std::to_string(report) + ", " + std::to_string(query) + ")");
  }
  values_[report * cols_ + query] = value;
}

LabelSet::LabelSet(std::size_t n_reports, std::size_t n_tasks, std::vector<std::uint8_t> values)
    : rows_(n_reports), cols_(n_tasks), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ValidationError("label set dimension mismatch: " + std::to_string(values_.size()) +
                          " values for " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] > 1) {
      throw ValidationError("non-binary label " + std::to_string(values_[i]) + " at (" +
                            std::to_string(i / cols_) + ", " + std::to_string(i % cols_) + ")");
    }
  }
}

std::vector<std::uint8_t> LabelSet::task_column(std::size_t task) const {
  if (task >= cols_) throw ValidationError("task index " + std::to_string(task) + " out of range");
  std::vector<std::uint8_t> column(rows_);
  for (std::size_t r = 0; r < rows_; ++r) column[r] = values_[r * cols_ + task];
  return column;
}

EmbeddingTable::EmbeddingTable(std::size_t n_facts, std::size_t dim, std::vector<float> vectors)
    : rows_(n_facts), dim_(dim), vectors_(std::move(vectors)) {
  if (vectors_.size() != rows_ * dim_) {
    throw ValidationError("embedding table dimension mismatch: " + std::to_string(vectors_.size()) +
                          " floats for " + std::to_string(rows_) + "x" + std::to_string(dim_));
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    bool all_zero = true;
    for (std::size_t d = 0; d < dim_; ++d) {
      if (vectors_[r * dim_ + d] != 0.0f) {
        all_zero = false;
        break;
      }
    }
    if (all_zero && dim_ > 0) {
      throw ValidationError("zero vector at embedding row " + std::to_string(r));
    }
  }
}

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "?";
}

std::vector<std::size_t> SplitAssignment::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == which) out.push_back(i);
  }
  return out;
}

std::array<std::size_t, 3> SplitAssignment::sizes() const {
  std::array<std::size_t, 3> out{0, 0, 0};
  for (Split s : split) out[static_cast<std::size_t>(s)]++;
  return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) {
      throw ValidationError("split weights must be non-negative, got " + std::to_string(w));
    }
    total += w;
  }
  if (total <= 0.0) throw ValidationError("split weights sum to zero");

  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> fractional{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double target = static_cast<double>(n) * weights[i] / total;
    sizes[i] = static_cast<std::size_t>(std::floor(target));
    fractional[i] = target - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  // Hand out the remainder by largest fractional part, ties to the lower index.
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fractional[a] > fractional[b]; });
  for (std::size_t r = 0; assigned < n; ++r) {
    sizes[order[r % 3]] += 1;
    ++assigned;
  }
  return sizes;
}

SplitAssignment split_dataset(std::size_t n_reports, const std::array<double, 3>& ratio,
                              std::uint64_t seed) {
  if (n_reports < 1) throw ValidationError("split_dataset requires n_reports >= 1");
  const auto sizes = split_sizes(n_reports, ratio);

  std::vector<std::size_t> order(n_reports);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, "corpus.split"));
  seeded_shuffle(order, rng);

  SplitAssignment assignment;
  assignment.seed = seed;
  assignment.split.resize(n_reports);
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t i = 0; i < sizes[s]; ++i) {
      assignment.split[order[cursor++]] = static_cast<Split>(s);
    }
  }
  return assignment;
}

AnswerMatrix load_answer_matrix(const std::string& path, TableFormat format) {
  if (format == TableFormat::kCsv) {
    auto [rows, cols, values] = parse_int_csv(path, [&](long v, std::size_t r, std::size_t c) {
      if (!is_valid_answer(v)) {
        throw ValidationError(path + ": out-of-alphabet value " + std::to_string(v) + " at (" +
                              std::to_string(r) + ", " + std::to_string(c) + ")");
      }
    });
    std::vector<Answer> data(values.begin(), values.end());
    return AnswerMatrix(rows, cols, std::move(data));
  }

  std::ifstream in = open_input(path, std::ios::binary);
  check_magic(in, kAnswerMagic, path);
  const std::uint32_t rows = read_u32(in, path, "n_rows");
  const std::uint32_t cols = read_u32(in, path, "n_cols");
  std::vector<Answer> data(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (static_cast<std::size_t>(in.gcount()) != data.size()) {
    throw ValidationError(path + ": dimension mismatch, payload shorter than " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!is_valid_answer(data[i])) {
      throw ValidationError(path + ": out-of-alphabet value " + std::to_string(data[i]) + " at (" +
                            std::to_string(i / cols) + ", " + std::to_string(i % cols) + ")");
    }
  }
  return AnswerMatrix(rows, cols, std::move(data));
}

void write_answer_matrix(const AnswerMatrix& matrix, const std::string& path, TableFormat format) {
  atomic_write(path, [&](std::ostream& out) {
    if (format == TableFormat::kCsv) {
      for (std::size_t r = 0; r < matrix.n_reports(); ++r) {
        for (std::size_t c = 0; c < matrix.n_queries(); ++c) {
          if (c) out << ',';
          out << static_cast<int>(matrix.at(r, c));
        }
        out << '\n';
      }
      return;
    }
    out.write(kAnswerMagic, 5);
    write_u32(out, static_cast<std::uint32_t>(matrix.n_reports()));
    write_u32(out, static_cast<std::uint32_t>(matrix.n_queries()));
    out.write(reinterpret_cast<const char*>(matrix.values().data()),
              static_cast<std::streamsize>(matrix.values().size()));
  });
}

LabelSet load_labels(const std::string& path, TableFormat format) {
  if (format == TableFormat::kCsv) {
    auto [rows, cols, values] = parse_int_csv(path, [&](long v, std::size_t r, std::size_t c) {
      if (v != 0 && v != 1) {
        throw ValidationError(path + ": non-binary label " + std::to_string(v) + " at (" +
                              std::to_string(r) + ", " + std::to_string(c) + ")");
      }
    });
    std::vector<std::uint8_t> data(values.begin(), values.end());
    return LabelSet(rows, cols, std::move(data));
  }

  std::ifstream in = open_input(path, std::ios::binary);
  check_magic(in, kLabelMagic, path);
  const std::uint32_t rows = read_u32(in, path, "n_rows");
  const std::uint32_t cols = read_u32(in, path, "n_tasks");
  std::vector<std::uint8_t> data(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (static_cast<std::size_t>(in.gcount()) != data.size()) {
    throw ValidationError(path + ": dimension mismatch, payload shorter than " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  return LabelSet(rows, cols, std::move(data));
}

void write_labels(const LabelSet& labels, const std::string& path, TableFormat format) {
  atomic_write(path, [&](std::ostream& out) {
    if (format == TableFormat::kCsv) {
      for (std::size_t r = 0; r < labels.n_reports(); ++r) {
        for (std::size_t c = 0; c < labels.n_tasks(); ++c) {
          if (c) out << ',';
          out << static_cast<int>(labels.at(r, c));
        }
        out << '\n';
      }
      return;
    }
    out.write(kLabelMagic, 5);
    write_u32(out, static_cast<std::uint32_t>(labels.n_reports()));
    write_u32(out, static_cast<std::uint32_t>(labels.n_tasks()));
    out.write(reinterpret_cast<const char*>(labels.values().data()),
              static_cast<std::streamsize>(labels.values().size()));
  });
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in = open_input(path, std::ios::binary);
  check_magic(in, kEmbeddingMagic, path);
  const std::uint32_t count = read_u32(in, path, "count");
  const std::uint32_t dim = read_u32(in, path, "dim");
  std::vector<float> data(static_cast<std::size_t>(count) * dim);
  static_assert(sizeof(float) == 4);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != data.size() * sizeof(float)) {
    throw ValidationError(path + ": dimension mismatch, payload shorter than " +
                          std::to_string(count) + "x" + std::to_string(dim) + " floats");
  }
  return EmbeddingTable(count, dim, std::move(data));
}

void write_embeddings(const EmbeddingTable& table, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    out.write(kEmbeddingMagic, 5);
    write_u32(out, static_cast<std::uint32_t>(table.n_facts()));
    write_u32(out, static_cast<std::uint32_t>(table.dim()));
    out.write(reinterpret_cast<const char*>(table.vectors().data()),
              static_cast<std::streamsize>(table.vectors().size() * sizeof(float)));
  });
}

}  // namespace ipursuit
