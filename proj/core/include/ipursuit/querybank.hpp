#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ipursuit/corpus.hpp"

namespace ipursuit {

struct QueryRef {
  std::uint32_t query_id = 0;
  std::string text;
  std::size_t source_fact_index = 0;

  bool operator==(const QueryRef&) const = default;
};

/// Ordered set of retained representative queries; ids are 0..size-1 in
/// retention order and no retained pair exceeds the dedup threshold.
struct QueryBank {
  std::vector<QueryRef> queries;

  std::size_t size() const { return queries.size(); }
  bool operator==(const QueryBank&) const = default;
};

struct ClusteringResult {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<std::uint32_t> assignments;      // cluster index per fact
  std::vector<double> centroids;               // k x dim row-major
  double inertia = 0.0;                        // final sum of squared distances
  std::vector<double> inertia_history;         // one entry per Lloyd iteration
  std::size_t iterations = 0;

  std::vector<std::size_t> cluster_sizes() const;
};

/// Lloyd's algorithm with k-means++ seeding. Stops when the largest centroid
/// shift drops below tol or after max_iters. Deterministic for a fixed seed
/// and bitwise independent of the worker count.
ClusteringResult kmeans_cluster(const EmbeddingTable& table, std::size_t k, std::uint64_t seed,
                                std::size_t max_iters = 100, double tol = 1e-6);

/// One fact index per non-empty cluster: the member closest (Euclidean) to its
/// centroid, ties broken by the lowest fact index. Ordered by cluster index.
std::vector<std::size_t> select_representatives(const ClusteringResult& result,
                                                const EmbeddingTable& table);

/// Greedy cosine dedup: visit candidates in descending priority order (ties by
/// lower fact index) and keep one iff its similarity to every kept candidate
/// stays <= threshold. `priority` aligns with `candidates`; fact_texts may be
/// empty, in which case retained texts are empty strings.
QueryBank dedup_by_cosine(const std::vector<std::size_t>& candidates, const EmbeddingTable& table,
                          double threshold, const std::vector<std::size_t>& priority,
                          const std::vector<std::string>& fact_texts = {});

/// kmeans_cluster -> select_representatives -> dedup_by_cosine. Bank size <= k.
QueryBank build_query_bank(const EmbeddingTable& table, const std::vector<std::string>& fact_texts,
                           std::size_t k, double threshold, std::uint64_t seed,
                           std::size_t max_iters = 100, double tol = 1e-6);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// JSON lines, one {"query_id", "text", "source_fact_index"} object per query.
void write_query_bank(const QueryBank& bank, const std::string& path);
QueryBank load_query_bank(const std::string& path);

}  // namespace ipursuit
