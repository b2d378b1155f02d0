#include "ipursuit/querybank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ipursuit/io_util.hpp"
#include "ipursuit/parallel.hpp"
#include "ipursuit/rng.hpp"

namespace ipursuit {

namespace {

constexpr std::size_t kAssignChunk = 512;

double squared_distance(std::span<const float> row, const double* centroid, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = static_cast<double>(row[d]) - centroid[d];
    acc += diff * diff;
  }
  return acc;
}

/// k-means++ seeding: first centroid uniform, then D^2-weighted picks.
std::vector<double> seed_centroids(const EmbeddingTable& table, std::size_t k,
                                   std::mt19937_64& rng) {
  const std::size_t n = table.n_facts();
  const std::size_t dim = table.dim();
  std::vector<double> centroids(k * dim);

  auto copy_row = [&](std::size_t fact, std::size_t slot) {
    const auto row = table.row(fact);
    for (std::size_t d = 0; d < dim; ++d) centroids[slot * dim + d] = row[d];
  };

  copy_row(bounded_draw(rng, n), 0);
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = squared_distance(table.row(i), centroids.data() + (c - 1) * dim, dim);
      dist2[i] = std::min(dist2[i], d);
      total += dist2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = u64_to_unit(rng()) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = bounded_draw(rng, n);
    }
    copy_row(pick, c);
  }
  return centroids;
}

}  // namespace

std::vector<std::size_t> ClusteringResult::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (std::uint32_t a : assignments) sizes[a]++;
  return sizes;
}

ClusteringResult kmeans_cluster(const EmbeddingTable& table, std::size_t k, std::uint64_t seed,
                                std::size_t max_iters, double tol) {
  const std::size_t n = table.n_facts();
  const std::size_t dim = table.dim();
  if (n == 0) throw ValidationError("kmeans_cluster: empty embedding table");
  if (k < 1 || k > n) {
    throw ValidationError("kmeans_cluster: k=" + std::to_string(k) + " out of range [1, " +
                          std::to_string(n) + "]");
  }

  ClusteringResult result;
  result.k = k;
  result.dim = dim;
  result.assignments.assign(n, 0);

  std::mt19937_64 rng(derive_seed(seed, "querybank.kmeans"));
  std::vector<double> centroids = seed_centroids(table, k, rng);

  const std::size_t n_chunks = (n + kAssignChunk - 1) / kAssignChunk;
  std::vector<double> chunk_inertia(n_chunks);
  // Per-chunk centroid sums, merged in chunk order so the reduction is fixed.
  std::vector<std::vector<double>> chunk_sums(n_chunks);
  std::vector<std::vector<std::size_t>> chunk_counts(n_chunks);

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    for_each_chunk(n, kAssignChunk, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
      auto& sums = chunk_sums[chunk];
      auto& counts = chunk_counts[chunk];
      sums.assign(k * dim, 0.0);
      counts.assign(k, 0);
      double local_inertia = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto row = table.row(i);
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t best_c = 0;
        for (std::size_t c = 0; c < k; ++c) {
          const double d = squared_distance(row, centroids.data() + c * dim, dim);
          if (d < best) {
            best = d;
            best_c = static_cast<std::uint32_t>(c);
          }
        }
        result.assignments[i] = best_c;
        local_inertia += best;
        counts[best_c]++;
        double* dst = sums.data() + static_cast<std::size_t>(best_c) * dim;
        for (std::size_t d = 0; d < dim; ++d) dst[d] += row[d];
      }
      chunk_inertia[chunk] = local_inertia;
    });

    double inertia = 0.0;
    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
      inertia += chunk_inertia[chunk];
      for (std::size_t c = 0; c < k; ++c) counts[c] += chunk_counts[chunk][c];
      for (std::size_t j = 0; j < k * dim; ++j) sums[j] += chunk_sums[chunk][j];
    }
    result.inertia = inertia;
    result.inertia_history.push_back(inertia);
    result.iterations = iter + 1;

    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its old centroid
      double shift2 = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double updated = sums[c * dim + d] / static_cast<double>(counts[c]);
        const double diff = updated - centroids[c * dim + d];
        shift2 += diff * diff;
        centroids[c * dim + d] = updated;
      }
      max_shift = std::max(max_shift, std::sqrt(shift2));
    }
    if (max_shift < tol) break;
  }

  result.centroids = std::move(centroids);
  return result;
}

std::vector<std::size_t> select_representatives(const ClusteringResult& result,
                                                const EmbeddingTable& table) {
  if (result.assignments.size() != table.n_facts() || result.dim != table.dim()) {
    throw ValidationError("select_representatives: clustering result does not match table");
  }
  const std::size_t k = result.k;
  const std::size_t dim = result.dim;
  std::vector<double> best(k, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> winner(k, table.n_facts());
  for (std::size_t i = 0; i < table.n_facts(); ++i) {
    const std::uint32_t c = result.assignments[i];
    const double d = squared_distance(table.row(i), result.centroids.data() + c * dim, dim);
    if (d < best[c]) {  // strict: ties keep the earlier (lower) fact index
      best[c] = d;
      winner[c] = i;
    }
  }
  std::vector<std::size_t> representatives;
  representatives.reserve(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (winner[c] < table.n_facts()) representatives.push_back(winner[c]);
  }
  return representatives;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    dot += static_cast<double>(a[d]) * b[d];
    na += static_cast<double>(a[d]) * a[d];
    nb += static_cast<double>(b[d]) * b[d];
  }
  if (na == 0.0 || nb == 0.0) {
    throw ValidationError("cosine_similarity: zero-norm embedding");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

QueryBank dedup_by_cosine(const std::vector<std::size_t>& candidates, const EmbeddingTable& table,
                          double threshold, const std::vector<std::size_t>& priority,
                          const std::vector<std::string>& fact_texts) {
  if (threshold <= -1.0 || threshold > 1.0) {
    throw ValidationError("dedup threshold must lie in (-1, 1], got " + std::to_string(threshold));
  }
  if (priority.size() != candidates.size()) {
    throw ValidationError("dedup_by_cosine: priority list does not align with candidates");
  }

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (priority[a] != priority[b]) return priority[a] > priority[b];
    return candidates[a] < candidates[b];
  });

  QueryBank bank;
  std::vector<std::size_t> kept;
  for (std::size_t rank : order) {
    const std::size_t fact = candidates[rank];
    bool keep = true;
    for (std::size_t other : kept) {
      if (cosine_similarity(table.row(fact), table.row(other)) > threshold) {
        keep = false;
        break;
      }
    }
    if (!keep) continue;
    kept.push_back(fact);
    QueryRef ref;
    ref.query_id = static_cast<std::uint32_t>(bank.queries.size());
    ref.source_fact_index = fact;
    if (fact < fact_texts.size()) ref.text = fact_texts[fact];
    bank.queries.push_back(std::move(ref));
  }
  return bank;
}

QueryBank build_query_bank(const EmbeddingTable& table, const std::vector<std::string>& fact_texts,
                           std::size_t k, double threshold, std::uint64_t seed,
                           std::size_t max_iters, double tol) {
  if (!fact_texts.empty() && fact_texts.size() != table.n_facts()) {
    throw ValidationError("build_query_bank: fact texts do not align with embeddings");
  }
  const ClusteringResult clusters = kmeans_cluster(table, k, seed, max_iters, tol);
  const std::vector<std::size_t> representatives = select_representatives(clusters, table);
  const std::vector<std::size_t> sizes = clusters.cluster_sizes();
  std::vector<std::size_t> priority;
  priority.reserve(representatives.size());
  for (std::size_t fact : representatives) {
    priority.push_back(sizes[clusters.assignments[fact]]);
  }
  return dedup_by_cosine(representatives, table, threshold, priority, fact_texts);
}

void write_query_bank(const QueryBank& bank, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (const QueryRef& q : bank.queries) {
      nlohmann::json line = {{"query_id", q.query_id},
                             {"text", q.text},
                             {"source_fact_index", q.source_fact_index}};
      out << line.dump() << '\n';
    }
  });
}

QueryBank load_query_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  QueryBank bank;
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
    QueryRef ref;
    ref.query_id = obj.at("query_id").get<std::uint32_t>();
    ref.text = obj.at("text").get<std::string>();
    ref.source_fact_index = obj.at("source_fact_index").get<std::size_t>();
    if (ref.query_id != bank.queries.size()) {
      throw ValidationError(path + ": query ids must be contiguous from 0, got " +
                            std::to_string(ref.query_id) + " at line " + std::to_string(line_no));
    }
    bank.queries.push_back(std::move(ref));
  }
  return bank;
}

}  // namespace ipursuit
