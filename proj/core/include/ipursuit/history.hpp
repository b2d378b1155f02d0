#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ipursuit/common.hpp"

namespace ipursuit {

/// Ordered query-answer pairs accumulated during one pursuit. Query ids are
/// unique and answers stay in the ternary alphabet.
class History {
 public:
  History() = default;

  void push(std::uint32_t query_id, Answer answer) {
    if (!is_valid_answer(answer)) {
      throw ValidationError("history answer " + std::to_string(answer) + " outside alphabet");
    }
    if (contains(query_id)) {
      throw ValidationError("duplicate query_id " + std::to_string(query_id) + " in history");
    }
    entries_.emplace_back(query_id, answer);
  }

  bool contains(std::uint32_t query_id) const {
    for (const auto& [q, a] : entries_) {
      if (q == query_id) return true;
    }
    return false;
  }

  const std::vector<std::pair<std::uint32_t, Answer>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  bool operator==(const History&) const = default;

 private:
  std::vector<std::pair<std::uint32_t, Answer>> entries_;
};

}  // namespace ipursuit
