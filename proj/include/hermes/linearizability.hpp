#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hermes/history.hpp"

namespace hermes {

class SearchBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed histories: duplicate invokes, completes without an invoke, a
// complete before its invoke, or ops touching two keys.
class HistoryShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class FastPathResult { Linearizable, Inconclusive };

struct Verdict {
  bool linearizable = false;
  // Success: op ids in linearization order (pending ops that were dropped do
  // not appear).
  std::vector<OpId> witness;
  // Failure: the shortest prefix of the time-ordered history that is already
  // not linearizable. Its last event is the culprit.
  std::vector<HistoryEvent> violating_prefix;
  bool via_fast_path = false;
  std::uint64_t explored = 0;
};

struct CheckOptions {
  std::uint64_t budget = 10'000'000;
  bool use_fast_path = true;
  bool minimize = true;
};

// Register with CAS and fetch-add. Aborted and not-operational completions are
// no-ops; a failed CAS behaves like a read; pending ops may take effect or not.
Verdict check_key_history(const std::vector<HistoryEvent>& events, const std::string& initial,
                          const CheckOptions& options = {});

// Proposes the commit-timestamp order as the witness and validates it.
FastPathResult fast_path(const std::vector<HistoryEvent>& events, const std::string& initial,
                         std::vector<OpId>* witness = nullptr);

// Exhaustive search with memoization. Throws SearchBudgetExceeded.
bool search_linearizable(const std::vector<HistoryEvent>& events, const std::string& initial,
                         std::uint64_t budget, std::vector<OpId>* witness = nullptr,
                         std::uint64_t* explored = nullptr);

struct HistoryReport {
  bool linearizable = true;
  std::map<KeyId, Verdict> failures;
  std::size_t keys_checked = 0;
  std::size_t fast_path_keys = 0;
};

HistoryReport check_history(const History& history, const CheckOptions& options = {});

}  // namespace hermes
