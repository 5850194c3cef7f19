#pragma once

#include <map>
#include <stdexcept>

#include "genattr/text.hpp"

namespace genattr::detail {

// Net answer flow along a single path. The credits a path hands out must
// telescope to [final answer] - [starting answer].
class PathLedger {
 public:
  explicit PathLedger(const AnswerKey& start) : start_(start) {}

  void transition(const AnswerKey& from, const AnswerKey& to) {
    ++net_[to];
    --net_[from];
  }

  void check(const AnswerKey& final_answer) const {
    auto expected = [&](const AnswerKey& y) {
      return static_cast<long>(y == final_answer) - static_cast<long>(y == start_);
    };
    for (const auto& [y, n] : net_) {
      if (n != expected(y)) throw std::logic_error("path credits do not telescope");
    }
    if (!(final_answer == start_) && (!net_.contains(final_answer) || !net_.contains(start_))) {
      throw std::logic_error("path credits do not telescope");
    }
  }

 private:
  AnswerKey start_;
  std::map<AnswerKey, long> net_;
};

}  // namespace genattr::detail
