#include "genattr/synthetic.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "genattr/errors.hpp"
#include "genattr/rng.hpp"

namespace genattr {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

class WordSource {
 public:
  explicit WordSource(std::uint64_t seed) : rng_(seed, StreamDomain::synthetic, 0) {}

  // A fresh pseudo-word that has not been produced before.
  std::string fresh(std::size_t syllables) {
    for (;;) {
      std::string w;
      for (std::size_t i = 0; i < syllables; ++i) {
        w += kConsonants[rng_.below(kConsonants.size())];
        w += kVowels[rng_.below(kVowels.size())];
      }
      if (used_.insert(w).second) return w;
    }
  }

  StreamRng& rng() { return rng_; }

 private:
  StreamRng rng_;
  std::set<std::string> used_;
};

std::string filler_sentence(WordSource& words, const std::vector<std::string>& pool,
                            std::size_t length) {
  std::string s;
  for (std::size_t i = 0; i < length; ++i) {
    if (i > 0) s += ' ';
    s += pool[words.rng().below(pool.size())];
  }
  return s + ".";
}

// Filler text with `insert` placed inside the first sentence, never as its
// last word, so the keyword stays a clean token.
std::string passage_text(WordSource& words, const std::vector<std::string>& pool,
                         std::size_t filler_words, const std::string& insert) {
  const std::size_t first = std::max<std::size_t>(2, filler_words / 2);
  const std::size_t second = std::max<std::size_t>(1, filler_words - first);
  std::string text;
  if (insert.empty()) {
    text = filler_sentence(words, pool, first);
  } else {
    const std::size_t at = words.rng().below(first - 1);
    for (std::size_t i = 0; i < first; ++i) {
      if (i > 0) text += ' ';
      if (i == at) text += insert + ' ';
      text += pool[words.rng().below(pool.size())];
    }
    text += '.';
  }
  return text + ' ' + filler_sentence(words, pool, second);
}

}  // namespace

SyntheticBenchmark make_planted_benchmark(const SyntheticOptions& options) {
  if (options.passages == 0) throw ContractViolation("synthetic records need passages");
  if (options.max_decoys >= options.passages) {
    throw ContractViolation("max_decoys must be smaller than the passage count");
  }

  WordSource words(options.seed);
  std::vector<std::string> pool;
  for (std::size_t i = 0; i < 64; ++i) pool.push_back(words.fresh(2));

  SyntheticBenchmark out;
  std::vector<std::pair<std::string, std::string>> decoy_keywords;

  for (std::size_t r = 0; r < options.records; ++r) {
    const std::string gold_keyword = words.fresh(3);
    const std::string gold_answer = words.fresh(3);
    const std::string decoy_keyword = words.fresh(3);
    const std::string wrong_answer = words.fresh(3);

    EvalRecord rec;
    rec.query_id = "q" + std::to_string(r);
    rec.question = "which word does record " + std::to_string(r) + " point to?";
    rec.gold_answers = {gold_answer};

    const std::size_t p = options.passages;
    const std::size_t gold_slot = words.rng().below(p);
    const std::size_t decoys = words.rng().below(options.max_decoys + 1);

    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < p; ++i) {
      if (i != gold_slot) others.push_back(i);
    }
    shuffle(std::span<std::size_t>(others), words.rng());
    std::set<std::size_t> decoy_slots(others.begin(),
                                      others.begin() + static_cast<std::ptrdiff_t>(decoys));

    for (std::size_t i = 0; i < p; ++i) {
      Passage passage;
      passage.id = rec.query_id + "-p" + std::to_string(i);
      passage.title = pool[words.rng().below(pool.size())];
      if (i == gold_slot) {
        passage.text = passage_text(words, pool, options.filler_words,
                                    gold_keyword + " names " + gold_answer);
        passage.label = Relevance::relevant;
      } else if (decoy_slots.contains(i)) {
        passage.text = passage_text(words, pool, options.filler_words,
                                    decoy_keyword + " names " + wrong_answer);
        passage.label = Relevance::irrelevant;
      } else {
        passage.text = passage_text(words, pool, options.filler_words, "");
        passage.label = Relevance::irrelevant;
      }
      rec.passages.push_back(std::move(passage));
    }

    out.keywords.emplace_back(gold_keyword, gold_answer);
    if (decoys > 0) decoy_keywords.emplace_back(decoy_keyword, wrong_answer);
    out.records.push_back(std::move(rec));
  }
  out.keywords.insert(out.keywords.end(), decoy_keywords.begin(), decoy_keywords.end());
  return out;
}

}  // namespace genattr
