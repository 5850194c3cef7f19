#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "genattr/attribution.hpp"
#include "genattr/hierarchy_spec.hpp"
#include "genattr/models.hpp"
#include "genattr/text.hpp"

namespace genattr {

enum class Relevance { relevant, irrelevant };

struct Passage {
  std::string id;
  std::string title;
  std::string text;
  std::optional<Relevance> label;
};

struct EvalRecord {
  std::string query_id;
  std::string question;
  std::vector<Passage> passages;
  std::vector<std::string> gold_answers;
};

// JSON Lines, one record per line. Blank lines are skipped. Throws
// SchemaError naming the 1-based line and offending field.
std::vector<EvalRecord> read_dataset(std::istream& in);
std::vector<EvalRecord> load_dataset(const std::string& path);
std::string record_to_json(const EvalRecord& record);
void write_dataset(std::ostream& out, const std::vector<EvalRecord>& records);

bool answer_match(std::string_view candidate, const std::vector<std::string>& gold_answers);
bool passage_relevant(const Passage& passage, const std::vector<std::string>& gold_answers);
// The explicit label when present, containment otherwise.
bool is_relevant(const Passage& passage, const std::vector<std::string>& gold_answers);

// Number of hierarchy tiers built for a context.
enum class HierarchyDepth { documents = 1, words = 2, sentences = 3 };

/// Tokenized model input for one record.
///   [question words] then, per passage: <sep> title words, text words.
/// The question is a pinned top-level node; passages are documents, split
/// into sentences and words according to the depth.
struct RecordContext {
  TokenSeq x;
  HierarchySpec h;
  std::vector<NodeId> doc_nodes;   // in context order
  std::vector<std::size_t> order;  // context slot -> passage index in the record
};

RecordContext build_context(const EvalRecord& record, Vocabulary& vocab,
                            HierarchyDepth depth = HierarchyDepth::sentences,
                            std::optional<std::vector<std::size_t>> passage_order = std::nullopt);

// Plain full-context answer.
std::string read_answer(const EvalRecord& record, Generator& backend, Vocabulary& vocab);
// Answer with only the passage at `passage_index` visible (plus the question).
std::string read_single_passage(const EvalRecord& record, std::size_t passage_index,
                                Generator& backend, Vocabulary& vocab);

struct RankedList {
  std::vector<std::string> ids;
  std::vector<double> scores;
};

RankedList retriever_order(const EvalRecord& record);
// Stable sort by total non-abstention mass; ties keep retriever order.
// doc_nodes[i] is the feature id of passage i.
RankedList rerank_by_attribution(const EvalRecord& record, const AttributionTable& doc_table,
                                 const std::vector<NodeId>& doc_nodes);

// r(k) for k = 1..k_max: fraction of records with a relevant passage in the top k.
std::vector<double> recall_at_k(const std::vector<EvalRecord>& records,
                                const std::vector<RankedList>& rankings, std::size_t k_max);
// 100 * mean of the curve.
double auc(const std::vector<double>& curve);

struct RankedAnswer {
  std::string answer;
  double mass = 0.0;

  friend bool operator==(const RankedAnswer&, const RankedAnswer&) = default;
};

// Answers by total mass summed over features, abstention excluded, ties
// lexicographic, truncated to k.
std::vector<RankedAnswer> distill_top_answers(const AttributionTable& table, std::size_t k);

// Distillation with an optional fresh reader pass over the documents selected
// at threshold tau; that answer is placed first.
std::vector<std::string> distill_with_repass(const EvalRecord& record,
                                             const AttributionTable& doc_table,
                                             const std::vector<NodeId>& doc_nodes, std::size_t k,
                                             bool repass, double tau, Generator& backend,
                                             Vocabulary& vocab);

// One single-passage query per passage; distinct non-abstention answers by
// vote count, ties by first occurrence.
std::vector<std::string> majority_vote(const EvalRecord& record, Generator& backend,
                                       Vocabulary& vocab, std::size_t k);

double top_k_accuracy(const std::vector<EvalRecord>& records,
                      const std::vector<std::vector<std::string>>& candidate_lists, std::size_t k);

struct PseudoLabelResult {
  EvalRecord record;
  std::vector<std::string> pseudo_gold;
  bool skipped = false;  // no relevant-labelled passage
};

// Single-passage answers from relevant passages become pseudo-gold; passages
// are relabelled by containment. Never removes a relevant label.
PseudoLabelResult pseudo_label(const EvalRecord& record, Generator& backend, Vocabulary& vocab);

// Correctness (0/1) with the gold passage moved to each slot 1..p, others in
// their relative order.
std::vector<double> position_sweep(const EvalRecord& record, Generator& backend,
                                   Vocabulary& vocab, const std::string& gold_passage_id);

}  // namespace genattr
