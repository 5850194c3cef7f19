#include "genattr/harness.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <string>

#include "genattr/errors.hpp"
#include "genattr/hierarchy.hpp"
#include "json.hpp"

namespace genattr {

namespace {

using json = nlohmann::ordered_json;

std::string required_string(const json& obj, const char* field, std::size_t line,
                            const std::string& path) {
  const auto it = obj.find(field);
  if (it == obj.end()) throw SchemaError(line, path, "missing field \"" + path + "\"");
  if (!it->is_string()) throw SchemaError(line, path, "field \"" + path + "\" must be a string");
  return it->get<std::string>();
}

std::string optional_string(const json& obj, const char* field, std::size_t line,
                            const std::string& path) {
  const auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) throw SchemaError(line, path, "field \"" + path + "\" must be a string");
  return it->get<std::string>();
}

EvalRecord parse_record(const json& j, std::size_t line) {
  if (!j.is_object()) throw SchemaError(line, "", "record must be a JSON object");
  EvalRecord r;
  r.query_id = required_string(j, "query_id", line, "query_id");
  r.question = required_string(j, "question", line, "question");

  const auto passages = j.find("passages");
  if (passages == j.end()) throw SchemaError(line, "passages", "missing field \"passages\"");
  if (!passages->is_array()) throw SchemaError(line, "passages", "\"passages\" must be an array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < passages->size(); ++i) {
    const json& pj = (*passages)[i];
    const std::string path = "passages[" + std::to_string(i) + "]";
    if (!pj.is_object()) throw SchemaError(line, path, path + " must be an object");
    Passage p;
    p.id = required_string(pj, "id", line, path + ".id");
    p.title = optional_string(pj, "title", line, path + ".title");
    p.text = required_string(pj, "text", line, path + ".text");
    if (const auto label = pj.find("label"); label != pj.end() && !label->is_null()) {
      if (*label == "relevant") {
        p.label = Relevance::relevant;
      } else if (*label == "irrelevant") {
        p.label = Relevance::irrelevant;
      } else {
        throw SchemaError(line, path + ".label",
                          path + ".label must be \"relevant\", \"irrelevant\" or null");
      }
    }
    if (!seen.insert(p.id).second) {
      throw SchemaError(line, path + ".id", "duplicate passage id \"" + p.id + "\"");
    }
    r.passages.push_back(std::move(p));
  }

  if (const auto gold = j.find("gold_answers"); gold != j.end() && !gold->is_null()) {
    if (!gold->is_array()) {
      throw SchemaError(line, "gold_answers", "\"gold_answers\" must be an array");
    }
    for (std::size_t i = 0; i < gold->size(); ++i) {
      if (!(*gold)[i].is_string()) {
        throw SchemaError(line, "gold_answers[" + std::to_string(i) + "]",
                          "gold answers must be strings");
      }
      r.gold_answers.push_back((*gold)[i].get<std::string>());
    }
  }
  return r;
}

std::vector<TokenId> intern_words(Vocabulary& vocab, const std::vector<std::string>& words) {
  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(vocab.intern(w));
  return ids;
}

std::size_t slot_of_passage(const RecordContext& ctx, std::size_t passage_index) {
  const auto it = std::find(ctx.order.begin(), ctx.order.end(), passage_index);
  if (it == ctx.order.end()) throw ContractViolation("passage is not part of the context");
  return static_cast<std::size_t>(it - ctx.order.begin());
}

Mask pinned_mask(const RecordContext& ctx) {
  Mask m(ctx.x.size(), false);
  m.set_all(ctx.h.pinned_positions());
  return m;
}

std::string answer_with_docs(const RecordContext& ctx, const std::vector<std::size_t>& slots,
                             Generator& backend) {
  Mask m = pinned_mask(ctx);
  for (std::size_t slot : slots) m.set_all(ctx.h.positions(ctx.doc_nodes[slot]));
  return backend.generate(ctx.x, m, MaskMode::drop).answer;
}

}  // namespace

std::vector<EvalRecord> read_dataset(std::istream& in) {
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError(number, "", std::string("invalid JSON: ") + e.what());
    }
    out.push_back(parse_record(j, number));
  }
  return out;
}

std::vector<EvalRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  return read_dataset(in);
}

std::string record_to_json(const EvalRecord& record) {
  json j;
  j["query_id"] = record.query_id;
  j["question"] = record.question;
  j["passages"] = json::array();
  for (const auto& p : record.passages) {
    json pj;
    pj["id"] = p.id;
    pj["title"] = p.title;
    pj["text"] = p.text;
    if (p.label) {
      pj["label"] = *p.label == Relevance::relevant ? "relevant" : "irrelevant";
    } else {
      pj["label"] = nullptr;
    }
    j["passages"].push_back(std::move(pj));
  }
  j["gold_answers"] = record.gold_answers;
  return j.dump();
}

void write_dataset(std::ostream& out, const std::vector<EvalRecord>& records) {
  for (const auto& r : records) out << record_to_json(r) << '\n';
}

bool answer_match(std::string_view candidate, const std::vector<std::string>& gold_answers) {
  const std::string c = normalize_answer(candidate);
  return std::any_of(gold_answers.begin(), gold_answers.end(),
                     [&](const std::string& g) { return normalize_answer(g) == c; });
}

bool passage_relevant(const Passage& passage, const std::vector<std::string>& gold_answers) {
  const std::string body = normalize_answer(passage.title + " " + passage.text);
  return std::any_of(gold_answers.begin(), gold_answers.end(), [&](const std::string& g) {
    const std::string key = normalize_answer(g);
    return !key.empty() && body.find(key) != std::string::npos;
  });
}

bool is_relevant(const Passage& passage, const std::vector<std::string>& gold_answers) {
  if (passage.label) return *passage.label == Relevance::relevant;
  return passage_relevant(passage, gold_answers);
}

RecordContext build_context(const EvalRecord& record, Vocabulary& vocab, HierarchyDepth depth,
                            std::optional<std::vector<std::size_t>> passage_order) {
  std::vector<std::size_t> order;
  if (passage_order) {
    order = std::move(*passage_order);
    std::vector<std::size_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i] != i || sorted.size() != record.passages.size()) {
        throw ContractViolation("passage order must be a permutation of the passages");
      }
    }
  } else {
    order.resize(record.passages.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
  }

  std::vector<TokenId> tokens;
  std::vector<NodeLayout> top;

  const auto question = split_words(record.question);
  if (!question.empty()) {
    NodeLayout q = NodeLayout::span(NodeKind::sentence, question.size());
    q.pinned = true;
    top.push_back(std::move(q));
    const auto ids = intern_words(vocab, question);
    tokens.insert(tokens.end(), ids.begin(), ids.end());
  }

  for (std::size_t idx : order) {
    const Passage& p = record.passages[idx];
    const auto title = split_words(p.title);
    const auto text = split_words(p.text);
    tokens.push_back(Vocabulary::kSep);
    const auto title_ids = intern_words(vocab, title);
    const auto text_ids = intern_words(vocab, text);
    tokens.insert(tokens.end(), title_ids.begin(), title_ids.end());
    tokens.insert(tokens.end(), text_ids.begin(), text_ids.end());

    if (depth == HierarchyDepth::sentences) {
      std::vector<NodeLayout> sentences;
      // Header sentence: the separator plus the title.
      sentences.push_back(NodeLayout::span(NodeKind::sentence, 1 + title.size()));
      for (const auto& [b, e] : split_sentences(text)) {
        sentences.push_back(NodeLayout::span(NodeKind::sentence, e - b));
      }
      top.push_back(NodeLayout::group(NodeKind::document, std::move(sentences)));
    } else {
      top.push_back(NodeLayout::span(NodeKind::document, 1 + title.size() + text.size()));
    }
  }

  HierarchySpec h = HierarchySpec::build(top);
  std::vector<NodeId> doc_nodes = h.players();
  TokenSeq x(std::move(tokens), vocab.size(), Vocabulary::kPad);
  return RecordContext{std::move(x), std::move(h), std::move(doc_nodes), std::move(order)};
}

std::string read_answer(const EvalRecord& record, Generator& backend, Vocabulary& vocab) {
  const RecordContext ctx = build_context(record, vocab, HierarchyDepth::words);
  return backend.generate(ctx.x, Mask(ctx.x.size(), true), MaskMode::pad).answer;
}

std::string read_single_passage(const EvalRecord& record, std::size_t passage_index,
                                Generator& backend, Vocabulary& vocab) {
  if (passage_index >= record.passages.size()) {
    throw ContractViolation("passage index out of range");
  }
  const RecordContext ctx = build_context(record, vocab, HierarchyDepth::words);
  return answer_with_docs(ctx, {slot_of_passage(ctx, passage_index)}, backend);
}

RankedList retriever_order(const EvalRecord& record) {
  RankedList out;
  for (const auto& p : record.passages) {
    out.ids.push_back(p.id);
    out.scores.push_back(0.0);
  }
  return out;
}

RankedList rerank_by_attribution(const EvalRecord& record, const AttributionTable& doc_table,
                                 const std::vector<NodeId>& doc_nodes) {
  if (doc_nodes.size() != record.passages.size()) {
    throw ContractViolation("one document node per passage is required");
  }
  std::vector<double> mass(doc_nodes.size());
  for (std::size_t i = 0; i < doc_nodes.size(); ++i) {
    const auto& u = doc_table.universe();
    if (!std::binary_search(u.begin(), u.end(), doc_nodes[i])) {
      throw ContractViolation("document node " + std::to_string(doc_nodes[i]) +
                              " is missing from the attribution table");
    }
    mass[i] = doc_table.total_mass(doc_nodes[i], /*exclude_abstention=*/true);
  }
  std::vector<std::size_t> idx(doc_nodes.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return mass[a] > mass[b]; });
  RankedList out;
  for (std::size_t i : idx) {
    out.ids.push_back(record.passages[i].id);
    out.scores.push_back(mass[i]);
  }
  return out;
}

std::vector<double> recall_at_k(const std::vector<EvalRecord>& records,
                                const std::vector<RankedList>& rankings, std::size_t k_max) {
  if (records.size() != rankings.size()) {
    throw ContractViolation("one ranking per record is required");
  }
  if (k_max == 0) throw ContractViolation("k_max must be at least 1");
  std::vector<std::size_t> hits(k_max + 1, 0);  // hits[k]: records whose first relevant is at k
  for (std::size_t r = 0; r < records.size(); ++r) {
    const EvalRecord& rec = records[r];
    std::map<std::string, const Passage*> by_id;
    for (const auto& p : rec.passages) by_id[p.id] = &p;
    if (rankings[r].ids.size() != rec.passages.size()) {
      throw ContractViolation("ranking does not match record " + rec.query_id);
    }
    for (std::size_t k = 0; k < rankings[r].ids.size(); ++k) {
      const auto it = by_id.find(rankings[r].ids[k]);
      if (it == by_id.end()) {
        throw ContractViolation("ranking names unknown passage " + rankings[r].ids[k]);
      }
      if (is_relevant(*it->second, rec.gold_answers)) {
        if (k < k_max) ++hits[k + 1];
        break;
      }
    }
  }
  std::vector<double> curve(k_max);
  std::size_t running = 0;
  const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
  for (std::size_t k = 1; k <= k_max; ++k) {
    running += hits[k];
    curve[k - 1] = records.empty() ? 0.0 : static_cast<double>(running) / n;
  }
  return curve;
}

double auc(const std::vector<double>& curve) {
  if (curve.empty()) throw ContractViolation("auc needs a non-empty curve");
  double sum = 0.0;
  for (double v : curve) sum += v;
  return 100.0 * sum / static_cast<double>(curve.size());
}

std::vector<RankedAnswer> distill_top_answers(const AttributionTable& table, std::size_t k) {
  if (k == 0) throw ContractViolation("k must be at least 1");
  if (table.sample_count() == 0) return {};
  std::map<AnswerKey, std::uint64_t> totals;
  for (const auto& [feature, counts] : table.counts()) {
    for (const auto& [answer, c] : counts) {
      if (!answer.is_abstention() && c > 0) totals[answer] += c;
    }
  }
  std::vector<RankedAnswer> out;
  for (const auto& [answer, c] : totals) {
    out.push_back({answer.str(),
                   static_cast<double>(c) / static_cast<double>(table.sample_count())});
  }
  // totals is ordered by key, so stable sorting by mass leaves ties lexicographic.
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedAnswer& a, const RankedAnswer& b) { return a.mass > b.mass; });
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<std::string> distill_with_repass(const EvalRecord& record,
                                             const AttributionTable& doc_table,
                                             const std::vector<NodeId>& doc_nodes, std::size_t k,
                                             bool repass, double tau, Generator& backend,
                                             Vocabulary& vocab) {
  std::vector<std::string> out;
  for (const auto& a : distill_top_answers(doc_table, k)) out.push_back(a.answer);
  if (!repass || doc_table.sample_count() == 0) return out;

  const std::set<NodeId> selected = select_important(doc_table, tau);
  if (selected.empty()) return out;
  const RecordContext ctx = build_context(record, vocab, HierarchyDepth::words);
  if (ctx.doc_nodes.size() != doc_nodes.size()) {
    throw ContractViolation("document nodes do not match the record");
  }
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < doc_nodes.size(); ++i) {
    if (selected.contains(doc_nodes[i])) slots.push_back(i);
  }
  const AnswerKey fresh = AnswerKey::from_text(answer_with_docs(ctx, slots, backend));
  if (fresh.is_abstention() || fresh.str().empty()) return out;

  std::erase(out, fresh.str());
  out.insert(out.begin(), fresh.str());
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<std::string> majority_vote(const EvalRecord& record, Generator& backend,
                                       Vocabulary& vocab, std::size_t k) {
  if (k == 0) throw ContractViolation("k must be at least 1");
  const RecordContext ctx = build_context(record, vocab, HierarchyDepth::words);
  std::vector<std::string> first_seen;
  std::map<std::string, std::size_t> votes;
  for (std::size_t slot = 0; slot < ctx.doc_nodes.size(); ++slot) {
    const AnswerKey a = AnswerKey::from_text(answer_with_docs(ctx, {slot}, backend));
    if (a.is_abstention() || a.str().empty()) continue;
    if (votes[a.str()]++ == 0) first_seen.push_back(a.str());
  }
  std::stable_sort(first_seen.begin(), first_seen.end(),
                   [&](const std::string& a, const std::string& b) { return votes[a] > votes[b]; });
  if (first_seen.size() > k) first_seen.resize(k);
  return first_seen;
}

double top_k_accuracy(const std::vector<EvalRecord>& records,
                      const std::vector<std::vector<std::string>>& candidate_lists,
                      std::size_t k) {
  if (k == 0) throw ContractViolation("k must be at least 1");
  if (records.size() != candidate_lists.size()) {
    throw ContractViolation("one candidate list per record is required");
  }
  if (records.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& cands = candidate_lists[r];
    const std::size_t upto = std::min(k, cands.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (answer_match(cands[i], records[r].gold_answers)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

PseudoLabelResult pseudo_label(const EvalRecord& record, Generator& backend, Vocabulary& vocab) {
  PseudoLabelResult out;
  out.record = record;
  std::vector<std::size_t> relevant;
  for (std::size_t i = 0; i < record.passages.size(); ++i) {
    if (record.passages[i].label == Relevance::relevant) relevant.push_back(i);
  }
  if (relevant.empty()) {
    out.skipped = true;
    return out;
  }

  for (std::size_t i : relevant) {
    const AnswerKey a = AnswerKey::from_text(read_single_passage(record, i, backend, vocab));
    if (a.is_abstention() || a.str().empty()) continue;
    if (std::find(out.pseudo_gold.begin(), out.pseudo_gold.end(), a.str()) ==
        out.pseudo_gold.end()) {
      out.pseudo_gold.push_back(a.str());
    }
  }

  for (auto& p : out.record.passages) {
    if (p.label == Relevance::relevant) continue;
    p.label = passage_relevant(p, out.pseudo_gold) ? Relevance::relevant : Relevance::irrelevant;
  }
  for (const auto& g : out.pseudo_gold) {
    if (!answer_match(g, out.record.gold_answers)) out.record.gold_answers.push_back(g);
  }
  return out;
}

std::vector<double> position_sweep(const EvalRecord& record, Generator& backend,
                                   Vocabulary& vocab, const std::string& gold_passage_id) {
  const auto gold_it =
      std::find_if(record.passages.begin(), record.passages.end(),
                   [&](const Passage& p) { return p.id == gold_passage_id; });
  if (gold_it == record.passages.end()) {
    throw ContractViolation("unknown gold passage id " + gold_passage_id);
  }
  const auto gold = static_cast<std::size_t>(gold_it - record.passages.begin());
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < record.passages.size(); ++i) {
    if (i != gold) others.push_back(i);
  }

  std::vector<double> curve;
  for (std::size_t j = 0; j < record.passages.size(); ++j) {
    std::vector<std::size_t> order = others;
    order.insert(order.begin() + static_cast<std::ptrdiff_t>(j), gold);
    const RecordContext ctx = build_context(record, vocab, HierarchyDepth::words, order);
    const std::string a =
        backend.generate(ctx.x, Mask(ctx.x.size(), true), MaskMode::pad).answer;
    curve.push_back(answer_match(a, record.gold_answers) ? 1.0 : 0.0);
  }
  return curve;
}

}  // namespace genattr
