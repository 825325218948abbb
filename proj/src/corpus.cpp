#include "scitag/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "scitag/util.hpp"

namespace scitag::corpus {

namespace {

// Penn Treebank word tags (minus UH, absent from scientific prose) plus the
// treebank punctuation tags; slot 0 is UNK. 43 symbols total.
const std::array<std::string, kNumPosTags> kPosNames = {
    "UNK", "CC",  "CD",   "DT",   "EX",  "FW",  "IN",  "JJ",  "JJR",  "JJS", "LS",
    "MD",  "NN",  "NNP",  "NNPS", "NNS", "PDT", "POS", "PRP", "PRP$", "RB",
    "RBR", "RBS", "RP",   "SYM",  "TO",  "VB",  "VBD", "VBG", "VBN",  "VBP",
    "VBZ", "WDT", "WP",   "WP$",  "WRB", ".",   ",",   ":",   "``",   "''",
    "-LRB-", "-RRB-",
};

bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Bytes >= 0x80 (UTF-8 continuations and lead bytes) ride along with word
// characters so multibyte letters are never split.
bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

Token make_token(std::string_view text, std::size_t begin, std::size_t end) {
  Token t;
  t.surface = std::string(text.substr(begin, end - begin));
  t.begin = begin;
  t.end = end;
  t.cap = cap_class(t.surface);
  return t;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return fields;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int pos_index(std::string_view tag) {
  for (int i = 1; i < kNumPosTags; ++i) {
    if (kPosNames[static_cast<std::size_t>(i)] == tag) return i;
  }
  return 0;
}

const std::string& pos_name(int index) {
  require(index >= 0 && index < kNumPosTags, "pos_name: index out of range");
  return kPosNames[static_cast<std::size_t>(index)];
}

bool pos_is_verb(int index) { return pos_name(index).rfind("VB", 0) == 0; }

CapClass cap_class(std::string_view surface) {
  require(!surface.empty(), "cap_class: empty surface");
  int cased = 0;
  int upper = 0;
  for (unsigned char c : surface) {
    if (std::isupper(c)) {
      ++cased;
      ++upper;
    } else if (std::islower(c)) {
      ++cased;
    }
  }
  if (cased > 0 && upper == cased) return CapClass::AllCaps;
  if (std::isupper(static_cast<unsigned char>(surface[0]))) return CapClass::FirstCap;
  if (std::islower(static_cast<unsigned char>(surface[0])) && upper > 0)
    return CapClass::AnyCapNotFirst;
  return CapClass::AllLower;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (is_space_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t run_end = i;
    bool has_eq = false, has_alpha = false, has_digit = false;
    while (run_end < n && !is_space_byte(static_cast<unsigned char>(text[run_end]))) {
      const auto c = static_cast<unsigned char>(text[run_end]);
      has_eq = has_eq || c == '=';
      has_alpha = has_alpha || std::isalpha(c) != 0 || c >= 0x80;
      has_digit = has_digit || std::isdigit(c) != 0;
      ++run_end;
    }
    if (has_eq || (has_alpha && has_digit)) {
      // Equation fragments and formula-like words stay whole.
      out.push_back(make_token(text, i, run_end));
    } else {
      std::size_t j = i;
      while (j < run_end) {
        if (is_word_byte(static_cast<unsigned char>(text[j]))) {
          std::size_t k = j;
          while (k < run_end && is_word_byte(static_cast<unsigned char>(text[k]))) ++k;
          out.push_back(make_token(text, j, k));
          j = k;
        } else {
          out.push_back(make_token(text, j, j + 1));
          ++j;
        }
      }
    }
    i = run_end;
  }
  return out;
}

std::vector<std::vector<Token>> split_sentences(std::string_view text,
                                                const std::vector<Token>& tokens) {
  std::vector<std::vector<Token>> sentences;
  std::vector<Token> current;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    current.push_back(tokens[i]);
    if (i + 1 >= tokens.size()) break;
    const char last = text[tokens[i].end - 1];
    if (last != '.' && last != '?' && last != '!') continue;
    bool gap_ws = false;
    for (std::size_t p = tokens[i].end; p < tokens[i + 1].begin; ++p) {
      if (is_space_byte(static_cast<unsigned char>(text[p]))) gap_ws = true;
    }
    const auto next_first = static_cast<unsigned char>(text[tokens[i + 1].begin]);
    if (gap_ws && std::isupper(next_first)) {
      sentences.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  return sentences;
}

std::vector<int> spans_to_iobes(std::size_t n_tokens, const std::vector<Span>& spans) {
  std::vector<Span> sorted = spans;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t s = 0; s + 1 < sorted.size(); ++s) {
    if (sorted[s + 1].first <= sorted[s].last) {
      throw std::runtime_error(
          "spans_to_iobes: overlapping spans [" + std::to_string(sorted[s].first) + "," +
          std::to_string(sorted[s].last) + "] and [" + std::to_string(sorted[s + 1].first) +
          "," + std::to_string(sorted[s + 1].last) + "]");
    }
  }
  std::vector<int> labels(n_tokens, kOutside);
  for (const Span& span : sorted) {
    require(span.first >= 0 && span.first <= span.last &&
                span.last < static_cast<int>(n_tokens),
            "spans_to_iobes: span out of bounds");
    if (span.first == span.last) {
      labels[static_cast<std::size_t>(span.first)] = make_label(Part::S, span.category);
      continue;
    }
    labels[static_cast<std::size_t>(span.first)] = make_label(Part::B, span.category);
    for (int t = span.first + 1; t < span.last; ++t)
      labels[static_cast<std::size_t>(t)] = make_label(Part::I, span.category);
    labels[static_cast<std::size_t>(span.last)] = make_label(Part::E, span.category);
  }
  return labels;
}

std::vector<Span> iobes_to_spans(const std::vector<int>& labels) {
  std::vector<Span> out;
  int open_cat = -1;
  int open_start = -1;
  auto close_at = [&](int t) {
    out.push_back({open_start, t, static_cast<Category>(open_cat)});
    open_cat = -1;
  };
  const int n = static_cast<int>(labels.size());
  for (int t = 0; t < n; ++t) {
    const int label = labels[static_cast<std::size_t>(t)];
    require(label >= 0 && label < kNumLabels, "iobes_to_spans: label out of range");
    if (open_cat >= 0) {
      if (label != kOutside && static_cast<int>(label_category(label)) == open_cat) {
        if (label_part(label) == Part::I) continue;
        if (label_part(label) == Part::E) {
          close_at(t);
          continue;
        }
      }
      close_at(t - 1);
      if (label == kOutside) continue;
      // Only span-initial labels reopen after a forced close.
      if (label_part(label) == Part::B) {
        open_cat = static_cast<int>(label_category(label));
        open_start = t;
      } else if (label_part(label) == Part::S) {
        out.push_back({t, t, label_category(label)});
      }
    } else {
      if (label == kOutside) continue;
      switch (label_part(label)) {
        case Part::B:
        case Part::I:
          open_cat = static_cast<int>(label_category(label));
          open_start = t;
          break;
        case Part::S:
        case Part::E:
          out.push_back({t, t, label_category(label)});
          break;
      }
    }
  }
  if (open_cat >= 0) close_at(n - 1);
  std::sort(out.begin(), out.end());
  return out;
}

bool iobes_valid(const std::vector<int>& labels) {
  int prev = kStartTag;
  for (int label : labels) {
    if (label < 0 || label >= kNumLabels) return false;
    if (!legal_transition(prev, label)) return false;
    prev = label;
  }
  return legal_transition(prev, kStopTag);
}

namespace {

struct AnnSpan {
  std::string id;
  Category category = Category::Task;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string surface;
  int line = 0;
};

std::vector<AnnSpan> parse_ann(std::string_view ann, const std::string& doc_id) {
  std::vector<AnnSpan> spans;
  std::istringstream in{std::string(ann)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] != 'T') continue;
    auto fail = [&](const std::string& why) {
      throw std::runtime_error(doc_id + ".ann:" + std::to_string(line_no) + ": " + why);
    };
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() < 3) fail("expected 3 tab-separated fields");
    AnnSpan span;
    span.id = fields[0];
    span.line = line_no;
    std::istringstream mid(fields[1]);
    std::string cat_name;
    long long begin = -1, end = -1;
    mid >> cat_name >> begin >> end;
    std::string rest;
    if (!mid || (mid >> rest, !rest.empty())) fail("malformed '<Category> <start> <end>' field");
    const auto cat = parse_category(cat_name);
    if (!cat) fail("unknown category '" + cat_name + "'");
    if (begin < 0 || end <= begin) fail("invalid offsets");
    span.category = *cat;
    span.begin = static_cast<std::size_t>(begin);
    span.end = static_cast<std::size_t>(end);
    // Surface may legitimately contain tabs; rejoin the remainder.
    span.surface = fields[2];
    for (std::size_t f = 3; f < fields.size(); ++f) span.surface += "\t" + fields[f];
    spans.push_back(std::move(span));
  }
  return spans;
}

}  // namespace

BratDocument parse_brat(std::string_view txt, std::string_view ann, const std::string& doc_id) {
  BratDocument doc;
  const std::vector<Token> tokens = tokenize(txt);
  const std::vector<std::vector<Token>> sentences = split_sentences(txt, tokens);

  // Global token index -> (sentence, position).
  std::vector<std::pair<int, int>> where;
  where.reserve(tokens.size());
  for (std::size_t s = 0; s < sentences.size(); ++s)
    for (std::size_t p = 0; p < sentences[s].size(); ++p)
      where.emplace_back(static_cast<int>(s), static_cast<int>(p));

  std::vector<std::vector<Span>> spans_per_sentence(sentences.size());
  for (const AnnSpan& ann_span : parse_ann(ann, doc_id)) {
    if (ann_span.end > txt.size() ||
        std::string_view(txt.substr(ann_span.begin, ann_span.end - ann_span.begin)) !=
            std::string_view(ann_span.surface)) {
      throw std::runtime_error(doc_id + ".ann:" + std::to_string(ann_span.line) + ": span " +
                               ann_span.id + " text mismatch against document text");
    }
    int first = -1, last = -1;
    for (std::size_t g = 0; g < tokens.size(); ++g) {
      if (tokens[g].begin < ann_span.end && tokens[g].end > ann_span.begin) {
        if (first < 0) first = static_cast<int>(g);
        last = static_cast<int>(g);
      }
    }
    if (first < 0) {
      throw std::runtime_error(doc_id + ".ann:" + std::to_string(ann_span.line) + ": span " +
                               ann_span.id + " covers no tokens");
    }
    const auto gfirst = static_cast<std::size_t>(first);
    const auto glast = static_cast<std::size_t>(last);
    if (tokens[gfirst].begin != ann_span.begin || tokens[glast].end != ann_span.end) {
      doc.warnings.push_back({doc_id, ann_span.line,
                              "span " + ann_span.id + " snapped to token boundaries [" +
                                  std::to_string(tokens[gfirst].begin) + "," +
                                  std::to_string(tokens[glast].end) + ")"});
    }
    auto [sent, first_pos] = where[gfirst];
    auto [sent_last, last_pos] = where[glast];
    if (sent_last != sent) {
      doc.warnings.push_back({doc_id, ann_span.line,
                              "span " + ann_span.id + " crosses a sentence boundary; clipped"});
      last_pos = static_cast<int>(sentences[static_cast<std::size_t>(sent)].size()) - 1;
    }
    spans_per_sentence[static_cast<std::size_t>(sent)].push_back(
        {first_pos, last_pos, ann_span.category});
  }

  for (std::size_t s = 0; s < sentences.size(); ++s) {
    auto& spans = spans_per_sentence[s];
    std::sort(spans.begin(), spans.end());
    std::vector<Span> kept;
    for (const Span& span : spans) {
      if (!kept.empty() && span.first <= kept.back().last) {
        doc.warnings.push_back({doc_id, 0,
                                "overlapping annotation dropped in sentence " +
                                    std::to_string(s) + " at tokens [" +
                                    std::to_string(span.first) + "," +
                                    std::to_string(span.last) + "]"});
        continue;
      }
      kept.push_back(span);
    }
    LabeledSentence sentence;
    sentence.tokens = sentences[s];
    sentence.labels = spans_to_iobes(sentence.tokens.size(), kept);
    sentence.doc_id = doc_id;
    sentence.index = static_cast<int>(s);
    doc.sentences.push_back(std::move(sentence));
  }
  return doc;
}

BratDocument read_brat(const std::string& txt_path, const std::string& ann_path) {
  std::string doc_id = txt_path;
  if (const auto slash = doc_id.find_last_of('/'); slash != std::string::npos)
    doc_id = doc_id.substr(slash + 1);
  if (doc_id.size() > 4 && doc_id.substr(doc_id.size() - 4) == ".txt")
    doc_id = doc_id.substr(0, doc_id.size() - 4);
  return parse_brat(read_file(txt_path), read_file(ann_path), doc_id);
}

std::vector<LabeledSentence> parse_column(std::istream& in, const std::string& doc_id) {
  std::vector<LabeledSentence> out;
  std::vector<Token> tokens;
  std::vector<int> labels;
  std::size_t n_cols = 0;
  std::size_t offset = 0;
  std::string line;
  int line_no = 0;

  auto flush = [&] {
    if (tokens.empty()) return;
    LabeledSentence sentence;
    sentence.tokens = std::move(tokens);
    sentence.labels = std::move(labels);
    sentence.doc_id = doc_id;
    sentence.index = static_cast<int>(out.size());
    out.push_back(std::move(sentence));
    tokens = {};
    labels = {};
    n_cols = 0;
    offset = 0;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    auto fail = [&](const std::string& why) {
      throw std::runtime_error(doc_id + ":" + std::to_string(line_no) + ": " + why);
    };
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 2 && fields.size() != 3) fail("expected 2 or 3 tab-separated columns");
    if (n_cols == 0) n_cols = fields.size();
    if (fields.size() != n_cols) fail("ragged columns within a sentence");
    if (fields[0].empty()) fail("empty surface");
    Token token;
    token.surface = fields[0];
    token.begin = offset;
    token.end = offset + token.surface.size();
    offset = token.end + 1;
    token.pos = pos_index(fields[1]);
    token.cap = cap_class(token.surface);
    tokens.push_back(std::move(token));
    if (n_cols == 3) {
      const auto label = parse_label(fields[2]);
      if (!label) fail("unknown label '" + fields[2] + "'");
      labels.push_back(*label);
    }
  }
  flush();
  return out;
}

std::vector<LabeledSentence> read_column(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path);
  std::string doc_id = path;
  if (const auto slash = doc_id.find_last_of('/'); slash != std::string::npos)
    doc_id = doc_id.substr(slash + 1);
  return parse_column(in, doc_id);
}

void write_column(std::ostream& out, const std::vector<LabeledSentence>& sentences) {
  bool first = true;
  for (const LabeledSentence& sentence : sentences) {
    if (!first) out << "\n";
    first = false;
    for (int t = 0; t < sentence.size(); ++t) {
      const Token& token = sentence.tokens[static_cast<std::size_t>(t)];
      out << token.surface << "\t" << pos_name(token.pos);
      if (sentence.labeled()) out << "\t" << label_name(sentence.labels[static_cast<std::size_t>(t)]);
      out << "\n";
    }
  }
}

}  // namespace scitag::corpus
