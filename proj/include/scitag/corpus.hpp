#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "scitag/labels.hpp"

namespace scitag::corpus {

// Orthographic shape of a surface form.
enum class CapClass : int { AllCaps = 0, FirstCap = 1, AllLower = 2, AnyCapNotFirst = 3 };
inline constexpr int kNumCapClasses = 4;

// Fixed 43-symbol POS inventory; index 0 is the reserved UNK slot and
// unknown tag strings map onto it.
inline constexpr int kNumPosTags = 43;
int pos_index(std::string_view tag);
const std::string& pos_name(int index);
bool pos_is_verb(int index);

struct Token {
  std::string surface;
  std::size_t begin = 0;  // byte offsets into the source text, [begin, end)
  std::size_t end = 0;
  int pos = 0;
  CapClass cap = CapClass::AllLower;
};

// Token span, inclusive on both ends.
struct Span {
  int first = 0;
  int last = 0;
  Category category = Category::Task;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

struct LabeledSentence {
  std::vector<Token> tokens;
  std::vector<int> labels;  // empty when the sentence is unlabeled
  std::string doc_id;
  int index = 0;

  bool labeled() const { return !labels.empty(); }
  int size() const { return static_cast<int>(tokens.size()); }
};

CapClass cap_class(std::string_view surface);

// Splits on whitespace and punctuation, except that a maximal non-space run
// containing '=' or mixing letters and digits stays one token. Offsets index
// the original text exactly.
std::vector<Token> tokenize(std::string_view text);

// Sentence boundaries over a token stream: break after a token ending in
// [.?!] when whitespace and an uppercase letter follow.
std::vector<std::vector<Token>> split_sentences(std::string_view text,
                                                const std::vector<Token>& tokens);

std::vector<int> spans_to_iobes(std::size_t n_tokens, const std::vector<Span>& spans);

// Inverse of spans_to_iobes on valid sequences; invalid sequences are
// repaired: a label that cannot continue the open bracket closes it at the
// previous position, and B/S (or a bracket label with nothing open) starts
// anew. Dangling brackets close at sentence end.
std::vector<Span> iobes_to_spans(const std::vector<int>& labels);

bool iobes_valid(const std::vector<int>& labels);

struct IngestWarning {
  std::string file;
  int line = 0;
  std::string message;
};

struct BratDocument {
  std::vector<LabeledSentence> sentences;
  std::vector<IngestWarning> warnings;
};

// BRAT standoff pair. Annotation grammar:
//   T<id> TAB <Category> <start> <end> TAB <surface>
// Non-T lines (relations, attributes, notes) are ignored.
BratDocument read_brat(const std::string& txt_path, const std::string& ann_path);
BratDocument parse_brat(std::string_view txt, std::string_view ann, const std::string& doc_id);

// Column format: one token per line `surface TAB pos [TAB label]`, blank line
// between sentences. The label column may be absent (unlabeled data).
std::vector<LabeledSentence> read_column(const std::string& path);
std::vector<LabeledSentence> parse_column(std::istream& in, const std::string& doc_id);
void write_column(std::ostream& out, const std::vector<LabeledSentence>& sentences);

}  // namespace scitag::corpus
