#pragma once

#include <iosfwd>
#include <map>
#include <vector>

#include "scitag/corpus.hpp"

namespace scitag::eval {

enum class Level { Span, Token };
enum class Subtask { Identification, Classification };

struct Prf {
  long tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MetricReport {
  Level level = Level::Span;
  Subtask subtask = Subtask::Classification;
  Prf overall;
  std::map<Category, Prf> per_category;  // filled for Classification only
};

// Micro-averaged exact-match span scores. Identification ignores categories
// on both sides; duplicate predicted spans are deduplicated before counting.
MetricReport span_prf(const std::vector<std::vector<corpus::Span>>& gold,
                      const std::vector<std::vector<corpus::Span>>& pred, Subtask subtask);

// Token-level scores: a token is positive for category c when its label's
// category is c (B/I/E/S collapse; O is negative). Identification scores
// any-category against O.
MetricReport token_prf(const std::vector<std::vector<int>>& gold,
                       const std::vector<std::vector<int>>& pred, Subtask subtask);

const char* level_name(Level level);
const char* subtask_name(Subtask subtask);

// TAB-separated table: level subtask category precision recall f1.
void write_tsv(std::ostream& out, const std::vector<MetricReport>& reports);
// Structured key-value lines: level.subtask.category.metric=value.
void write_kv(std::ostream& out, const std::vector<MetricReport>& reports);

}  // namespace scitag::eval
