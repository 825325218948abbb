#include "scitag/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <set>

#include "scitag/util.hpp"

namespace scitag::eval {

namespace {

void finish(Prf& prf) {
  prf.precision = prf.tp + prf.fp > 0 ? static_cast<double>(prf.tp) / (prf.tp + prf.fp) : 0.0;
  prf.recall = prf.tp + prf.fn > 0 ? static_cast<double>(prf.tp) / (prf.tp + prf.fn) : 0.0;
  prf.f1 = prf.precision + prf.recall > 0
               ? 2.0 * prf.precision * prf.recall / (prf.precision + prf.recall)
               : 0.0;
}

using SpanKey = std::tuple<int, int, int>;  // first, last, category (-1 = ignored)

void count_spans(const std::vector<corpus::Span>& gold, const std::vector<corpus::Span>& pred,
                 bool use_category, int category_filter, Prf& prf) {
  std::set<SpanKey> gold_keys, pred_keys;
  for (const corpus::Span& s : gold) {
    if (category_filter >= 0 && static_cast<int>(s.category) != category_filter) continue;
    gold_keys.insert({s.first, s.last, use_category ? static_cast<int>(s.category) : -1});
  }
  for (const corpus::Span& s : pred) {
    if (category_filter >= 0 && static_cast<int>(s.category) != category_filter) continue;
    pred_keys.insert({s.first, s.last, use_category ? static_cast<int>(s.category) : -1});
  }
  for (const SpanKey& key : pred_keys) {
    if (gold_keys.count(key)) ++prf.tp;
    else ++prf.fp;
  }
  for (const SpanKey& key : gold_keys) {
    if (!pred_keys.count(key)) ++prf.fn;
  }
}

}  // namespace

MetricReport span_prf(const std::vector<std::vector<corpus::Span>>& gold,
                      const std::vector<std::vector<corpus::Span>>& pred, Subtask subtask) {
  require(gold.size() == pred.size(), "span_prf: gold and pred corpora are misaligned");
  MetricReport report;
  report.level = Level::Span;
  report.subtask = subtask;
  const bool classify = subtask == Subtask::Classification;
  if (classify) {
    for (int c = 0; c < kNumCategories; ++c) report.per_category[static_cast<Category>(c)] = {};
  }
  for (std::size_t s = 0; s < gold.size(); ++s) {
    count_spans(gold[s], pred[s], classify, -1, report.overall);
    if (classify) {
      for (int c = 0; c < kNumCategories; ++c)
        count_spans(gold[s], pred[s], true, c, report.per_category[static_cast<Category>(c)]);
    }
  }
  finish(report.overall);
  for (auto& [cat, prf] : report.per_category) finish(prf);
  return report;
}

MetricReport token_prf(const std::vector<std::vector<int>>& gold,
                       const std::vector<std::vector<int>>& pred, Subtask subtask) {
  require(gold.size() == pred.size(), "token_prf: gold and pred corpora are misaligned");
  MetricReport report;
  report.level = Level::Token;
  report.subtask = subtask;
  const bool classify = subtask == Subtask::Classification;
  if (classify) {
    for (int c = 0; c < kNumCategories; ++c) report.per_category[static_cast<Category>(c)] = {};
  }
  for (std::size_t s = 0; s < gold.size(); ++s) {
    require(gold[s].size() == pred[s].size(),
            "token_prf: length mismatch in sentence " + std::to_string(s));
    for (std::size_t t = 0; t < gold[s].size(); ++t) {
      const int g = gold[s][t];
      const int p = pred[s][t];
      const int gc = g == kOutside ? -1 : static_cast<int>(label_category(g));
      const int pc = p == kOutside ? -1 : static_cast<int>(label_category(p));
      if (classify) {
        for (int c = 0; c < kNumCategories; ++c) {
          Prf& prf = report.per_category[static_cast<Category>(c)];
          if (gc == c && pc == c) { ++prf.tp; ++report.overall.tp; }
          else if (pc == c) { ++prf.fp; ++report.overall.fp; }
          else if (gc == c) { ++prf.fn; ++report.overall.fn; }
        }
      } else {
        if (gc >= 0 && pc >= 0) ++report.overall.tp;
        else if (pc >= 0) ++report.overall.fp;
        else if (gc >= 0) ++report.overall.fn;
      }
    }
  }
  finish(report.overall);
  for (auto& [cat, prf] : report.per_category) finish(prf);
  return report;
}

const char* level_name(Level level) { return level == Level::Span ? "span" : "token"; }

const char* subtask_name(Subtask subtask) {
  return subtask == Subtask::Identification ? "identification" : "classification";
}

void write_tsv(std::ostream& out, const std::vector<MetricReport>& reports) {
  out << std::fixed << std::setprecision(3);
  for (const MetricReport& report : reports) {
    out << level_name(report.level) << "\t" << subtask_name(report.subtask) << "\tall\t"
        << report.overall.precision << "\t" << report.overall.recall << "\t"
        << report.overall.f1 << "\n";
    for (const auto& [cat, prf] : report.per_category) {
      out << level_name(report.level) << "\t" << subtask_name(report.subtask) << "\t"
          << category_name(cat) << "\t" << prf.precision << "\t" << prf.recall << "\t" << prf.f1
          << "\n";
    }
  }
}

void write_kv(std::ostream& out, const std::vector<MetricReport>& reports) {
  out << std::fixed << std::setprecision(3);
  auto emit = [&](const MetricReport& report, const std::string& cat, const Prf& prf) {
    const std::string prefix =
        std::string(level_name(report.level)) + "." + subtask_name(report.subtask) + "." + cat;
    out << prefix << ".precision=" << prf.precision << "\n";
    out << prefix << ".recall=" << prf.recall << "\n";
    out << prefix << ".f1=" << prf.f1 << "\n";
  };
  for (const MetricReport& report : reports) {
    emit(report, "all", report.overall);
    for (const auto& [cat, prf] : report.per_category) emit(report, category_name(cat), prf);
  }
}

}  // namespace scitag::eval
