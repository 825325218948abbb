#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace scitag {

// ScienceIE keyphrase categories.
enum class Category : int { Task = 0, Process = 1, Material = 2 };

inline constexpr int kNumCategories = 3;

// Span role of a single token inside a keyphrase.
enum class Part : int { B = 0, I = 1, E = 2, S = 3 };

// Tag inventory: O plus {B,I,E,S} x {Task,Process,Material}. START and STOP
// are boundary tags that exist only in the transition matrix.
inline constexpr int kOutside = 0;
inline constexpr int kNumLabels = 13;
inline constexpr int kStartTag = kNumLabels;
inline constexpr int kStopTag = kNumLabels + 1;
inline constexpr int kNumTags = kNumLabels + 2;

// log(0) sentinel; anything at or below the cutoff is treated as -inf and
// skipped by log-space accumulations.
inline constexpr double kNegInf = -1e30;
inline constexpr double kNegInfCutoff = -1e29;

constexpr int make_label(Part part, Category cat) {
  return 1 + 4 * static_cast<int>(cat) + static_cast<int>(part);
}
// Only valid for labels in [1, kNumLabels): O carries no category or part.
constexpr Category label_category(int label) { return static_cast<Category>((label - 1) / 4); }
constexpr Part label_part(int label) { return static_cast<Part>((label - 1) % 4); }

const std::string& label_name(int label);
const std::string& category_name(Category cat);
std::optional<int> parse_label(std::string_view name);
std::optional<Category> parse_category(std::string_view name);

// Hard IOBES structure: whether tag `to` may directly follow tag `from`.
bool legal_transition(int from, int to);

}  // namespace scitag
