#include "scitag/labels.hpp"

#include <array>

#include "scitag/util.hpp"

namespace scitag {

namespace {

const std::array<std::string, kNumTags> kLabelNames = {
    "O",
    "B-Task",     "I-Task",     "E-Task",     "S-Task",
    "B-Process",  "I-Process",  "E-Process",  "S-Process",
    "B-Material", "I-Material", "E-Material", "S-Material",
    "<START>",    "<STOP>",
};

const std::array<std::string, kNumCategories> kCategoryNames = {"Task", "Process", "Material"};

}  // namespace

const std::string& label_name(int label) {
  require(label >= 0 && label < kNumTags, "label_name: index out of range");
  return kLabelNames[static_cast<std::size_t>(label)];
}

const std::string& category_name(Category cat) {
  return kCategoryNames[static_cast<std::size_t>(cat)];
}

std::optional<int> parse_label(std::string_view name) {
  for (int i = 0; i < kNumLabels; ++i) {
    if (kLabelNames[static_cast<std::size_t>(i)] == name) return i;
  }
  return std::nullopt;
}

std::optional<Category> parse_category(std::string_view name) {
  for (int c = 0; c < kNumCategories; ++c) {
    if (kCategoryNames[static_cast<std::size_t>(c)] == name) return static_cast<Category>(c);
  }
  return std::nullopt;
}

bool legal_transition(int from, int to) {
  if (from == kStopTag || to == kStartTag) return false;
  if (from == kStartTag) {
    if (to == kStopTag) return true;  // empty sentence
    return to == kOutside || label_part(to) == Part::B || label_part(to) == Part::S;
  }
  // `from` is a real label; B and I leave a bracket open.
  const bool open = from != kOutside &&
                    (label_part(from) == Part::B || label_part(from) == Part::I);
  if (to == kStopTag) return !open;
  if (open) {
    return to != kOutside && label_category(to) == label_category(from) &&
           (label_part(to) == Part::I || label_part(to) == Part::E);
  }
  return to == kOutside || label_part(to) == Part::B || label_part(to) == Part::S;
}

}  // namespace scitag
