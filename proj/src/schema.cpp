#include "tvcp/schema.hpp"

#include <algorithm>
#include <cctype>

#include "tvcp/error.hpp"

namespace tvcp {
namespace {

constexpr std::array<std::string_view, kNumDurationClasses> kTokens = {
    "lt_1m", "1m_5m", "5m_15m", "15m_45m", "45m_2h", "2h_6h",
    "gt_6h", "1d_3d", "3d_7d",  "1w_4w",   "gt_1mo",
};

constexpr std::array<std::string_view, kNumDurationClasses> kDisplayNames = {
    "<1 minute",         "1-5 minutes", "5-15 minutes", "15-45 minutes",
    "45 minutes-2 hours", "2-6 hours",  "more than 6 hours", "1-3 days",
    "3-7 days",          "1-4 weeks",   "more than 1 month",
};

constexpr std::array<std::string_view, kNumTvcpLabels> kTvcpNames = {"DEC", "UNC", "INC"};
constexpr std::array<std::string_view, 3> kTnliNames = {"SUO", "INV", "UNK"};

}  // namespace

int class_index(std::string_view token) {
  auto it = std::find(kTokens.begin(), kTokens.end(), token);
  if (it == kTokens.end()) throw SchemaError("unknown duration token '" + std::string(token) + "'");
  return static_cast<int>(it - kTokens.begin());
}

DurationClass class_of(int index) {
  if (index < 0 || index >= kNumDurationClasses)
    throw SchemaError("duration class index out of range: " + std::to_string(index));
  return static_cast<DurationClass>(index);
}

DurationClass parse_duration(std::string_view token) { return class_of(class_index(token)); }

std::string_view token_of(DurationClass c) noexcept { return kTokens[index_of(c)]; }

std::string_view display_name(DurationClass c) noexcept { return kDisplayNames[index_of(c)]; }

double normalized_value(DurationClass c) noexcept {
  return static_cast<double>(index_of(c)) / static_cast<double>(kNumDurationClasses - 1);
}

int change_delta(DurationClass original, DurationClass updated) noexcept {
  return index_of(updated) - index_of(original);
}

TvcpLabel tvcp_label_of(int index) {
  if (index < 0 || index >= kNumTvcpLabels)
    throw SchemaError("TVCP label index out of range: " + std::to_string(index));
  return static_cast<TvcpLabel>(index);
}

std::string_view to_string(TvcpLabel l) noexcept { return kTvcpNames[index_of(l)]; }

TvcpLabel parse_tvcp_label(std::string_view s) {
  auto it = std::find(kTvcpNames.begin(), kTvcpNames.end(), s);
  if (it == kTvcpNames.end()) throw SchemaError("unknown TVCP label '" + std::string(s) + "'");
  return static_cast<TvcpLabel>(it - kTvcpNames.begin());
}

TvcpLabel derive_tvcp_label(DurationClass original, DurationClass updated) noexcept {
  if (updated < original) return TvcpLabel::kDec;
  if (updated > original) return TvcpLabel::kInc;
  return TvcpLabel::kUnc;
}

std::string_view to_string(TnliLabel l) noexcept { return kTnliNames[static_cast<int>(l)]; }

TnliLabel parse_tnli_label(std::string_view s) {
  auto it = std::find(kTnliNames.begin(), kTnliNames.end(), s);
  if (it == kTnliNames.end()) throw SchemaError("unknown TNLI label '" + std::string(s) + "'");
  return static_cast<TnliLabel>(it - kTnliNames.begin());
}

bool is_blank(std::string_view s) noexcept {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

StatementStamp StatementStamp::make(std::string text, std::optional<std::int64_t> created_at) {
  if (is_blank(text)) throw ContractError("statement text is empty");
  return StatementStamp{std::move(text), created_at};
}

}  // namespace tvcp
