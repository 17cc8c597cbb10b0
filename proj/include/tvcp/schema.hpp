#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace tvcp {

inline constexpr int kNumDurationClasses = 11;

// Logarithmic validity-duration scale. Enumerator order is the total order.
enum class DurationClass : std::uint8_t {
  kUnder1Min = 0,
  k1To5Min,
  k5To15Min,
  k15To45Min,
  k45MinTo2h,
  k2To6h,
  kOver6h,
  k1To3Days,
  k3To7Days,
  k1To4Weeks,
  kOver1Month,
};

inline constexpr std::array<DurationClass, kNumDurationClasses> kAllDurationClasses = {
    DurationClass::kUnder1Min,  DurationClass::k1To5Min,   DurationClass::k5To15Min,
    DurationClass::k15To45Min,  DurationClass::k45MinTo2h, DurationClass::k2To6h,
    DurationClass::kOver6h,     DurationClass::k1To3Days,  DurationClass::k3To7Days,
    DurationClass::k1To4Weeks,  DurationClass::kOver1Month,
};

constexpr int index_of(DurationClass c) noexcept { return static_cast<int>(c); }

// Throws SchemaError for an unknown token.
int class_index(std::string_view token);
// Throws SchemaError when index is outside [0, 10].
DurationClass class_of(int index);
DurationClass parse_duration(std::string_view token);
std::string_view token_of(DurationClass c) noexcept;
std::string_view display_name(DurationClass c) noexcept;

// index / 10, the regression target for the auxiliary duration heads.
double normalized_value(DurationClass c) noexcept;

// Signed class distance, updated minus original.
int change_delta(DurationClass original, DurationClass updated) noexcept;

enum class TvcpLabel : std::uint8_t { kDec = 0, kUnc = 1, kInc = 2 };

inline constexpr int kNumTvcpLabels = 3;
inline constexpr std::array<TvcpLabel, kNumTvcpLabels> kAllTvcpLabels = {
    TvcpLabel::kDec, TvcpLabel::kUnc, TvcpLabel::kInc};

constexpr int index_of(TvcpLabel l) noexcept { return static_cast<int>(l); }
TvcpLabel tvcp_label_of(int index);
std::string_view to_string(TvcpLabel l) noexcept;
TvcpLabel parse_tvcp_label(std::string_view s);

TvcpLabel derive_tvcp_label(DurationClass original, DurationClass updated) noexcept;

// Temporal NLI vocabulary. Nothing in this library consumes it.
enum class TnliLabel : std::uint8_t { kSupported = 0, kInvalidated, kUnknown };
std::string_view to_string(TnliLabel l) noexcept;
TnliLabel parse_tnli_label(std::string_view s);

struct StatementStamp {
  std::string text;
  std::optional<std::int64_t> created_at;  // unix seconds

  // Throws ContractError when the text is blank.
  static StatementStamp make(std::string text, std::optional<std::int64_t> created_at = {});
};

bool is_blank(std::string_view s) noexcept;

}  // namespace tvcp
