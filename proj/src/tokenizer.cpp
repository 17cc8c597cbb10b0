#include "tvcp/tokenizer.hpp"

#include <cctype>

#include "tvcp/error.hpp"
#include "tvcp/util.hpp"

namespace tvcp {

HashTokenizer::HashTokenizer(int buckets) : buckets_(buckets) {
  if (buckets < 1) throw ContractError("tokenizer needs at least one bucket");
}

std::vector<std::string> HashTokenizer::split(std::string_view text) const {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '\'' || c >= 0x80) {
      cur += static_cast<char>(std::tolower(c));
    } else {
      flush();
      if (!std::isspace(c)) out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

int HashTokenizer::id_of(std::string_view piece) const {
  return kReserved + static_cast<int>(fnv1a64(piece) % static_cast<std::uint64_t>(buckets_));
}

std::vector<int> HashTokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& p : split(text)) ids.push_back(id_of(p));
  return ids;
}

}  // namespace tvcp
