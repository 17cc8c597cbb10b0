#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tvcp {

// Vocabulary-free tokenizer: lowercased words and single punctuation marks,
// hashed into a fixed number of buckets. Ids 0 and 1 are [CLS] and [SEP].
class HashTokenizer {
 public:
  static constexpr int kCls = 0;
  static constexpr int kSep = 1;
  static constexpr int kReserved = 2;

  explicit HashTokenizer(int buckets = 4096);

  std::vector<std::string> split(std::string_view text) const;
  std::vector<int> encode(std::string_view text) const;
  int id_of(std::string_view piece) const;
  int vocab_size() const noexcept { return buckets_ + kReserved; }
  int buckets() const noexcept { return buckets_; }

 private:
  int buckets_;
};

}  // namespace tvcp
