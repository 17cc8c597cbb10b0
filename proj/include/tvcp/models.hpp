#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tvcp/nn/graph.hpp"
#include "tvcp/schema.hpp"
#include "tvcp/tokenizer.hpp"

namespace tvcp {

struct EncoderConfig {
  int hidden = 768;
  int layers = 2;
  int heads = 4;
  int ffn = 0;  // 0 means 4 * hidden
  int max_length = 128;
  int vocab_buckets = 4096;
  bool freeze_embeddings = false;
  int pooling_position = 0;
  std::string backend = "tiny-transformer";

  int ffn_size() const noexcept { return ffn > 0 ? ffn : 4 * hidden; }
  void validate() const;  // throws ContractError
};

enum class Archetype { kTransformer, kSiamese, kSelfExplain };
enum class EncodingMode { kConcatenated, kSeparate };

std::string_view to_string(Archetype a) noexcept;
Archetype parse_archetype(std::string_view s);
std::string_view to_string(EncodingMode m) noexcept;
EncodingMode mode_for(Archetype a) noexcept;

struct ModelConfig {
  Archetype archetype = Archetype::kTransformer;
  EncoderConfig encoder;
  bool multitask = false;
  double dropout = 0.1;
  double lambda_reg = 1.0;
  double lambda_span = 0.01;
  int max_span_length = 5;
  std::uint64_t init_seed = 0;

  void validate() const;
};

nlohmann::ordered_json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::ordered_json& j, ModelConfig base = {});

// Token ids ready for the encoder. Concatenated mode holds one joint sequence
// "[CLS] target [SEP] follow-up [SEP]"; separate mode holds two "[CLS] x [SEP]".
struct TokenizedPair {
  EncodingMode mode = EncodingMode::kConcatenated;
  std::vector<int> ids;
  std::vector<int> segments;
  std::vector<int> followup_ids;  // separate mode only
  std::pair<int, int> target_range{0, 0};    // [begin, end) within ids
  std::pair<int, int> followup_range{0, 0};  // within ids (concatenated) or followup_ids (separate)
  bool truncated = false;
};

struct EncodedPair {
  EncodingMode mode = EncodingMode::kConcatenated;
  Eigen::VectorXd pooled_target;
  Eigen::VectorXd pooled_followup;
  nn::Matrix target_states;    // one row per target token
  nn::Matrix followup_states;  // one row per follow-up token
  bool truncated = false;
};

struct ClassifierOutput {
  std::array<double, 3> logits{};  // DEC, UNC, INC
  std::optional<double> predicted_original;
  std::optional<double> predicted_updated;
  std::optional<std::vector<double>> span_attention;

  // Argmax; ties resolve to the lower class index.
  TvcpLabel predicted() const noexcept;
};

struct GoldTargets {
  TvcpLabel label = TvcpLabel::kUnc;
  std::optional<DurationClass> original;
  std::optional<DurationClass> updated;
};

struct LossBreakdown {
  double cross_entropy = 0.0;
  double regression = 0.0;
  double span_sparsity = 0.0;
  double lambda_reg = 0.0;
  double lambda_span = 0.0;
  double total = 0.0;
};

// total = CE + lambda_reg * regression + lambda_span * sparsity.
// Throws ContractError when lambda_reg > 0, duration predictions are present
// and gold durations are missing.
LossBreakdown combined_loss(const ClassifierOutput& out, const GoldTargets& gold, double lambda_reg,
                            double lambda_span);

// [a, b, a - b, a * b]
std::vector<double> siamese_features(std::span<const double> target, std::span<const double> followup);
nn::Var siamese_features(nn::Var target, nn::Var followup);

// --- span attention ---------------------------------------------------------

struct Span {
  int begin = 0;
  int length = 0;
};

// All contiguous spans of length <= max_length over n tokens, ordered by start then length.
std::vector<Span> enumerate_spans(int n, int max_length);
std::size_t span_count(int n, int max_length);
// Row k averages the token states covered by span k.
nn::Matrix span_averaging_matrix(int n, int max_length);

struct SpanAttention {
  nn::Var representations;  // spans x H
  nn::Var attention;        // 1 x spans
  nn::Var pooled;           // 1 x H
  nn::Var sparsity;         // 1 x 1, sum of squared attention weights
  std::vector<std::pair<int, Span>> spans;  // (statement index, span)
};

// Spans never cross statements; one softmax runs over the spans of all statements.
SpanAttention selfexplain_spans(nn::Graph& g, const std::vector<nn::Var>& statement_states, int max_length,
                                nn::Var score_weight);

struct SpanSummary {
  nn::Matrix representations;
  Eigen::VectorXd attention;
  Eigen::VectorXd pooled;
  double sparsity = 0.0;
  std::vector<std::pair<int, Span>> spans;
};
SpanSummary selfexplain_spans(const std::vector<nn::Matrix>& statement_states, int max_length,
                              const Eigen::VectorXd& score_weight);

// --- model ------------------------------------------------------------------

class TvcpModel {
 public:
  explicit TvcpModel(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  nn::ParameterSet& parameters() noexcept { return params_; }
  const nn::ParameterSet& parameters() const noexcept { return params_; }
  const HashTokenizer& tokenizer() const noexcept { return tokenizer_; }

  TokenizedPair tokenize(std::string_view target, std::string_view followup) const;
  TokenizedPair tokenize(std::string_view target, std::string_view followup, EncodingMode mode) const;

  EncodedPair encode(std::string_view target, std::string_view followup, EncodingMode mode) const;

  struct Forward {
    nn::Var hidden;
    nn::Var logits;
    std::optional<nn::Var> predicted_original;
    std::optional<nn::Var> predicted_updated;
    std::optional<nn::Var> attention;
    std::optional<nn::Var> sparsity;
  };
  // dropout_seed == nullopt runs in evaluation mode.
  Forward forward(nn::Graph& g, const TokenizedPair& pair, std::optional<std::uint64_t> dropout_seed) const;

  struct Loss {
    nn::Var total;
    LossBreakdown breakdown;
  };
  Loss loss(nn::Graph& g, const Forward& fwd, const GoldTargets& gold) const;

  ClassifierOutput predict(const TokenizedPair& pair) const;
  ClassifierOutput predict(std::string_view target, std::string_view followup) const;

  void save(const std::filesystem::path& path) const;
  static TvcpModel load(const std::filesystem::path& path);

 private:
  nn::Var encode_sequence(nn::Graph& g, std::span<const int> ids, std::span<const int> segments) const;
  std::size_t pid(const std::string& name) const;
  void build_parameters();

  ModelConfig config_;
  HashTokenizer tokenizer_;
  nn::ParameterSet params_;
};

ClassifierOutput to_output(const TvcpModel::Forward& fwd);

}  // namespace tvcp
