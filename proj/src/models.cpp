#include "tvcp/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tvcp/error.hpp"
#include "tvcp/rng.hpp"
#include "tvcp/util.hpp"

namespace tvcp {

using nn::Matrix;
using nn::Var;
using json = nlohmann::ordered_json;

// --- configuration ----------------------------------------------------------

void EncoderConfig::validate() const {
  if (hidden < 1) throw ContractError("hidden size must be >= 1");
  if (max_length < 8) throw ContractError("max sequence length must be >= 8");
  if (layers < 0) throw ContractError("layer count must be >= 0");
  if (heads < 1 || hidden % heads != 0) throw ContractError("head count must divide the hidden size");
  if (vocab_buckets < 1) throw ContractError("vocab_buckets must be >= 1");
  if (pooling_position < 0 || pooling_position >= max_length)
    throw ContractError("pooling position outside the sequence");
  if (backend != "tiny-transformer")
    throw EncoderError("encoder backend '" + backend + "' is not available in this build");
}

void ModelConfig::validate() const {
  encoder.validate();
  if (dropout < 0.0 || dropout >= 1.0) throw ContractError("dropout must lie in [0, 1)");
  if (lambda_reg < 0.0 || lambda_span < 0.0) throw ContractError("loss weights must be non-negative");
  if (max_span_length < 1) throw ContractError("max span length must be >= 1");
}

std::string_view to_string(Archetype a) noexcept {
  switch (a) {
    case Archetype::kTransformer: return "transformer";
    case Archetype::kSiamese: return "siamese";
    case Archetype::kSelfExplain: return "selfexplain";
  }
  return "?";
}

Archetype parse_archetype(std::string_view s) {
  if (s == "transformer") return Archetype::kTransformer;
  if (s == "siamese") return Archetype::kSiamese;
  if (s == "selfexplain") return Archetype::kSelfExplain;
  throw ConfigError("unknown archetype '" + std::string(s) + "'");
}

std::string_view to_string(EncodingMode m) noexcept {
  return m == EncodingMode::kConcatenated ? "concatenated" : "separate";
}

EncodingMode mode_for(Archetype a) noexcept {
  return a == Archetype::kSiamese ? EncodingMode::kSeparate : EncodingMode::kConcatenated;
}

json to_json(const ModelConfig& c) {
  json j;
  j["archetype"] = std::string(to_string(c.archetype));
  j["hidden"] = c.encoder.hidden;
  j["layers"] = c.encoder.layers;
  j["heads"] = c.encoder.heads;
  j["ffn"] = c.encoder.ffn_size();
  j["max_length"] = c.encoder.max_length;
  j["vocab_buckets"] = c.encoder.vocab_buckets;
  j["freeze_embeddings"] = c.encoder.freeze_embeddings;
  j["pooling_position"] = c.encoder.pooling_position;
  j["backend"] = c.encoder.backend;
  j["multitask"] = c.multitask;
  j["dropout"] = c.dropout;
  j["lambda_reg"] = c.lambda_reg;
  j["lambda_span"] = c.lambda_span;
  j["max_span_length"] = c.max_span_length;
  j["init_seed"] = c.init_seed;
  return j;
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  try {
    if (j.contains("archetype")) c.archetype = parse_archetype(j.at("archetype").get<std::string>());
    c.encoder.hidden = j.value("hidden", c.encoder.hidden);
    c.encoder.layers = j.value("layers", c.encoder.layers);
    c.encoder.heads = j.value("heads", c.encoder.heads);
    c.encoder.ffn = j.value("ffn", c.encoder.ffn);
    c.encoder.max_length = j.value("max_length", c.encoder.max_length);
    c.encoder.vocab_buckets = j.value("vocab_buckets", c.encoder.vocab_buckets);
    c.encoder.freeze_embeddings = j.value("freeze_embeddings", c.encoder.freeze_embeddings);
    c.encoder.pooling_position = j.value("pooling_position", c.encoder.pooling_position);
    c.encoder.backend = j.value("backend", c.encoder.backend);
    c.multitask = j.value("multitask", c.multitask);
    c.dropout = j.value("dropout", c.dropout);
    c.lambda_reg = j.value("lambda_reg", c.lambda_reg);
    c.lambda_span = j.value("lambda_span", c.lambda_span);
    c.max_span_length = j.value("max_span_length", c.max_span_length);
    c.init_seed = j.value("init_seed", c.init_seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
  return c;
}

// --- outputs and losses -----------------------------------------------------

TvcpLabel ClassifierOutput::predicted() const noexcept {
  int best = 0;
  for (int i = 1; i < kNumTvcpLabels; ++i)
    if (logits[static_cast<std::size_t>(i)] > logits[static_cast<std::size_t>(best)]) best = i;
  return static_cast<TvcpLabel>(best);
}

LossBreakdown combined_loss(const ClassifierOutput& out, const GoldTargets& gold, double lambda_reg,
                            double lambda_span) {
  if (lambda_reg < 0 || lambda_span < 0) throw ContractError("loss weights must be non-negative");
  LossBreakdown b;
  b.lambda_reg = lambda_reg;
  b.lambda_span = lambda_span;
  const double mx = *std::max_element(out.logits.begin(), out.logits.end());
  double sum = 0.0;
  for (double z : out.logits) sum += std::exp(z - mx);
  b.cross_entropy = std::log(sum) + mx - out.logits[static_cast<std::size_t>(index_of(gold.label))];

  const bool has_heads = out.predicted_original.has_value() && out.predicted_updated.has_value();
  if (has_heads && (gold.original || gold.updated || lambda_reg > 0)) {
    if (!gold.original || !gold.updated)
      throw ContractError("gold durations are required when the regression loss is weighted");
    const double d1 = *out.predicted_original - normalized_value(*gold.original);
    const double d2 = *out.predicted_updated - normalized_value(*gold.updated);
    b.regression = d1 * d1 + d2 * d2;
  }
  if (out.span_attention)
    for (double a : *out.span_attention) b.span_sparsity += a * a;
  b.total = b.cross_entropy + lambda_reg * b.regression + lambda_span * b.span_sparsity;
  return b;
}

std::vector<double> siamese_features(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("siamese_features: vectors differ in length");
  const std::size_t h = a.size();
  std::vector<double> out(4 * h);
  for (std::size_t i = 0; i < h; ++i) {
    out[i] = a[i];
    out[h + i] = b[i];
    out[2 * h + i] = a[i] - b[i];
    out[3 * h + i] = a[i] * b[i];
  }
  return out;
}

Var siamese_features(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractError("siamese_features: vectors differ in length");
  return nn::concat_cols({a, b, nn::sub(a, b), nn::hadamard(a, b)});
}

// --- spans ------------------------------------------------------------------

std::vector<Span> enumerate_spans(int n, int max_length) {
  std::vector<Span> out;
  for (int b = 0; b < n; ++b)
    for (int len = 1; len <= max_length && b + len <= n; ++len) out.push_back({b, len});
  return out;
}

std::size_t span_count(int n, int max_length) {
  std::size_t c = 0;
  for (int i = 1; i <= n; ++i) c += static_cast<std::size_t>(std::min(max_length, n - i + 1));
  return c;
}

Matrix span_averaging_matrix(int n, int max_length) {
  const auto spans = enumerate_spans(n, max_length);
  Matrix m = Matrix::Zero(static_cast<nn::Index>(spans.size()), n);
  for (std::size_t k = 0; k < spans.size(); ++k)
    m.row(static_cast<nn::Index>(k)).segment(spans[k].begin, spans[k].length).setConstant(1.0 / spans[k].length);
  return m;
}

SpanAttention selfexplain_spans(nn::Graph& g, const std::vector<Var>& statement_states, int max_length,
                                Var score_weight) {
  if (max_length < 1) throw ContractError("max span length must be >= 1");
  if (statement_states.empty()) throw ContractError("selfexplain_spans needs at least one statement");
  SpanAttention out;
  std::vector<Var> reps;
  for (std::size_t s = 0; s < statement_states.size(); ++s) {
    const auto n = static_cast<int>(statement_states[s].rows());
    if (n < 1) throw ContractError("every statement needs at least one token state");
    reps.push_back(nn::matmul_const_left(span_averaging_matrix(n, max_length), statement_states[s]));
    for (const auto& sp : enumerate_spans(n, max_length)) out.spans.emplace_back(static_cast<int>(s), sp);
  }
  out.representations = reps.size() == 1 ? reps.front() : nn::concat_rows(reps);
  Var scores = nn::matmul_nt(nn::transpose(score_weight), out.representations);  // 1 x spans
  out.attention = nn::softmax_rows(scores);
  out.pooled = nn::matmul(out.attention, out.representations);
  out.sparsity = nn::sum_squares(out.attention);
  (void)g;
  return out;
}

SpanSummary selfexplain_spans(const std::vector<Matrix>& statement_states, int max_length,
                              const Eigen::VectorXd& score_weight) {
  nn::Graph g;
  std::vector<Var> states;
  for (const auto& m : statement_states) states.push_back(g.constant(m));
  auto r = selfexplain_spans(g, states, max_length, g.constant(Matrix(score_weight)));
  SpanSummary s;
  s.representations = r.representations.value();
  s.attention = r.attention.value().row(0).transpose();
  s.pooled = r.pooled.value().row(0).transpose();
  s.sparsity = r.sparsity.scalar();
  s.spans = std::move(r.spans);
  return s;
}

// --- model ------------------------------------------------------------------

namespace {

Matrix normal_matrix(Rng& rng, nn::Index rows, nn::Index cols, double stddev) {
  Matrix m(rows, cols);
  for (nn::Index i = 0; i < rows; ++i)
    for (nn::Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

Matrix xavier(Rng& rng, nn::Index fan_in, nn::Index fan_out) {
  return normal_matrix(rng, fan_in, fan_out, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)));
}

int hidden_width(const ModelConfig& c) {
  return c.archetype == Archetype::kSiamese ? 4 * c.encoder.hidden : c.encoder.hidden;
}

constexpr std::uint64_t kRegressionStream = 0x5245475245535353ULL;

}  // namespace

TvcpModel::TvcpModel(ModelConfig config) : config_(std::move(config)), tokenizer_(config_.encoder.vocab_buckets) {
  config_.validate();
  build_parameters();
}

void TvcpModel::build_parameters() {
  const auto& e = config_.encoder;
  const nn::Index h = e.hidden, f = e.ffn_size();
  Rng rng(config_.init_seed);
  params_.add("embed.token", normal_matrix(rng, tokenizer_.vocab_size(), h, 0.02), "embedding");
  params_.add("embed.position", normal_matrix(rng, e.max_length, h, 0.02), "embedding");
  params_.add("embed.segment", normal_matrix(rng, 2, h, 0.02), "embedding");
  params_.add("embed.ln.gain", Matrix::Ones(1, h), "embedding");
  params_.add("embed.ln.bias", Matrix::Zero(1, h), "embedding");
  for (int l = 0; l < e.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    for (const char* m : {"q", "k", "v", "o"}) {
      params_.add(p + "attn." + m + ".w", xavier(rng, h, h), "encoder");
      params_.add(p + "attn." + m + ".b", Matrix::Zero(1, h), "encoder");
    }
    params_.add(p + "ln1.gain", Matrix::Ones(1, h), "encoder");
    params_.add(p + "ln1.bias", Matrix::Zero(1, h), "encoder");
    params_.add(p + "ffn.in.w", xavier(rng, h, f), "encoder");
    params_.add(p + "ffn.in.b", Matrix::Zero(1, f), "encoder");
    params_.add(p + "ffn.out.w", xavier(rng, f, h), "encoder");
    params_.add(p + "ffn.out.b", Matrix::Zero(1, h), "encoder");
    params_.add(p + "ln2.gain", Matrix::Ones(1, h), "encoder");
    params_.add(p + "ln2.bias", Matrix::Zero(1, h), "encoder");
  }
  const nn::Index d = hidden_width(config_);
  if (config_.archetype == Archetype::kSelfExplain) params_.add("head.span.w", xavier(rng, h, 1), "head");
  params_.add("head.cls.w", xavier(rng, d, kNumTvcpLabels), "head");
  params_.add("head.cls.b", Matrix::Zero(1, kNumTvcpLabels), "head");
  // Separate stream, registered last: shared parameters are identical with and without these heads.
  if (config_.multitask) {
    Rng reg(mix_seed(config_.init_seed, kRegressionStream));
    params_.add("head.reg_original.w", xavier(reg, d, 1), "regression");
    params_.add("head.reg_original.b", Matrix::Zero(1, 1), "regression");
    params_.add("head.reg_updated.w", xavier(reg, d, 1), "regression");
    params_.add("head.reg_updated.b", Matrix::Zero(1, 1), "regression");
  }
  if (e.freeze_embeddings) params_.set_trainable("embedding", false);
}

std::size_t TvcpModel::pid(const std::string& name) const {
  auto i = params_.find(name);
  if (!i) throw ContractError("model has no parameter '" + name + "'");
  return *i;
}

TokenizedPair TvcpModel::tokenize(std::string_view target, std::string_view followup) const {
  return tokenize(target, followup, mode_for(config_.archetype));
}

TokenizedPair TvcpModel::tokenize(std::string_view target, std::string_view followup, EncodingMode mode) const {
  if (is_blank(target) || is_blank(followup)) throw ContractError("statement texts must be non-empty");
  auto t = tokenizer_.encode(target);
  auto f = tokenizer_.encode(followup);
  if (t.empty() || f.empty()) throw ContractError("statement produced no tokens");
  TokenizedPair out;
  out.mode = mode;
  const auto max_len = static_cast<std::size_t>(config_.encoder.max_length);
  if (mode == EncodingMode::kConcatenated) {
    // Longest-first truncation.
    while (t.size() + f.size() + 3 > max_len) {
      out.truncated = true;
      (t.size() >= f.size() ? t : f).pop_back();
    }
    out.ids.push_back(HashTokenizer::kCls);
    out.ids.insert(out.ids.end(), t.begin(), t.end());
    out.ids.push_back(HashTokenizer::kSep);
    out.ids.insert(out.ids.end(), f.begin(), f.end());
    out.ids.push_back(HashTokenizer::kSep);
    out.segments.assign(out.ids.size(), 0);
    std::fill(out.segments.begin() + static_cast<long>(t.size() + 2), out.segments.end(), 1);
    out.target_range = {1, static_cast<int>(1 + t.size())};
    out.followup_range = {static_cast<int>(t.size() + 2), static_cast<int>(t.size() + 2 + f.size())};
  } else {
    if (t.size() + 2 > max_len) {
      t.resize(max_len - 2);
      out.truncated = true;
    }
    if (f.size() + 2 > max_len) {
      f.resize(max_len - 2);
      out.truncated = true;
    }
    out.ids.push_back(HashTokenizer::kCls);
    out.ids.insert(out.ids.end(), t.begin(), t.end());
    out.ids.push_back(HashTokenizer::kSep);
    out.segments.assign(out.ids.size(), 0);
    out.followup_ids.push_back(HashTokenizer::kCls);
    out.followup_ids.insert(out.followup_ids.end(), f.begin(), f.end());
    out.followup_ids.push_back(HashTokenizer::kSep);
    out.target_range = {1, static_cast<int>(1 + t.size())};
    out.followup_range = {1, static_cast<int>(1 + f.size())};
  }
  return out;
}

Var TvcpModel::encode_sequence(nn::Graph& g, std::span<const int> ids, std::span<const int> segments) const {
  const auto& e = config_.encoder;
  const auto n = static_cast<nn::Index>(ids.size());
  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);

  Var x = nn::add(nn::add(g.embedding(pid("embed.token"), ids), g.embedding(pid("embed.position"), positions)),
                  g.embedding(pid("embed.segment"), segments));
  x = nn::layer_norm(x, g.param(pid("embed.ln.gain")), g.param(pid("embed.ln.bias")));

  const int dh = e.hidden / e.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int l = 0; l < e.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    auto linear = [&](Var in, const std::string& name) {
      return nn::add_row(nn::matmul(in, g.param(pid(p + name + ".w"))), g.param(pid(p + name + ".b")));
    };
    Var q = linear(x, "attn.q"), k = linear(x, "attn.k"), v = linear(x, "attn.v");
    std::vector<Var> heads;
    for (int hd = 0; hd < e.heads; ++hd) {
      Var qh = e.heads == 1 ? q : nn::slice_cols(q, hd * dh, dh);
      Var kh = e.heads == 1 ? k : nn::slice_cols(k, hd * dh, dh);
      Var vh = e.heads == 1 ? v : nn::slice_cols(v, hd * dh, dh);
      Var att = nn::softmax_rows(nn::scale(nn::matmul_nt(qh, kh), inv_sqrt));
      heads.push_back(nn::matmul(att, vh));
    }
    Var attn = linear(heads.size() == 1 ? heads.front() : nn::concat_cols(heads), "attn.o");
    x = nn::layer_norm(nn::add(x, attn), g.param(pid(p + "ln1.gain")), g.param(pid(p + "ln1.bias")));
    Var ff = linear(nn::gelu(linear(x, "ffn.in")), "ffn.out");
    x = nn::layer_norm(nn::add(x, ff), g.param(pid(p + "ln2.gain")), g.param(pid(p + "ln2.bias")));
  }
  (void)n;
  return x;
}

EncodedPair TvcpModel::encode(std::string_view target, std::string_view followup, EncodingMode mode) const {
  const auto tp = tokenize(target, followup, mode);
  nn::Graph g(&params_);
  EncodedPair out;
  out.mode = mode;
  out.truncated = tp.truncated;
  const auto pos = config_.encoder.pooling_position;
  Var states = encode_sequence(g, tp.ids, tp.segments);
  const auto& sv = states.value();
  auto pool = [&](const Matrix& m) -> Eigen::VectorXd { return m.row(std::min<nn::Index>(pos, m.rows() - 1)).transpose(); };
  out.target_states = sv.middleRows(tp.target_range.first, tp.target_range.second - tp.target_range.first);
  if (mode == EncodingMode::kConcatenated) {
    out.pooled_target = pool(sv);
    out.pooled_followup = out.pooled_target;
    out.followup_states = sv.middleRows(tp.followup_range.first, tp.followup_range.second - tp.followup_range.first);
  } else {
    std::vector<int> seg(tp.followup_ids.size(), 0);
    Var fstates = encode_sequence(g, tp.followup_ids, seg);
    const auto& fv = fstates.value();
    out.pooled_target = pool(sv);
    out.pooled_followup = pool(fv);
    out.followup_states = fv.middleRows(tp.followup_range.first, tp.followup_range.second - tp.followup_range.first);
  }
  return out;
}

TvcpModel::Forward TvcpModel::forward(nn::Graph& g, const TokenizedPair& pair,
                                      std::optional<std::uint64_t> dropout_seed) const {
  if (pair.mode != mode_for(config_.archetype))
    throw ContractError(std::string("archetype '") + std::string(to_string(config_.archetype)) +
                        "' needs " + std::string(to_string(mode_for(config_.archetype))) + " encoding");
  Forward fwd;
  Var states = encode_sequence(g, pair.ids, pair.segments);
  const auto pool = [&](Var s) {
    return nn::slice_rows(s, std::min<nn::Index>(config_.encoder.pooling_position, s.rows() - 1), 1);
  };
  switch (config_.archetype) {
    case Archetype::kTransformer:
      fwd.hidden = pool(states);
      break;
    case Archetype::kSiamese: {
      std::vector<int> seg(pair.followup_ids.size(), 0);
      Var fstates = encode_sequence(g, pair.followup_ids, seg);
      fwd.hidden = siamese_features(pool(states), pool(fstates));
      break;
    }
    case Archetype::kSelfExplain: {
      const auto& [tb, te] = pair.target_range;
      const auto& [fb, fe] = pair.followup_range;
      auto spans = selfexplain_spans(g, {nn::slice_rows(states, tb, te - tb), nn::slice_rows(states, fb, fe - fb)},
                                     config_.max_span_length, g.param(pid("head.span.w")));
      fwd.hidden = spans.pooled;
      fwd.attention = spans.attention;
      fwd.sparsity = spans.sparsity;
      break;
    }
  }

  Var h = fwd.hidden;
  if (dropout_seed && config_.dropout > 0.0) {
    Rng rng(*dropout_seed);
    const double keep = 1.0 - config_.dropout;
    Matrix m(h.rows(), h.cols());
    for (nn::Index i = 0; i < m.size(); ++i) m(i) = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    h = nn::mask(h, m);
  }
  fwd.logits = nn::add_row(nn::matmul(h, g.param(pid("head.cls.w"))), g.param(pid("head.cls.b")));
  if (config_.multitask) {
    fwd.predicted_original =
        nn::add_row(nn::matmul(h, g.param(pid("head.reg_original.w"))), g.param(pid("head.reg_original.b")));
    fwd.predicted_updated =
        nn::add_row(nn::matmul(h, g.param(pid("head.reg_updated.w"))), g.param(pid("head.reg_updated.b")));
  }
  return fwd;
}

TvcpModel::Loss TvcpModel::loss(nn::Graph& g, const Forward& fwd, const GoldTargets& gold) const {
  (void)g;
  Loss out;
  auto& b = out.breakdown;
  b.lambda_reg = config_.lambda_reg;
  b.lambda_span = config_.lambda_span;
  Var ce = nn::cross_entropy(fwd.logits, index_of(gold.label));
  b.cross_entropy = ce.scalar();
  out.total = ce;
  if (fwd.predicted_original && fwd.predicted_updated && (config_.lambda_reg > 0 || gold.original || gold.updated)) {
    if (!gold.original || !gold.updated)
      throw ContractError("gold durations are required when the regression loss is weighted");
    Var reg = nn::add(nn::squared_error(*fwd.predicted_original, normalized_value(*gold.original)),
                      nn::squared_error(*fwd.predicted_updated, normalized_value(*gold.updated)));
    b.regression = reg.scalar();
    // Leave the term out of the graph at zero weight so no gradient path exists.
    if (config_.lambda_reg > 0) out.total = nn::add(out.total, nn::scale(reg, config_.lambda_reg));
  }
  if (fwd.sparsity) {
    b.span_sparsity = fwd.sparsity->scalar();
    if (config_.lambda_span > 0) out.total = nn::add(out.total, nn::scale(*fwd.sparsity, config_.lambda_span));
  }
  b.total = b.cross_entropy + b.lambda_reg * b.regression + b.lambda_span * b.span_sparsity;
  return out;
}

ClassifierOutput to_output(const TvcpModel::Forward& fwd) {
  ClassifierOutput out;
  const auto& z = fwd.logits.value();
  for (int i = 0; i < kNumTvcpLabels; ++i) out.logits[static_cast<std::size_t>(i)] = z(0, i);
  if (fwd.predicted_original) out.predicted_original = fwd.predicted_original->scalar();
  if (fwd.predicted_updated) out.predicted_updated = fwd.predicted_updated->scalar();
  if (fwd.attention) {
    const auto& a = fwd.attention->value();
    out.span_attention = std::vector<double>(a.data(), a.data() + a.size());
  }
  return out;
}

ClassifierOutput TvcpModel::predict(const TokenizedPair& pair) const {
  nn::Graph g(&params_);
  return to_output(forward(g, pair, std::nullopt));
}

ClassifierOutput TvcpModel::predict(std::string_view target, std::string_view followup) const {
  return predict(tokenize(target, followup));
}

// --- checkpoints ------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'T', 'V', 'C', 'P', 'C', 'K', 'P', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw IoError("checkpoint truncated");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (1u << 24)) throw IoError("checkpoint string too long");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw IoError("checkpoint truncated");
  return s;
}

}  // namespace

void TvcpModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint '" + path.string() + "'");
  os.write(kMagic, sizeof kMagic);
  put_string(os, to_json(config_).dump());
  put<std::uint64_t>(os, params_.size());
  for (const auto& p : params_) {
    put_string(os, p.name);
    put<std::int64_t>(os, p.value.rows());
    put<std::int64_t>(os, p.value.cols());
    os.write(reinterpret_cast<const char*>(p.value.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
  }
  if (!os) throw IoError("write to checkpoint '" + path.string() + "' failed");
}

TvcpModel TvcpModel::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw IoError("'" + path.string() + "' is not a model checkpoint");
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(json::parse(get_string(is)));
  } catch (const json::exception& e) {
    throw IoError("checkpoint config unreadable: " + std::string(e.what()));
  }
  TvcpModel model(cfg);
  const auto count = get<std::uint64_t>(is);
  if (count != model.params_.size()) throw IoError("checkpoint parameter count does not match its config");
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name = get_string(is);
    auto& p = model.params_[model.pid(name)];
    const auto rows = get<std::int64_t>(is), cols = get<std::int64_t>(is);
    if (rows != p.value.rows() || cols != p.value.cols()) throw IoError("checkpoint shape mismatch for '" + name + "'");
    is.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
    if (!is) throw IoError("checkpoint truncated");
  }
  return model;
}

}  // namespace tvcp
