#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lac/ctc.hpp"
#include "lac/decoder.hpp"
#include "lac/encoder.hpp"
#include "lac/frontend.hpp"

namespace lac {

// Reserved vocabulary ids. The CTC blank gets its own reserved slot after the
// three special symbols.
constexpr int kPadId = 0;
constexpr int kUnkId = 1;
constexpr int kEosId = 2;
constexpr int kBlankId = 3;
constexpr int kReservedTokens = 4;

enum class Variant { LAC, Conformer, LacFfn, LacMhsa };

// Canonical config-file spellings: lac, conformer, lac-ffn, lac-mhsa.
const char* variant_name(Variant v);
// Report spellings: LAC, Conformer, -LFFN+FFN, -MHLSA+MHSA.
const char* variant_display(Variant v);
std::optional<Variant> parse_variant(const std::string& name);

struct ModelConfig {
  int n_enc = 12;
  int n_dec = 6;
  int heads = 4;
  int d_model = 256;
  int d_ff = 2048;
  int d_bn = 100;
  int k_conv = 15;
  int vocab = 4231;
  int conv_channels = 256;
  int n_mels = 80;
  double dropout = 0.1;
  bool prenorm = true;
  Variant variant = Variant::LAC;
  double ctc_train_weight = 0.3;
  double ctc_decode_weight = 0.6;

  bool uses_linear_attention() const {
    return variant == Variant::LAC || variant == Variant::LacFfn;
  }
  bool uses_low_rank_ffn() const {
    return variant == Variant::LAC || variant == Variant::LacMhsa;
  }
  CtcConfig ctc() const { return {kBlankId, ctc_train_weight, ctc_decode_weight}; }

  // Throws one error listing every violated constraint.
  void validate() const;

  // Stable one-key-per-line "key = value" text; parse_text inverts it.
  std::string canonical_text() const;
  static ModelConfig parse_text(const std::string& text);
  static ModelConfig load_file(const std::string& path);
};

struct Model {
  ModelConfig cfg;
  FrontendParams frontend_p;
  std::vector<BlockParams> encoder;
  std::vector<DecoderBlockParams> decoder;
  TokenEmbedding embedding;
  Tensor dec_final_ln_gain, dec_final_ln_bias;
  Tensor ctc_proj;  // [d_m x V]

  // Deterministic: identical (cfg, seed) gives bit-identical parameters.
  static Model build(const ModelConfig& cfg, std::uint64_t seed);

  Tensor encode(const Tensor& feats, const Runtime& rt = {}) const;

  // Teacher-forced scoring: embeds the given ids, runs the decoder stack over
  // the encoder output, returns per-position log-softmax scores [T_y x V].
  Tensor decode_logits(const std::vector<int>& tokens, const Tensor& enc,
                       const Runtime& rt = {}) const;

  struct ForwardResult {
    Tensor att_nll;  // scalar
    Tensor ctc_nll;  // scalar
    Tensor joint;    // scalar
  };
  // tokens are the reference sequence (no EOS); EOS handling is internal.
  ForwardResult forward(const Tensor& feats, const std::vector<int>& tokens,
                        const Runtime& rt = {}) const;

  // Canonical parameter walk (fixed order, stable names).
  void for_each_param(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each_param(
      const std::function<void(const std::string&, const Tensor&)>& fn) const;

  struct ParamCount {
    std::int64_t total = 0;
    std::vector<std::pair<std::string, std::int64_t>> by_section;
  };
  ParamCount count_params() const;

  // Checkpoint: magic "LACC", u32 version, length-prefixed canonical config
  // text, then per-parameter records (name, rank, dims, f64 payload).
  void save(const std::string& path) const;
  static Model load(const std::string& path);
};

constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace lac
