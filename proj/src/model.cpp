#include "lac/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lac {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::LAC: return "lac";
    case Variant::Conformer: return "conformer";
    case Variant::LacFfn: return "lac-ffn";
    case Variant::LacMhsa: return "lac-mhsa";
  }
  return "?";
}

const char* variant_display(Variant v) {
  switch (v) {
    case Variant::LAC: return "LAC";
    case Variant::Conformer: return "Conformer";
    case Variant::LacFfn: return "-LFFN+FFN";
    case Variant::LacMhsa: return "-MHLSA+MHSA";
  }
  return "?";
}

std::optional<Variant> parse_variant(const std::string& name) {
  if (name == "lac") return Variant::LAC;
  if (name == "conformer") return Variant::Conformer;
  if (name == "lac-ffn") return Variant::LacFfn;
  if (name == "lac-mhsa") return Variant::LacMhsa;
  return std::nullopt;
}

void ModelConfig::validate() const {
  std::vector<std::string> faults;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) faults.push_back(msg);
  };
  need(n_enc >= 1, "n_enc must be >= 1");
  need(n_dec >= 0, "n_dec must be >= 0");
  need(heads >= 1, "heads must be >= 1");
  need(d_model >= 2, "d_model must be >= 2");
  need(d_model % 2 == 0, "d_model must be even (positional encoding)");
  need(heads >= 1 && d_model % std::max(heads, 1) == 0, "d_model must be divisible by heads");
  need(d_ff >= 1, "d_ff must be >= 1");
  need(k_conv >= 1 && k_conv % 2 == 1, "k_conv must be odd and >= 1");
  need(vocab > kReservedTokens, "vocab must exceed the 4 reserved token ids");
  need(conv_channels >= 1, "conv_channels must be >= 1");
  need(n_mels >= kMinInputFrames, "n_mels too small for the frontend convolutions");
  need(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  need(ctc_train_weight >= 0.0 && ctc_train_weight <= 1.0,
       "ctc_train_weight must lie in [0, 1]");
  need(ctc_decode_weight >= 0.0 && ctc_decode_weight <= 1.0,
       "ctc_decode_weight must lie in [0, 1]");
  if (uses_low_rank_ffn()) {
    need(d_bn >= 1, "d_bn must be >= 1");
    need(d_bn < d_model && d_bn < d_ff,
         "d_bn must be smaller than both d_model and d_ff (no compression otherwise)");
  }
  if (!faults.empty()) {
    std::string msg = "ModelConfig: invalid configuration:";
    for (const auto& f : faults) msg += "\n  - " + f;
    throw std::invalid_argument(msg);
  }
}

std::string ModelConfig::canonical_text() const {
  std::ostringstream os;
  os << "n_enc = " << n_enc << "\n";
  os << "n_dec = " << n_dec << "\n";
  os << "heads = " << heads << "\n";
  os << "d_model = " << d_model << "\n";
  os << "d_ff = " << d_ff << "\n";
  os << "d_bn = " << d_bn << "\n";
  os << "k_conv = " << k_conv << "\n";
  os << "vocab = " << vocab << "\n";
  os << "conv_channels = " << conv_channels << "\n";
  os << "n_mels = " << n_mels << "\n";
  os << "dropout = " << dropout << "\n";
  os << "prenorm = " << (prenorm ? "true" : "false") << "\n";
  os << "variant = " << variant_name(variant) << "\n";
  os << "ctc_train_weight = " << ctc_train_weight << "\n";
  os << "ctc_decode_weight = " << ctc_decode_weight << "\n";
  return os.str();
}

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}
}  // namespace

ModelConfig ModelConfig::parse_text(const std::string& text) {
  ModelConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "n_enc") cfg.n_enc = std::stoi(value);
      else if (key == "n_dec") cfg.n_dec = std::stoi(value);
      else if (key == "heads") cfg.heads = std::stoi(value);
      else if (key == "d_model") cfg.d_model = std::stoi(value);
      else if (key == "d_ff") cfg.d_ff = std::stoi(value);
      else if (key == "d_bn") cfg.d_bn = std::stoi(value);
      else if (key == "k_conv") cfg.k_conv = std::stoi(value);
      else if (key == "vocab") cfg.vocab = std::stoi(value);
      else if (key == "conv_channels") cfg.conv_channels = std::stoi(value);
      else if (key == "n_mels") cfg.n_mels = std::stoi(value);
      else if (key == "dropout") cfg.dropout = std::stod(value);
      else if (key == "prenorm") {
        if (value == "true") cfg.prenorm = true;
        else if (value == "false") cfg.prenorm = false;
        else throw std::invalid_argument("expected true/false");
      } else if (key == "variant") {
        const auto v = parse_variant(value);
        if (!v)
          throw std::invalid_argument("unknown variant (use lac, conformer, lac-ffn, lac-mhsa)");
        cfg.variant = *v;
      } else if (key == "ctc_train_weight") cfg.ctc_train_weight = std::stod(value);
      else if (key == "ctc_decode_weight") cfg.ctc_decode_weight = std::stod(value);
      else throw std::invalid_argument("unknown key");
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) + ": key '" +
                                  key + "': " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_text(buf.str());
}

Model Model::build(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Model m;
  m.cfg = cfg;
  m.frontend_p = FrontendParams::init(cfg.conv_channels, cfg.n_mels, cfg.d_model, rng);
  m.encoder.reserve(cfg.n_enc);
  for (int i = 0; i < cfg.n_enc; ++i)
    m.encoder.push_back(BlockParams::init(cfg.d_model, cfg.d_ff, cfg.d_bn, cfg.heads,
                                          cfg.k_conv, cfg.uses_linear_attention(),
                                          cfg.uses_low_rank_ffn(), cfg.prenorm, rng));
  m.decoder.reserve(cfg.n_dec);
  for (int i = 0; i < cfg.n_dec; ++i)
    m.decoder.push_back(DecoderBlockParams::init(cfg.d_model, cfg.d_ff, cfg.d_bn, cfg.heads,
                                                 cfg.uses_low_rank_ffn(), cfg.prenorm, rng));
  m.embedding = TokenEmbedding::init(cfg.vocab, cfg.d_model, rng);
  m.dec_final_ln_gain = Tensor::full({cfg.d_model}, 1.0);
  m.dec_final_ln_bias = Tensor::zeros({cfg.d_model});
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  m.ctc_proj = Tensor::uniform({cfg.d_model, cfg.vocab}, rng, -s, s);
  return m;
}

Tensor Model::encode(const Tensor& feats, const Runtime& rt) const {
  Tensor h = frontend(feats, frontend_p, rt);
  for (const BlockParams& block : encoder) h = encoder_block(h, block, rt);
  return h;
}

Tensor Model::decode_logits(const std::vector<int>& tokens, const Tensor& enc,
                            const Runtime& rt) const {
  if (tokens.empty()) throw std::invalid_argument("decode_logits: empty token sequence");
  for (int id : tokens)
    if (id < 0 || id >= cfg.vocab)
      throw std::invalid_argument("decode_logits: token id " + std::to_string(id) +
                                  " out of range for vocabulary of " +
                                  std::to_string(cfg.vocab));
  Tensor h = embed_rows(embedding.table, tokens);
  h = add(h, positional_encoding(static_cast<int>(tokens.size()), cfg.d_model));
  if (rt.training) h = dropout(h, rt.dropout_rate, rt.rng_ref());
  for (const DecoderBlockParams& block : decoder) h = decoder_block(h, enc, block, rt);
  h = layernorm(h, dec_final_ln_gain, dec_final_ln_bias);
  return log_softmax_rows(matmul(h, embedding.out_proj));
}

Model::ForwardResult Model::forward(const Tensor& feats, const std::vector<int>& tokens,
                                    const Runtime& rt) const {
  if (tokens.empty()) throw std::invalid_argument("forward: empty token sequence");
  Tensor enc = encode(feats, rt);

  std::vector<int> dec_in;
  dec_in.reserve(tokens.size() + 1);
  dec_in.push_back(kEosId);  // EOS doubles as the start symbol
  dec_in.insert(dec_in.end(), tokens.begin(), tokens.end());
  std::vector<int> targets(tokens);
  targets.push_back(kEosId);

  Tensor logp = decode_logits(dec_in, enc, rt);
  Tensor att_nll = sequence_nll(logp, targets);

  Tensor ctc_logp = log_softmax_rows(matmul(enc, ctc_proj));
  Tensor ctc_nll = ctc_loss(ctc_logp, tokens, kBlankId);

  Tensor joint = joint_loss(att_nll, ctc_nll, cfg.ctc());
  return {att_nll, ctc_nll, joint};
}

namespace {

template <typename ModelT, typename Fn>
void walk_params(ModelT& m, Fn&& fn) {
  fn("frontend.conv1", m.frontend_p.conv1);
  fn("frontend.conv2", m.frontend_p.conv2);
  fn("frontend.embed", m.frontend_p.embed);
  fn("frontend.embed_bias", m.frontend_p.embed_bias);

  auto walk_ff = [&](const std::string& prefix, auto& ff) {
    if (ff.full) {
      fn(prefix + ".w1", ff.full->w1);
      fn(prefix + ".w2", ff.full->w2);
    }
    if (ff.low_rank) {
      fn(prefix + ".e1", ff.low_rank->e1);
      fn(prefix + ".d1", ff.low_rank->d1);
      fn(prefix + ".e2", ff.low_rank->e2);
      fn(prefix + ".d2", ff.low_rank->d2);
    }
  };
  auto walk_att = [&](const std::string& prefix, auto& att) {
    for (std::size_t h = 0; h < att.wq.size(); ++h) {
      const std::string hs = std::to_string(h);
      fn(prefix + ".wq" + hs, att.wq[h]);
      fn(prefix + ".wk" + hs, att.wk[h]);
      fn(prefix + ".wv" + hs, att.wv[h]);
    }
    fn(prefix + ".wo", att.wo);
  };

  for (std::size_t i = 0; i < m.encoder.size(); ++i) {
    const std::string p = "enc" + std::to_string(i);
    auto& b = m.encoder[i];
    fn(p + ".ln_ffn_a.gain", b.ln_ffn_a_gain);
    fn(p + ".ln_ffn_a.bias", b.ln_ffn_a_bias);
    walk_ff(p + ".ffn_a", b.ffn_a);
    fn(p + ".ln_att.gain", b.ln_att_gain);
    fn(p + ".ln_att.bias", b.ln_att_bias);
    walk_att(p + ".att", b.att);
    fn(p + ".conv.ln.gain", b.conv.ln_gain);
    fn(p + ".conv.ln.bias", b.conv.ln_bias);
    fn(p + ".conv.pointwise_in", b.conv.pointwise_in);
    fn(p + ".conv.depthwise", b.conv.depthwise);
    fn(p + ".conv.bn.mean", b.conv.bn_mean);
    fn(p + ".conv.bn.var", b.conv.bn_var);
    fn(p + ".conv.bn.gain", b.conv.bn_gain);
    fn(p + ".conv.bn.bias", b.conv.bn_bias);
    fn(p + ".conv.pointwise_out", b.conv.pointwise_out);
    fn(p + ".ln_ffn_b.gain", b.ln_ffn_b_gain);
    fn(p + ".ln_ffn_b.bias", b.ln_ffn_b_bias);
    walk_ff(p + ".ffn_b", b.ffn_b);
    fn(p + ".ln_final.gain", b.ln_final_gain);
    fn(p + ".ln_final.bias", b.ln_final_bias);
  }
  for (std::size_t i = 0; i < m.decoder.size(); ++i) {
    const std::string p = "dec" + std::to_string(i);
    auto& b = m.decoder[i];
    fn(p + ".ln_self.gain", b.ln_self_gain);
    fn(p + ".ln_self.bias", b.ln_self_bias);
    walk_att(p + ".self", b.self_att);
    fn(p + ".ln_cross.gain", b.ln_cross_gain);
    fn(p + ".ln_cross.bias", b.ln_cross_bias);
    walk_att(p + ".cross", b.cross_att);
    fn(p + ".ln_ffn.gain", b.ln_ffn_gain);
    fn(p + ".ln_ffn.bias", b.ln_ffn_bias);
    walk_ff(p + ".ffn", b.ffn);
  }
  fn("embed.table", m.embedding.table);
  fn("embed.out_proj", m.embedding.out_proj);
  fn("dec_final_ln.gain", m.dec_final_ln_gain);
  fn("dec_final_ln.bias", m.dec_final_ln_bias);
  fn("ctc.proj", m.ctc_proj);
}

std::string section_of(const std::string& name) {
  if (name.rfind("frontend.", 0) == 0) return "frontend";
  if (name.rfind("enc", 0) == 0) return "encoder";
  if (name.rfind("dec", 0) == 0) return "decoder";  // covers dec_final_ln too
  if (name.rfind("embed.", 0) == 0) return "embedding";
  if (name.rfind("ctc.", 0) == 0) return "ctc";
  return "other";
}

}  // namespace

void Model::for_each_param(const std::function<void(const std::string&, Tensor&)>& fn) {
  walk_params(*this, fn);
}

void Model::for_each_param(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  walk_params(*this, fn);
}

Model::ParamCount Model::count_params() const {
  ParamCount out;
  std::vector<std::pair<std::string, std::int64_t>> sections = {
      {"frontend", 0}, {"encoder", 0}, {"decoder", 0}, {"embedding", 0}, {"ctc", 0}};
  for_each_param([&](const std::string& name, const Tensor& t) {
    const auto n = static_cast<std::int64_t>(t.size());
    out.total += n;
    const std::string sec = section_of(name);
    for (auto& [k, v] : sections)
      if (k == sec) v += n;
  });
  out.by_section = std::move(sections);
  return out;
}

// ---- checkpoint ------------------------------------------------------------

namespace {
constexpr char kCkptMagic[4] = {'L', 'A', 'C', 'C'};

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4))
    throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
  return v;
}
}  // namespace

void Model::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
  os.write(kCkptMagic, 4);
  put_u32(os, kCheckpointVersion);
  const std::string cfg_text = cfg.canonical_text();
  put_u32(os, static_cast<std::uint32_t>(cfg_text.size()));
  os.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
  std::uint32_t n_params = 0;
  for_each_param([&](const std::string&, const Tensor&) { ++n_params; });
  put_u32(os, n_params);
  for_each_param([&](const std::string& name, const Tensor& t) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) put_u32(os, static_cast<std::uint32_t>(t.dim(i)));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  });
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Model Model::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw std::runtime_error("checkpoint: " + path + " has no LACC magic");
  const std::uint32_t version = get_u32(is, "version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                             " (expected " + std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t cfg_len = get_u32(is, "config length");
  std::string cfg_text(cfg_len, '\0');
  if (!is.read(cfg_text.data(), cfg_len))
    throw std::runtime_error("checkpoint: truncated while reading config");
  const ModelConfig cfg = ModelConfig::parse_text(cfg_text);
  Model m = Model::build(cfg, 0);

  const std::uint32_t n_params = get_u32(is, "parameter count");
  std::uint32_t expected = 0;
  m.for_each_param([&](const std::string&, const Tensor&) { ++expected; });
  if (n_params != expected)
    throw std::runtime_error("checkpoint: " + std::to_string(n_params) +
                             " parameter records, structure expects " +
                             std::to_string(expected));

  m.for_each_param([&](const std::string& name, Tensor& t) {
    const std::uint32_t name_len = get_u32(is, "parameter name length");
    std::string rec_name(name_len, '\0');
    if (!is.read(rec_name.data(), name_len))
      throw std::runtime_error("checkpoint: truncated while reading parameter name");
    if (rec_name != name)
      throw std::runtime_error("checkpoint: parameter '" + rec_name +
                               "' where structure expects '" + name + "'");
    const std::uint32_t rank = get_u32(is, "parameter rank");
    if (rank != static_cast<std::uint32_t>(t.rank()))
      throw std::runtime_error("checkpoint: rank mismatch for " + name);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t d = get_u32(is, "parameter dim");
      if (d != static_cast<std::uint32_t>(t.dim(static_cast<int>(i))))
        throw std::runtime_error("checkpoint: shape mismatch for " + name);
      numel *= d;
    }
    if (!is.read(reinterpret_cast<char*>(t.data()),
                 static_cast<std::streamsize>(numel * sizeof(double))))
      throw std::runtime_error("checkpoint: truncated payload for " + name);
  });
  return m;
}

}  // namespace lac
