#include "lac/frontend.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace lac {

Tensor positional_encoding(int t, int d_e) {
  if (t < 1) throw std::invalid_argument("positional_encoding: need T >= 1");
  if (d_e < 2 || d_e % 2 != 0)
    throw std::invalid_argument("positional_encoding: dimension must be even, have " +
                                std::to_string(d_e));
  Tensor p({t, d_e});
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d_e / 2; ++j) {
      const double angle = i / std::pow(10000.0, (2.0 * j) / d_e);
      p(i, 2 * j) = std::sin(angle);
      p(i, 2 * j + 1) = std::cos(angle);
    }
  return p;
}

int conv_output_length(int n, int stride) { return (n - 3) / stride + 1; }

int subsampled_length(int t_raw) {
  if (t_raw < kMinInputFrames)
    throw std::invalid_argument("frontend: input has " + std::to_string(t_raw) +
                                " frames; two 3x3 stride-2 convolutions need at least " +
                                std::to_string(kMinInputFrames));
  return conv_output_length(conv_output_length(t_raw, 2), 2);
}

int subsampled_freq(int n_mels) {
  if (n_mels < kMinInputFrames)
    throw std::invalid_argument("frontend: " + std::to_string(n_mels) +
                                " mel channels; need at least " +
                                std::to_string(kMinInputFrames));
  return conv_output_length(conv_output_length(n_mels, 2), 2);
}

FrontendParams FrontendParams::init(int conv_channels, int n_mels, int d_e, Rng& rng) {
  if (conv_channels < 1) throw std::invalid_argument("FrontendParams: need channels >= 1");
  const int f_sub = subsampled_freq(n_mels);
  const double s1 = 1.0 / std::sqrt(9.0);
  const double s2 = 1.0 / std::sqrt(9.0 * conv_channels);
  const int embed_in = conv_channels * f_sub;
  const double se = 1.0 / std::sqrt(static_cast<double>(embed_in));
  FrontendParams p;
  p.conv1 = Tensor::uniform({conv_channels, 1, 3, 3}, rng, -s1, s1);
  p.conv2 = Tensor::uniform({conv_channels, conv_channels, 3, 3}, rng, -s2, s2);
  p.embed = Tensor::uniform({embed_in, d_e}, rng, -se, se);
  p.embed_bias = Tensor::zeros({d_e});
  return p;
}

void FrontendParams::validate() const {
  const int c = conv1.dim(0);
  const bool ok = conv1.rank() == 4 && conv1.dim(1) == 1 && conv1.dim(2) == 3 &&
                  conv1.dim(3) == 3 && conv2.rank() == 4 && conv2.dim(0) == c &&
                  conv2.dim(1) == c && conv2.dim(2) == 3 && conv2.dim(3) == 3 &&
                  embed.rank() == 2 && embed.dim(0) % c == 0 && embed_bias.rank() == 1 &&
                  embed_bias.dim(0) == embed.dim(1);
  if (!ok) throw std::invalid_argument("FrontendParams: inconsistent shapes");
}

Tensor frontend(const Tensor& feats, const FrontendParams& p, const Runtime& rt) {
  p.validate();
  if (feats.rank() != 2)
    throw std::invalid_argument("frontend: features must be [T_raw x n_mels], have " +
                                feats.shape_str());
  const int t_raw = feats.dim(0), n_mels = feats.dim(1);
  const int t = subsampled_length(t_raw);
  const int f_sub = subsampled_freq(n_mels);
  if (p.embed.dim(0) != p.channels() * f_sub)
    throw std::invalid_argument("frontend: embedding expects " +
                                std::to_string(p.embed.dim(0) / p.channels()) +
                                " subsampled mel bins, input gives " +
                                std::to_string(f_sub));
  Tensor h = reshape(feats, {1, t_raw, n_mels});
  h = relu(conv2d(h, p.conv1, 2));
  h = relu(conv2d(h, p.conv2, 2));
  Tensor emb = add_row_bias(matmul(flatten_time(h), p.embed), p.embed_bias);
  Tensor out = add(emb, positional_encoding(t, p.d_e()));
  if (rt.training) out = dropout(out, rt.dropout_rate, rt.rng_ref());
  return out;
}

// ---- feature file IO -------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'L', 'A', 'C', 'F'};

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::istream& is, const std::string& what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4))
    throw std::runtime_error("feature file: truncated while reading " + what);
  return v;
}
}  // namespace

Tensor read_features_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("feature file: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("feature file: " + path + " has no LACF magic");
  const std::uint32_t t_raw = read_u32(is, "frame count");
  const std::uint32_t n_mels = read_u32(is, "mel count");
  if (t_raw == 0 || n_mels == 0)
    throw std::runtime_error("feature file: " + path + " declares an empty matrix");
  const std::size_t n = static_cast<std::size_t>(t_raw) * n_mels;
  std::vector<float> raw(n);
  if (!is.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(n * sizeof(float))))
    throw std::runtime_error("feature file: " + path + " is truncated");
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<double>(raw[i]);
  return Tensor::from({static_cast<int>(t_raw), static_cast<int>(n_mels)},
                      std::move(values));
}

void write_features_binary(const std::string& path, const Tensor& feats) {
  if (feats.rank() != 2)
    throw std::invalid_argument("write_features_binary: features must be a matrix, have " +
                                feats.shape_str());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("feature file: cannot write " + path);
  os.write(kMagic, 4);
  write_u32(os, static_cast<std::uint32_t>(feats.dim(0)));
  write_u32(os, static_cast<std::uint32_t>(feats.dim(1)));
  const double* p = feats.data();
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const float f = static_cast<float>(p[i]);
    os.write(reinterpret_cast<const char*>(&f), sizeof(float));
  }
  if (!os) throw std::runtime_error("feature file: write failed for " + path);
}

Tensor read_features_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("feature file: cannot open " + path);
  std::vector<double> values;
  int n_mels = -1, t_raw = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    int width = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error("feature file: " + path + " line " +
                                 std::to_string(t_raw + 1) + ": bad value '" + cell + "'");
      }
      ++width;
    }
    if (n_mels < 0) n_mels = width;
    if (width != n_mels)
      throw std::runtime_error("feature file: " + path + " line " +
                               std::to_string(t_raw + 1) + " has " + std::to_string(width) +
                               " values, expected " + std::to_string(n_mels));
    ++t_raw;
  }
  if (t_raw == 0) throw std::runtime_error("feature file: " + path + " is empty");
  return Tensor::from({t_raw, n_mels}, std::move(values));
}

}  // namespace lac
