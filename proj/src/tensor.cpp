#include "lac/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "buffer.hpp"
#include "lac/tape.hpp"

namespace lac {

namespace detail {
std::atomic<std::int64_t> g_live_scalars{0};
std::atomic<std::int64_t> g_peak_scalars{0};
}  // namespace detail

namespace workspace {
std::int64_t live_scalars() { return detail::g_live_scalars.load(); }
std::int64_t peak_scalars() { return detail::g_peak_scalars.load(); }
void reset_peak() { detail::g_peak_scalars.store(detail::g_live_scalars.load()); }
}  // namespace workspace

std::uint64_t Rng::bits() {
  // splitmix64 seeding the caller-visible stream directly; stateless of
  // std::mt19937_64 so streams are identical on every platform.
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

static std::size_t checked_numel(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 4)
    throw std::invalid_argument("Tensor: rank must be 1..4, got rank " +
                                std::to_string(shape.size()));
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0)
      throw std::invalid_argument("Tensor: non-positive dimension in " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape) {
  const std::size_t n = checked_numel(shape);
  shape_ = std::move(shape);
  buf_ = std::make_shared<detail::Buffer>(n);
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.buf_->v[i] = value;
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  Tensor t(std::move(shape));
  if (values.size() != t.size())
    throw std::invalid_argument("Tensor::from: " + std::to_string(values.size()) +
                                " values for shape " + t.shape_str());
  t.buf_->v = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::uniform(std::vector<int> shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.buf_->v[i] = rng.uniform(lo, hi);
  return t;
}

int Tensor::dim(int i) const {
  if (i < 0 || i >= rank())
    throw std::out_of_range("Tensor::dim: axis " + std::to_string(i) + " of rank " +
                            std::to_string(rank()));
  return shape_[static_cast<std::size_t>(i)];
}

std::size_t Tensor::size() const {
  if (!buf_) return 0;
  return buf_->v.size();
}

double* Tensor::data() { return buf_->v.data(); }
const double* Tensor::data() const { return buf_->v.data(); }

double& Tensor::operator()(int i) { return buf_->v[static_cast<std::size_t>(i)]; }
double& Tensor::operator()(int i, int j) {
  return buf_->v[static_cast<std::size_t>(i) * shape_[1] + j];
}
double& Tensor::operator()(int i, int j, int k) {
  return buf_->v[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
}
double& Tensor::operator()(int i, int j, int k, int l) {
  return buf_->v[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] +
                 l];
}
double Tensor::operator()(int i) const { return buf_->v[static_cast<std::size_t>(i)]; }
double Tensor::operator()(int i, int j) const {
  return buf_->v[static_cast<std::size_t>(i) * shape_[1] + j];
}
double Tensor::operator()(int i, int j, int k) const {
  return buf_->v[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
}
double Tensor::operator()(int i, int j, int k, int l) const {
  return buf_->v[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] +
                 l];
}

double Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("Tensor::item: expected 1 element, have " + shape_str());
  return buf_->v[0];
}

bool Tensor::all_finite() const {
  if (!buf_) return true;
  for (double x : buf_->v)
    if (!std::isfinite(x)) return false;
  return true;
}

Tensor Tensor::detached() const {
  Tensor t;
  t.shape_ = shape_;
  t.buf_ = buf_;
  return t;
}

Tensor Tensor::grad() const {
  if (!node_) throw std::runtime_error("Tensor::grad: tensor is not tracked on a tape");
  if (!node_->grad.defined())
    throw std::runtime_error("Tensor::grad: no gradient accumulated (did backward run?)");
  return node_->grad;
}

std::string Tensor::shape_str() const { return lac::shape_str(shape_); }

}  // namespace lac
