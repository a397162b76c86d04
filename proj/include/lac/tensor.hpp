#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace lac {

// Live/peak scalar accounting for every Tensor buffer. The benchmark
// harness resets the peak before a forward pass and reads it afterwards;
// counts are exact element counts, not bytes.
namespace workspace {
std::int64_t live_scalars();
std::int64_t peak_scalars();
void reset_peak();
}  // namespace workspace

namespace detail {
struct Buffer;
struct Node;
}  // namespace detail

// Deterministic RNG. Derives doubles from raw mt19937_64 bits so streams are
// reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t bits();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);

 private:
  std::uint64_t state_;
};

// Dense row-major array of f64, rank 1..4. Copies share the underlying
// buffer; public operations never mutate their inputs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double value);
  static Tensor uniform(std::vector<int> shape, Rng& rng, double lo, double hi);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const;
  std::size_t size() const;
  bool defined() const { return buf_ != nullptr; }

  double* data();
  const double* data() const;

  double& operator()(int i);
  double& operator()(int i, int j);
  double& operator()(int i, int j, int k);
  double& operator()(int i, int j, int k, int l);
  double operator()(int i) const;
  double operator()(int i, int j) const;
  double operator()(int i, int j, int k) const;
  double operator()(int i, int j, int k, int l) const;

  double item() const;  // value of a 1-element tensor

  bool all_finite() const;

  // Autodiff surface (see tape.hpp). tracked() is true once the tensor is
  // watched as a leaf or produced by a recorded op.
  bool tracked() const { return node_ != nullptr; }
  Tensor detached() const;  // same buffer, no node
  Tensor grad() const;      // throws before backward has populated it

  std::string shape_str() const;

 private:
  friend class Tape;
  friend Tensor make_tracked(Tensor, std::shared_ptr<detail::Node>);
  friend const std::shared_ptr<detail::Node>& node_of(const Tensor&);

  std::vector<int> shape_;
  std::shared_ptr<detail::Buffer> buf_;
  std::shared_ptr<detail::Node> node_;
};

std::string shape_str(const std::vector<int>& shape);

}  // namespace lac
