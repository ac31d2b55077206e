#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sso/error.hpp"

namespace sso::perm {

// Size guard: a KTD matrix for k elements holds (k!)^2 entries.
inline constexpr int kDefaultMaxK = 7;

std::uint64_t factorial(int k);

// A bijection on {0, ..., k-1}. Immutable after construction.
class Permutation {
 public:
  explicit Permutation(std::vector<int> mapping);

  static Permutation identity(int k);
  static Permutation reversal(int k);

  int k() const { return static_cast<int>(mapping_.size()); }
  int operator[](int i) const { return mapping_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& mapping() const { return mapping_; }

  Permutation inverse() const;
  // (a.compose(b))[i] == a[b[i]]
  Permutation compose(const Permutation& other) const;

  bool operator==(const Permutation& other) const = default;

 private:
  std::vector<int> mapping_;
};

// Class index of an ordering among the k! possibilities (lexicographic rank).
struct OrderingLabel {
  int class_index = 0;
  int k = 2;

  bool operator==(const OrderingLabel& other) const = default;
};

// Number of element pairs ordered oppositely in a and b. Zero iff a == b,
// maximum k(k-1)/2 for reversed orders.
int kendall_tau_distance(const Permutation& a, const Permutation& b);

// Lexicographic rank of p among all k! permutations of its size.
OrderingLabel rank(const Permutation& p);

// Inverse of rank.
Permutation unrank(const OrderingLabel& label);
Permutation unrank(int class_index, int k);

// Fixed table of pairwise Kendall tau distances between all ordering labels,
// rows and columns in lexicographic label order.
class KtdMatrix {
 public:
  static KtdMatrix build(int k, int max_k = kDefaultMaxK);

  int k() const { return k_; }
  int num_classes() const { return num_classes_; }
  int max_distance() const { return k_ * (k_ - 1) / 2; }

  int at(int i, int j) const;

  // Row-major, integer entries, header row of class indices.
  void write_csv(std::ostream& os) const;

 private:
  KtdMatrix(int k, int num_classes, std::vector<int> entries);

  int k_;
  int num_classes_;
  std::vector<int> entries_;
};

// output[i] = items[p[i]]; restore with the inverse permutation.
template <typename T>
std::vector<T> apply_shuffle(std::span<const T> items, const Permutation& p) {
  if (static_cast<int>(items.size()) != p.k()) {
    throw DimensionError("apply_shuffle: item count does not match permutation size");
  }
  std::vector<T> out;
  out.reserve(items.size());
  for (int i = 0; i < p.k(); ++i) out.push_back(items[static_cast<std::size_t>(p[i])]);
  return out;
}

template <typename T>
std::vector<T> apply_shuffle(const std::vector<T>& items, const Permutation& p) {
  return apply_shuffle(std::span<const T>(items), p);
}

}  // namespace sso::perm
