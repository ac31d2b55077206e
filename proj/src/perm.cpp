#include "sso/perm.hpp"

#include <algorithm>
#include <ostream>
#include <string>

namespace sso::perm {

std::uint64_t factorial(int k) {
  if (k < 0 || k > 20) throw RangeError("factorial: k out of range [0, 20]");
  std::uint64_t f = 1;
  for (int i = 2; i <= k; ++i) f *= static_cast<std::uint64_t>(i);
  return f;
}

Permutation::Permutation(std::vector<int> mapping) : mapping_(std::move(mapping)) {
  const int k = static_cast<int>(mapping_.size());
  if (k < 2) throw RangeError("Permutation: k must be >= 2");
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (int v : mapping_) {
    if (v < 0 || v >= k || seen[static_cast<std::size_t>(v)]) {
      throw RangeError("Permutation: mapping is not a bijection on {0..k-1}");
    }
    seen[static_cast<std::size_t>(v)] = true;
  }
}

Permutation Permutation::identity(int k) {
  std::vector<int> m(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) m[static_cast<std::size_t>(i)] = i;
  return Permutation(std::move(m));
}

Permutation Permutation::reversal(int k) {
  std::vector<int> m(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) m[static_cast<std::size_t>(i)] = k - 1 - i;
  return Permutation(std::move(m));
}

Permutation Permutation::inverse() const {
  std::vector<int> inv(mapping_.size());
  for (int i = 0; i < k(); ++i) inv[static_cast<std::size_t>(mapping_[static_cast<std::size_t>(i)])] = i;
  return Permutation(std::move(inv));
}

Permutation Permutation::compose(const Permutation& other) const {
  if (k() != other.k()) throw DimensionError("compose: mismatched permutation sizes");
  std::vector<int> m(mapping_.size());
  for (int i = 0; i < k(); ++i) {
    m[static_cast<std::size_t>(i)] = mapping_[static_cast<std::size_t>(other[i])];
  }
  return Permutation(std::move(m));
}

int kendall_tau_distance(const Permutation& a, const Permutation& b) {
  if (a.k() != b.k()) throw DimensionError("kendall_tau_distance: mismatched permutation sizes");
  const int n = a.k();
  int count_inversions = 0;
  for (int i = 0; i < n - 1; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool a_less = a[i] < a[j];
      const bool b_less = b[i] < b[j];
      if (a_less != b_less) ++count_inversions;
    }
  }
  return count_inversions;
}

OrderingLabel rank(const Permutation& p) {
  const int k = p.k();
  std::uint64_t r = 0;
  for (int i = 0; i < k; ++i) {
    int smaller_after = 0;
    for (int j = i + 1; j < k; ++j) {
      if (p[j] < p[i]) ++smaller_after;
    }
    r += static_cast<std::uint64_t>(smaller_after) * factorial(k - 1 - i);
  }
  return OrderingLabel{static_cast<int>(r), k};
}

Permutation unrank(const OrderingLabel& label) { return unrank(label.class_index, label.k); }

Permutation unrank(int class_index, int k) {
  if (k < 2) throw RangeError("unrank: k must be >= 2");
  const std::uint64_t total = factorial(k);
  if (class_index < 0 || static_cast<std::uint64_t>(class_index) >= total) {
    throw RangeError("unrank: class_index " + std::to_string(class_index) +
                     " outside [0, " + std::to_string(total) + ")");
  }
  std::vector<int> pool(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) pool[static_cast<std::size_t>(i)] = i;
  std::vector<int> m;
  m.reserve(static_cast<std::size_t>(k));
  std::uint64_t rest = static_cast<std::uint64_t>(class_index);
  for (int i = 0; i < k; ++i) {
    const std::uint64_t f = factorial(k - 1 - i);
    const auto digit = static_cast<std::size_t>(rest / f);
    rest %= f;
    m.push_back(pool[digit]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(digit));
  }
  return Permutation(std::move(m));
}

KtdMatrix::KtdMatrix(int k, int num_classes, std::vector<int> entries)
    : k_(k), num_classes_(num_classes), entries_(std::move(entries)) {}

KtdMatrix KtdMatrix::build(int k, int max_k) {
  if (k < 2) throw RangeError("KtdMatrix: k must be >= 2");
  if (k > max_k) {
    throw CapacityError("KtdMatrix: k=" + std::to_string(k) + " exceeds cap " +
                        std::to_string(max_k) + "; (k!)^2 entries grow factorially");
  }
  const int m = static_cast<int>(factorial(k));
  std::vector<Permutation> perms;
  perms.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) perms.push_back(unrank(i, k));
  std::vector<int> entries(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const int d = kendall_tau_distance(perms[static_cast<std::size_t>(i)],
                                         perms[static_cast<std::size_t>(j)]);
      entries[static_cast<std::size_t>(i) * m + j] = d;
      entries[static_cast<std::size_t>(j) * m + i] = d;
    }
  }
  return KtdMatrix(k, m, std::move(entries));
}

int KtdMatrix::at(int i, int j) const {
  if (i < 0 || i >= num_classes_ || j < 0 || j >= num_classes_) {
    throw RangeError("KtdMatrix::at: index out of range");
  }
  return entries_[static_cast<std::size_t>(i) * num_classes_ + j];
}

void KtdMatrix::write_csv(std::ostream& os) const {
  for (int j = 0; j < num_classes_; ++j) {
    if (j) os << ',';
    os << j;
  }
  os << '\n';
  for (int i = 0; i < num_classes_; ++i) {
    for (int j = 0; j < num_classes_; ++j) {
      if (j) os << ',';
      os << at(i, j);
    }
    os << '\n';
  }
}

}  // namespace sso::perm
