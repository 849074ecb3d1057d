#pragma once

#include <bit>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace oodselect {

/// Dense 0/1 matrix with 64 cells packed per machine word, row-major.
/// Trailing bits past `cols()` in each row are always zero.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), stride_((cols + 63) / 64), words_(rows * stride_, 0) {}

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t words_per_row() const noexcept { return stride_; }

  [[nodiscard]] bool get(std::size_t r, std::size_t c) const noexcept {
    assert(r < rows_ && c < cols_);
    return (words_[r * stride_ + c / 64] >> (c % 64)) & 1U;
  }

  void set(std::size_t r, std::size_t c, bool value) noexcept {
    assert(r < rows_ && c < cols_);
    auto& w = words_[r * stride_ + c / 64];
    const std::uint64_t bit = std::uint64_t{1} << (c % 64);
    w = value ? (w | bit) : (w & ~bit);
  }

  [[nodiscard]] std::span<const std::uint64_t> row(std::size_t r) const noexcept {
    return {words_.data() + r * stride_, stride_};
  }

  [[nodiscard]] std::size_t row_popcount(std::size_t r) const noexcept {
    std::size_t n = 0;
    for (auto w : row(r)) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  /// Number of ones in row r restricted to the columns set in `mask`.
  [[nodiscard]] std::size_t masked_popcount(std::size_t r, std::span<const std::uint64_t> mask) const noexcept {
    assert(mask.size() == stride_);
    const auto words = row(r);
    std::size_t n = 0;
    for (std::size_t k = 0; k < stride_; ++k) n += static_cast<std::size_t>(std::popcount(words[k] & mask[k]));
    return n;
  }

  /// Weighted row reduction sum_j z[r][j] * w[j], accumulated in double.
  [[nodiscard]] double row_dot(std::size_t r, std::span<const double> w) const noexcept {
    assert(w.size() == cols_);
    const auto words = row(r);
    double acc = 0.0;
    for (std::size_t k = 0; k < stride_; ++k) {
      for (std::uint64_t bits = words[k]; bits != 0; bits &= bits - 1)
        acc += w[k * 64 + static_cast<std::size_t>(std::countr_zero(bits))];
    }
    return acc;
  }

  /// Copies the selected rows into a row-major dense matrix of doubles.
  [[nodiscard]] std::vector<double> unpack_rows(std::span<const std::size_t> row_ids) const {
    std::vector<double> dense(row_ids.size() * cols_, 0.0);
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
      const auto words = row(row_ids[i]);
      double* out = dense.data() + i * cols_;
      for (std::size_t k = 0; k < stride_; ++k)
        for (std::uint64_t bits = words[k]; bits != 0; bits &= bits - 1)
          out[k * 64 + static_cast<std::size_t>(std::countr_zero(bits))] = 1.0;
    }
    return dense;
  }

  friend bool operator==(const BitMatrix&, const BitMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t stride_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Packed column mask compatible with BitMatrix::masked_popcount.
inline std::vector<std::uint64_t> make_column_mask(std::size_t cols, std::span<const std::size_t> columns) {
  std::vector<std::uint64_t> mask((cols + 63) / 64, 0);
  for (auto c : columns) {
    assert(c < cols);
    mask[c / 64] |= std::uint64_t{1} << (c % 64);
  }
  return mask;
}

}  // namespace oodselect
