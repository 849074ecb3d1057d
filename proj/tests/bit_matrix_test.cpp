#include <gtest/gtest.h>

#include <random>

#include "oodselect/bit_matrix.hpp"

using oodselect::BitMatrix;

TEST(BitMatrix, SetGetAcrossWordBoundaries) {
  BitMatrix m(3, 130);
  m.set(0, 0, true);
  m.set(0, 63, true);
  m.set(1, 64, true);
  m.set(2, 129, true);
  EXPECT_TRUE(m.get(0, 0));
  EXPECT_TRUE(m.get(0, 63));
  EXPECT_FALSE(m.get(0, 64));
  EXPECT_TRUE(m.get(1, 64));
  EXPECT_TRUE(m.get(2, 129));
  m.set(0, 63, false);
  EXPECT_FALSE(m.get(0, 63));
  EXPECT_EQ(m.row_popcount(0), 1u);
}

TEST(BitMatrixProperty, ReductionsMatchDenseLoops) {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t cols : {1u, 63u, 64u, 65u, 200u}) {
    BitMatrix m(7, cols);
    std::vector<std::vector<int>> dense(7, std::vector<int>(cols));
    for (std::size_t r = 0; r < 7; ++r)
      for (std::size_t c = 0; c < cols; ++c) m.set(r, c, (dense[r][c] = coin(rng)));
    std::vector<double> w(cols);
    for (auto& v : w) v = unit(rng);
    std::vector<std::size_t> picked;
    for (std::size_t c = 0; c < cols; c += 3) picked.push_back(c);
    const auto mask = oodselect::make_column_mask(cols, picked);
    const std::vector<std::size_t> rows{4, 0, 6};
    const auto unpacked = m.unpack_rows(rows);
    for (std::size_t r = 0; r < 7; ++r) {
      std::size_t pop = 0, masked = 0;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        pop += dense[r][c];
        masked += (c % 3 == 0) ? dense[r][c] : 0;
        dot += dense[r][c] * w[c];
      }
      EXPECT_EQ(m.row_popcount(r), pop);
      EXPECT_EQ(m.masked_popcount(r, mask), masked);
      EXPECT_NEAR(m.row_dot(r, w), dot, 1e-12);
    }
    for (std::size_t k = 0; k < rows.size(); ++k)
      for (std::size_t c = 0; c < cols; ++c) EXPECT_EQ(unpacked[k * cols + c], dense[rows[k]][c]);
  }
}
