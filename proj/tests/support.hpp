#pragma once

#include <doctest.h>

#include <vector>

#include "ciwnls/common.hpp"
#include "oracles.hpp"

namespace test {

inline oracle::Dense to_dense(const ciwnls::Matrix& m) {
  oracle::Dense d = oracle::zeros(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
  return d;
}

inline ciwnls::Matrix from_dense(const oracle::Dense& d) {
  ciwnls::Matrix m(d.size(), d.front().size());
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.front().size(); ++j) m(i, j) = d[i][j];
  return m;
}

inline ciwnls::Vector vec(std::initializer_list<double> values) {
  ciwnls::Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
inline ciwnls::Matrix random_spd(int m, double lo, double hi, ciwnls::Rng& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(lo, hi);
  ciwnls::Matrix g(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) g(i, j) = normal(rng);
  Eigen::HouseholderQR<ciwnls::Matrix> qr(g);
  const ciwnls::Matrix q = qr.householderQ();
  ciwnls::Vector d(m);
  for (int i = 0; i < m; ++i) d(i) = unif(rng);
  ciwnls::Matrix s = q * d.asDiagonal() * q.transpose();
  return (s + s.transpose()) / 2;
}

}  // namespace test
