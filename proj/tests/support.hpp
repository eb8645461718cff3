#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "tide/autograd.hpp"
#include <gtest/gtest.h>

#include "tide/core.hpp"

namespace tide::test {

template <typename T>
Tensor<T> random_tensor(Shape s, std::mt19937& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<T> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(d(rng));
  return t;
}

inline Image random_image(int h, int w, std::mt19937& rng) {
  return Image(random_tensor<float>(Shape{1, 3, h, w}, rng, 0.0, 1.0));
}

template <typename T>
Tensor<T> cast(const Tensor<float>& t) {
  Tensor<T> out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<T>(t[i]);
  return out;
}

struct GradCheck {
  double worst_rel = 0;  // max |analytic - numeric| / max(|analytic|, |numeric|, floor)
  int checked = 0;
};

using ScalarFn = std::function<ag::Var<double>(const std::vector<ag::Var<double>>&)>;

/// Central differences on `samples` random coordinates of every input whose
/// index is listed in `wrt` (all inputs when empty).
inline GradCheck gradcheck(const ScalarFn& f, const std::vector<Tensor<double>>& inputs, int samples,
                           std::mt19937& rng, std::vector<int> wrt = {}, double step = 1e-5, double floor = 1e-6) {
  if (wrt.empty())
    for (int i = 0; i < static_cast<int>(inputs.size()); ++i) wrt.push_back(i);
  std::vector<Tensor<double>> x;
  for (const auto& t : inputs) x.push_back(t.clone());

  std::vector<ag::Var<double>> leaves;
  for (std::size_t i = 0; i < x.size(); ++i)
    leaves.emplace_back(x[i].clone(), std::find(wrt.begin(), wrt.end(), static_cast<int>(i)) != wrt.end());
  f(leaves).backward();

  auto eval = [&]() {
    ag::NoGradGuard guard;
    std::vector<ag::Var<double>> v;
    for (const auto& t : x) v.emplace_back(t.clone());
    return f(v).value()[0];
  };

  GradCheck r;
  for (int i : wrt) {
    std::uniform_int_distribution<std::size_t> pick(0, x[i].size() - 1);
    const Tensor<double>& g = leaves[i].grad();
    for (int s = 0; s < samples; ++s) {
      const std::size_t j = pick(rng);
      const double orig = x[i][j];
      x[i][j] = orig + step;
      const double up = eval();
      x[i][j] = orig - step;
      const double down = eval();
      x[i][j] = orig;
      const double numeric = (up - down) / (2 * step);
      const double analytic = g.empty() ? 0.0 : g[j];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      r.worst_rel = std::max(r.worst_rel, std::abs(analytic - numeric) / denom);
      ++r.checked;
    }
  }
  return r;
}

}  // namespace tide::test

#include "tide/layers.hpp"

namespace tide::test {

/// Sets every parameter whose name starts with `prefix` to `v`.
template <typename T>
void fill_params(nn::ParamStore<T>& ps, const std::string& prefix, T v) {
  for (auto& p : ps.params())
    if (p.name.rfind(prefix, 0) == 0) p.value.fill(v);
}

template <typename T>
void expect_in_unit_interval(const Tensor<T>& t, double slack = 0.0) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    ASSERT_GE(t[i], -slack) << "element " << i;
    ASSERT_LE(t[i], 1.0 + slack) << "element " << i;
  }
}

}  // namespace tide::test
