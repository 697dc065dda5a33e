// SPDX-License-Identifier: Apache-2.0
#include "gradcheck.hpp"

#include <cmath>

namespace xhy::test {

std::vector<GradSample> gradient_check(ParameterStore& params, const std::function<ag::Var()>& loss,
                                       const std::vector<std::string>& groups, int samples,
                                       Rng& rng, double h) {
  params.zero_grad();
  loss().backward();

  std::vector<GradSample> out;
  const int per_group = samples / static_cast<int>(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<std::pair<std::string, Eigen::Index>> pool;
    for (const auto& name : params.names()) {
      if (!name.starts_with(groups[g])) continue;
      const auto& grad = params.at(name).grad();
      for (Eigen::Index i = 0; i < grad.size(); ++i) {
        if (grad.data()[i] != 0.0) pool.emplace_back(name, i);
      }
    }
    const int want = g + 1 == groups.size() ? samples - per_group * static_cast<int>(g) : per_group;
    for (int s = 0; s < want && !pool.empty(); ++s) {
      const auto [name, index] = pool[rng.uniform_index(pool.size())];
      auto& var = params.at(name);
      const double analytic = var.grad().data()[index];
      double& x = var.mutable_value().data()[index];
      const double saved = x;
      double plus, minus;
      {
        ag::NoGradGuard guard;
        x = saved + h;
        plus = loss().item();
        x = saved - h;
        minus = loss().item();
      }
      x = saved;
      const double numeric = (plus - minus) / (2 * h);
      const double scale = std::max(std::abs(analytic), std::abs(numeric));
      const double rel = scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
      out.push_back({name, index, analytic, numeric, rel});
    }
  }
  return out;
}

}  // namespace xhy::test
