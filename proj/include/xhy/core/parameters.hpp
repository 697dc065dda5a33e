// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "xhy/core/autograd.hpp"

namespace xhy {

class Rng;

// Named trainable tensors in insertion order.
class ParameterStore {
 public:
  ag::Var& create(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  ag::Var& create_normal(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                         double stddev, Rng& rng);
  ag::Var& create_constant(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                           double value);

  ag::Var& at(std::string_view name);
  const ag::Var& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();

  // Binary layout, little-endian: u32 tensor count, then per tensor
  // u32 name length, name bytes, i64 rows, i64 cols, rows*cols f64 row-major.
  void save(const std::filesystem::path& file) const;
  // Loads every tensor present in both the file and the store whose name
  // passes the filter; shapes must agree. Returns the names loaded.
  std::vector<std::string> load(const std::filesystem::path& file,
                                const std::function<bool(std::string_view)>& filter = {});

 private:
  std::map<std::string, ag::Var, std::less<>> params_;
  std::vector<std::string> order_;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  int warmup_steps = 0;
  double clip_norm = 1.0;  // 0 disables global-norm clipping
};

// Linear warmup to the peak rate, then inverse-square-root decay.
double scheduled_lr(const AdamWConfig& config, std::int64_t step);

class AdamW {
 public:
  // Only the named parameters are updated; others are left bitwise untouched.
  AdamW(ParameterStore& store, std::vector<std::string> names, AdamWConfig config);

  // Applies one update from the accumulated gradients, then clears them.
  void step();
  std::int64_t steps_taken() const { return step_; }
  const AdamWConfig& config() const { return config_; }

  void save(const std::filesystem::path& file) const;
  void load(const std::filesystem::path& file);

 private:
  ParameterStore& store_;
  std::vector<std::string> names_;
  AdamWConfig config_;
  std::vector<ag::Matrix> m_;
  std::vector<ag::Matrix> v_;
  std::int64_t step_ = 0;
};

}  // namespace xhy
