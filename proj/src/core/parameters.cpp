// SPDX-License-Identifier: Apache-2.0
#include "xhy/core/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "xhy/core/error.hpp"
#include "xhy/core/random.hpp"

namespace xhy {
namespace {

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) fail(ErrorKind::kIo, "truncated tensor file");
  return value;
}

void write_matrix(std::ostream& out, const ag::Matrix& m) {
  write_pod<std::int64_t>(out, m.rows());
  write_pod<std::int64_t>(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

ag::Matrix read_matrix(std::istream& in) {
  const auto rows = read_pod<std::int64_t>(in);
  const auto cols = read_pod<std::int64_t>(in);
  require(rows >= 0 && cols >= 0 && rows * cols < (1LL << 31), ErrorKind::kIo,
          "corrupt tensor header");
  ag::Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) fail(ErrorKind::kIo, "truncated tensor data");
  return m;
}

}  // namespace

ag::Var& ParameterStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  require(!contains(name), ErrorKind::kInvalidArgument, "duplicate parameter " + name);
  order_.push_back(name);
  auto [it, _] = params_.emplace(name, ag::Var(ag::Matrix::Zero(rows, cols), true));
  return it->second;
}

ag::Var& ParameterStore::create_normal(const std::string& name, Eigen::Index rows,
                                       Eigen::Index cols, double stddev, Rng& rng) {
  ag::Var& v = create(name, rows, cols);
  auto& m = v.mutable_value();
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, stddev);
  return v;
}

ag::Var& ParameterStore::create_constant(const std::string& name, Eigen::Index rows,
                                         Eigen::Index cols, double value) {
  ag::Var& v = create(name, rows, cols);
  v.mutable_value().setConstant(value);
  return v;
}

ag::Var& ParameterStore::at(std::string_view name) {
  auto it = params_.find(name);
  require(it != params_.end(), ErrorKind::kInvalidArgument,
          "unknown parameter " + std::string(name));
  return it->second;
}

const ag::Var& ParameterStore::at(std::string_view name) const {
  auto it = params_.find(name);
  require(it != params_.end(), ErrorKind::kInvalidArgument,
          "unknown parameter " + std::string(name));
  return it->second;
}

bool ParameterStore::contains(std::string_view name) const {
  return params_.find(name) != params_.end();
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : params_) n += static_cast<std::size_t>(v.value().size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, v] : params_) v.zero_grad();
}

void ParameterStore::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + file.string());
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(order_.size()));
  for (const auto& name : order_) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_matrix(out, params_.at(name).value());
  }
  require(static_cast<bool>(out), ErrorKind::kIo, "write failed for " + file.string());
}

std::vector<std::string> ParameterStore::load(
    const std::filesystem::path& file, const std::function<bool(std::string_view)>& filter) {
  std::ifstream in(file, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot read " + file.string());
  const auto count = read_pod<std::uint32_t>(in);
  std::vector<std::string> loaded;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    ag::Matrix m = read_matrix(in);
    if (!contains(name) || (filter && !filter(name))) continue;
    ag::Var& v = at(name);
    require(v.rows() == m.rows() && v.cols() == m.cols(), ErrorKind::kShapeMismatch,
            "checkpoint tensor " + name + " has shape " + std::to_string(m.rows()) + "x" +
                std::to_string(m.cols()) + ", model expects " + std::to_string(v.rows()) +
                "x" + std::to_string(v.cols()));
    v.mutable_value() = std::move(m);
    loaded.push_back(name);
  }
  return loaded;
}

double scheduled_lr(const AdamWConfig& config, std::int64_t step) {
  const double t = static_cast<double>(step + 1);
  if (config.warmup_steps <= 0) return config.lr;
  const double w = static_cast<double>(config.warmup_steps);
  return config.lr * std::min(t / w, std::sqrt(w / t));
}

AdamW::AdamW(ParameterStore& store, std::vector<std::string> names, AdamWConfig config)
    : store_(store), names_(std::move(names)), config_(config) {
  for (const auto& name : names_) {
    const auto& v = store_.at(name).value();
    m_.push_back(ag::Matrix::Zero(v.rows(), v.cols()));
    v_.push_back(ag::Matrix::Zero(v.rows(), v.cols()));
  }
}

void AdamW::step() {
  double norm_sq = 0.0;
  for (const auto& name : names_) {
    const auto& g = store_.at(name).grad();
    if (g.size() != 0) norm_sq += g.squaredNorm();
  }
  require(std::isfinite(norm_sq), ErrorKind::kNumeric, "non-finite gradient");
  const double norm = std::sqrt(norm_sq);
  const double clip =
      (config_.clip_norm > 0.0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;

  const double lr = scheduled_lr(config_, step_);
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < names_.size(); ++i) {
    ag::Var& p = store_.at(names_[i]);
    if (p.grad().size() == 0) continue;
    const ag::Matrix g = p.grad() * clip;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    auto& w = p.mutable_value();
    w *= (1.0 - lr * config_.weight_decay);
    w.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.eps);
  }
  for (const auto& name : names_) store_.at(name).zero_grad();
}

void AdamW::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + file.string());
  write_pod<std::int64_t>(out, step_);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(names_.size()));
  for (std::size_t i = 0; i < names_.size(); ++i) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(names_[i].size()));
    out.write(names_[i].data(), static_cast<std::streamsize>(names_[i].size()));
    write_matrix(out, m_[i]);
    write_matrix(out, v_[i]);
  }
}

void AdamW::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot read " + file.string());
  step_ = read_pod<std::int64_t>(in);
  const auto count = read_pod<std::uint32_t>(in);
  require(count == names_.size(), ErrorKind::kInvalidArgument,
          "optimizer state covers a different parameter set");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    require(name == names_[i], ErrorKind::kInvalidArgument,
            "optimizer state parameter order differs at " + name);
    m_[i] = read_matrix(in);
    v_[i] = read_matrix(in);
  }
}

}  // namespace xhy
