#include "pcmea/params.hpp"

#include <cmath>
#include <cstring>

#include "pcmea/error.hpp"

namespace pcmea {

Matrix& ParameterStore::add(std::string name, Matrix value) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{std::move(name), std::move(value)});
  return entries_.back().value;
}

const Matrix& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

Matrix& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

void ParameterStore::assign(const std::string& name, const Matrix& value) {
  auto& slot = at(name);
  if (slot.rows() != value.rows() || slot.cols() != value.cols()) {
    throw FormatError("shape mismatch assigning parameter '" + name + "'");
  }
  slot = value;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

bool ParameterStore::same_schema(const ParameterStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) {
      return false;
    }
  }
  return true;
}

ParameterStore ParameterStore::zeros_like() const {
  ParameterStore out(role_);
  for (const auto& e : entries_) out.add(e.name, Matrix::Zero(e.value.rows(), e.value.cols()));
  return out;
}

bool ParameterStore::identical(const ParameterStore& other) const {
  if (!same_schema(other)) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i].value;
    const auto& b = other.entries_[i].value;
    if (std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) != 0) {
      return false;
    }
  }
  return true;
}

BoundParameters::BoundParameters(ad::Tape& tape, const ParameterStore& store, bool trainable)
    : store_(&store) {
  for (const auto& e : store.entries()) {
    auto v = trainable ? tape.variable(e.value) : tape.constant(e.value);
    vars_.emplace(e.name, v);
    ordered_.push_back(v);
  }
}

ad::Var BoundParameters::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ConfigError("parameter '" + name + "' is not bound");
  return it->second;
}

ParameterStore BoundParameters::gradients() const {
  ParameterStore out(StoreRole::Auxiliary);
  const auto entries = store_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out.add(entries[i].name, ordered_[i].tape->grad(ordered_[i]));
  }
  return out;
}

Matrix glorot_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform_unit(rng) - 1.0) * limit;
  return m;
}

Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * standard_normal(rng);
  return m;
}

}  // namespace pcmea
