#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcmea/autodiff.hpp"
#include "pcmea/matrix.hpp"
#include "pcmea/random.hpp"

namespace pcmea {

enum class StoreRole : std::uint8_t { Online, Target, Auxiliary };

/// Ordered collection of named dense parameters. Names are unique and shapes
/// never change after insertion.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
  };

  explicit ParameterStore(StoreRole role = StoreRole::Online) : role_(role) {}

  Matrix& add(std::string name, Matrix value);
  bool contains(const std::string& name) const { return index_.contains(name); }
  const Matrix& at(const std::string& name) const;
  Matrix& at(const std::string& name);

  /// Overwrites a value; the shape must match.
  void assign(const std::string& name, const Matrix& value);

  std::span<const Entry> entries() const { return entries_; }
  std::span<Entry> entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  StoreRole role() const { return role_; }
  void set_role(StoreRole role) { role_ = role; }

  /// Same names in the same order with the same shapes.
  bool same_schema(const ParameterStore& other) const;

  /// Store with this schema and every value zero.
  ParameterStore zeros_like() const;

  /// Bit-level equality of every value.
  bool identical(const ParameterStore& other) const;

 private:
  StoreRole role_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Tape variables for every entry of a store.
class BoundParameters {
 public:
  /// With `trainable` false the parameters become tape constants.
  BoundParameters(ad::Tape& tape, const ParameterStore& store, bool trainable);

  ad::Var operator[](const std::string& name) const;
  bool contains(const std::string& name) const { return vars_.contains(name); }

  /// Gradients gathered after Tape::backward, in the store's schema.
  ParameterStore gradients() const;

 private:
  const ParameterStore* store_;
  std::unordered_map<std::string, ad::Var> vars_;
  std::vector<ad::Var> ordered_;
};

Matrix glorot_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols);
Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev);

}  // namespace pcmea
