// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "sendd/autodiff/tape.hpp"

namespace sendd::ad {

/// Named trainable tensors in insertion order. Names are unique.
class ParameterStore {
 public:
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return index_.contains(name); }
  const Tensor& get(const std::string& name) const;
  Tensor& get_mut(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  const Tensor& value(std::size_t i) const { return entries_[i].second; }
  Tensor& value(std::size_t i) { return entries_[i].second; }

  /// Sum of element counts over all parameters.
  std::size_t total_count() const;
  /// Element counts keyed by the name prefix before the first '.'.
  std::map<std::string, std::size_t> count_by_module() const;

  /// SNDDW1 binary layout: magic, then per parameter
  /// u32 name length, name bytes, u32 rank, u32 dims, little-endian f32 values.
  std::vector<std::uint8_t> serialize() const;
  static ParameterStore deserialize(const std::vector<std::uint8_t>& bytes);
  void save(const std::filesystem::path& path) const;
  static ParameterStore load(const std::filesystem::path& path);

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Exposes the parameters of a store as leaves of one tape, created on first use.
class ParamBinding {
 public:
  ParamBinding(Tape& tape, const ParameterStore& store, bool requires_grad)
      : tape_(tape), store_(store), requires_grad_(requires_grad) {}

  Var operator()(const std::string& name);
  Tape& tape() const { return tape_; }
  bool trainable() const { return requires_grad_; }

  /// Gradients of every parameter after tape.backward(); untouched ones are zero.
  std::vector<Tensor> gradients() const;

 private:
  Tape& tape_;
  const ParameterStore& store_;
  bool requires_grad_;
  std::unordered_map<std::string, Var> bound_;
};

}  // namespace sendd::ad
