// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/autodiff/parameters.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sendd/errors.hpp"

namespace sendd::ad {
namespace {

constexpr char kMagic[] = {'S', 'N', 'D', 'D', 'W', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("weights file truncated");
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void ParameterStore::add(const std::string& name, Tensor value) {
  if (index_.contains(name)) throw ContractError("duplicate parameter name: " + name);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, std::move(value));
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return entries_[it->second].second;
}

Tensor& ParameterStore::get_mut(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::size_t ParameterStore::total_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

std::map<std::string, std::size_t> ParameterStore::count_by_module() const {
  std::map<std::string, std::size_t> out;
  for (const auto& [name, t] : entries_) out[name.substr(0, name.find('.'))] += t.size();
  return out;
}

std::vector<std::uint8_t> ParameterStore::serialize() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  for (const auto& [name, t] : entries_) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

ParameterStore ParameterStore::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not an SNDDW1 weights file (bad magic)");
  std::vector<std::uint8_t> body(bytes.begin() + sizeof(kMagic), bytes.end());
  Reader in(body);
  ParameterStore store;
  while (!in.done()) {
    const auto name_len = in.u32();
    auto name = in.str(name_len);
    const auto rank = in.u32();
    if (rank > 8) throw FormatError("implausible rank for parameter " + name);
    Shape shape(rank);
    for (auto& d : shape) d = in.u32();
    const auto n = element_count(shape);
    in.need(4 * n);
    std::vector<double> values(n);
    for (auto& v : values) v = static_cast<double>(in.f32());
    if (store.contains(name)) throw FormatError("duplicate parameter in file: " + name);
    store.add(name, Tensor(std::move(shape), std::move(values)));
  }
  return store;
}

void ParameterStore::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ParameterStore ParameterStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

Var ParamBinding::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  Var v = tape_.leaf(store_.get(name), requires_grad_);
  bound_.emplace(name, v);
  return v;
}

std::vector<Tensor> ParamBinding::gradients() const {
  std::vector<Tensor> out;
  out.reserve(store_.size());
  for (std::size_t i = 0; i < store_.size(); ++i) {
    auto it = bound_.find(store_.name(i));
    out.push_back(it == bound_.end() ? Tensor(store_.value(i).shape()) : tape_.grad(it->second));
  }
  return out;
}

}  // namespace sendd::ad
