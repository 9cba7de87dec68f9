// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/model/model.hpp"

#include <cmath>
#include <initializer_list>
#include <random>
#include <sstream>

#include "sendd/autodiff/ops.hpp"
#include "sendd/errors.hpp"

namespace sendd::model {
namespace {

using ad::Tensor;

class Init {
 public:
  explicit Init(std::uint64_t seed) : rng_(seed) {}

  Tensor normal(ad::Shape shape, double stddev) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : t.values()) v = dist(rng_);
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

void add_linear(ad::ParameterStore& s, Init& init, const std::string& name, std::size_t in,
                std::size_t out, double gain = 1.0) {
  s.add(name + ".w", init.normal({in, out}, gain / std::sqrt(static_cast<double>(in))));
  s.add(name + ".b", Tensor::filled({out}, 0.0));
}

void add_gat(ad::ParameterStore& s, Init& init, const std::string& name, std::size_t c) {
  add_linear(s, init, name + ".q", c, c);
  // No key bias: it adds the same score to every neighbour of a node.
  s.add(name + ".k.w", init.normal({c, c}, 1.0 / std::sqrt(static_cast<double>(c))));
  add_linear(s, init, name + ".v", c, c);
  add_linear(s, init, name + ".o", c, c, 0.5);
}

// The first n channels of a stack start as a carrier: the node encoding
// writes a raw signal there, every other writer leaves them at zero, and the
// interpolation and head copy them through.
void clear_columns(ad::ParameterStore& s, const std::string& name, std::size_t n) {
  auto& w = s.get_mut(name + ".w");
  auto& b = s.get_mut(name + ".b");
  for (std::size_t r = 0; r < w.shape()[0]; ++r)
    for (std::size_t j = 0; j < n; ++j) w.at(r, j) = 0.0;
  for (std::size_t j = 0; j < n; ++j) b[j] = 0.0;
}

void set_identity(ad::ParameterStore& s, const std::string& name, std::size_t n, double gain) {
  clear_columns(s, name, n);
  auto& w = s.get_mut(name + ".w");
  for (std::size_t j = 0; j < n; ++j) w.at(j, j) = gain;
}

void reserve_carrier(ad::ParameterStore& s, const std::string& stack, std::size_t layers,
                     std::size_t n, std::initializer_list<const char*> writers) {
  for (const char* w : writers) {
    clear_columns(s, stack + "." + w, n);
    // Keep relu layers off the kink: those units stay inactive.
    if (std::string(w).rfind("gamma_", 0) == 0)
      for (std::size_t j = 0; j < n; ++j) s.get_mut(stack + "." + w + ".b")[j] = -1.0;
  }
  for (std::size_t l = 0; l < layers; ++l) clear_columns(s, stack + ".gat" + std::to_string(l) + ".o", n);
  clear_columns(s, stack + ".query", n);
  set_identity(s, stack + ".interp.v", n, 1.0);
  set_identity(s, stack + ".interp.o", n, 1.0);
}

}  // namespace

void ModelConfig::validate() const {
  if (channels < 3 || bands == 0 || k < 2 || cell == 0 || detector_channels == 0 || patch < 2)
    throw ParameterError("model config: sizes must be positive (channels >= 3, k >= 2, patch >= 2)");
  if (dilations.empty()) throw ParameterError("model config: at least one refinement layer");
  for (auto d : dilations)
    if (d == 0) throw ParameterError("model config: dilation must be >= 1");
  if (!(match_radius_px > 0.0) || !(match_temperature > 0.0) || !(detect_temperature > 0.0))
    throw ParameterError("model config: radius and temperatures must be positive");
  if (!(disparity_ratio > 0.0) || !(position_scale_mm > 0.0) || !(flow_scale_mm > 0.0) ||
      !(depth_ref_mm > 0.0) || !(detector_gain > 0.0))
    throw ParameterError("model config: scales must be positive");
}

std::string ModelConfig::to_text() const {
  std::ostringstream o;
  o.precision(17);
  o << "channels=" << channels << "\nbands=" << bands << "\nk=" << k << "\ndilations=";
  for (std::size_t i = 0; i < dilations.size(); ++i) o << (i ? "," : "") << dilations[i];
  o << "\ncell=" << cell << "\ndetector_channels=" << detector_channels << "\npatch=" << patch
    << "\nmatch_radius_px=" << match_radius_px << "\nmutual_check=" << (mutual_check ? 1 : 0)
    << "\nmatch_temperature=" << match_temperature
    << "\ndetect_temperature=" << detect_temperature << "\ndetect_window=" << detect_window << "\ndisparity_ratio=" << disparity_ratio
    << "\ndepth_ref_mm=" << depth_ref_mm << "\nposition_scale_mm=" << position_scale_mm
    << "\nflow_scale_mm=" << flow_scale_mm << "\ndetector_gain=" << detector_gain
    << "\nseed=" << seed << "\n";
  return o.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParameterError("model config: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    try {
      if (key == "channels") c.channels = std::stoul(val);
      else if (key == "bands") c.bands = std::stoul(val);
      else if (key == "k") c.k = std::stoul(val);
      else if (key == "dilations") {
        c.dilations.clear();
        std::istringstream ds(val);
        std::string item;
        while (std::getline(ds, item, ',')) c.dilations.push_back(std::stoul(item));
      } else if (key == "cell") c.cell = std::stoul(val);
      else if (key == "detector_channels") c.detector_channels = std::stoul(val);
      else if (key == "patch") c.patch = std::stoul(val);
      else if (key == "match_radius_px") c.match_radius_px = std::stod(val);
      else if (key == "mutual_check") c.mutual_check = std::stoi(val) != 0;
      else if (key == "match_temperature") c.match_temperature = std::stod(val);
      else if (key == "detect_temperature") c.detect_temperature = std::stod(val);
      else if (key == "detect_window") c.detect_window = std::stoul(val);
      else if (key == "disparity_ratio") c.disparity_ratio = std::stod(val);
      else if (key == "depth_ref_mm") c.depth_ref_mm = std::stod(val);
      else if (key == "position_scale_mm") c.position_scale_mm = std::stod(val);
      else if (key == "flow_scale_mm") c.flow_scale_mm = std::stod(val);
      else if (key == "detector_gain") c.detector_gain = std::stod(val);
      else if (key == "seed") c.seed = std::stoull(val);
      else throw ParameterError("model config: unknown key '" + key + "'");
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ParameterError*>(&e)) throw;
      throw ParameterError("model config: bad value for '" + key + "'");
    }
  }
  c.validate();
  return c;
}

ad::ParameterStore init_parameters(const ModelConfig& cfg) {
  cfg.validate();
  Init init(cfg.seed);
  ad::ParameterStore s;
  const std::size_t c = cfg.channels, dc = cfg.detector_channels;
  const std::size_t w1 = ad::fourier_width(1, cfg.bands), w2 = ad::fourier_width(2, cfg.bands),
                    w3 = ad::fourier_width(3, cfg.bands);

  s.add("detector.conv1.w", init.normal({dc, 1, 3, 3}, std::sqrt(2.0 / 9.0)));
  s.add("detector.conv1.b", Tensor::filled({dc}, 0.0));
  s.add("detector.conv2.w", init.normal({dc, dc, 3, 3}, std::sqrt(2.0 / (9.0 * dc))));
  s.add("detector.conv2.b", Tensor::filled({dc}, 0.0));
  s.add("detector.conv3.w", init.normal({1, dc, 1, 1}, cfg.detector_gain / std::sqrt(double(dc))));

  add_linear(s, init, "descriptor.offset", w2, c);
  add_linear(s, init, "descriptor.fc1", cfg.patch * cfg.patch + c, c, std::sqrt(2.0));
  add_linear(s, init, "descriptor.fc2", c, c);

  add_linear(s, init, "stereo.enc_u", w1, c);
  add_linear(s, init, "stereo.enc_u2", w1, c);
  add_linear(s, init, "stereo.gamma_d", c, c, std::sqrt(2.0));
  add_linear(s, init, "stereo.gamma_e", c, c, std::sqrt(2.0));
  add_linear(s, init, "stereo.enc_fdist", w1, c);
  add_linear(s, init, "stereo.enc_udist", w1, c);
  for (std::size_t l = 0; l < cfg.dilations.size(); ++l)
    add_gat(s, init, "stereo.gat" + std::to_string(l), c);
  add_linear(s, init, "stereo.query", w2, c);
  add_gat(s, init, "stereo.interp", c);
  add_linear(s, init, "stereo.head", c, 1, 1e-3);
  // Disparity starts as the attention-weighted match disparity of nearby nodes.
  reserve_carrier(s, "stereo", cfg.dilations.size(), 1,
                  {"enc_u", "enc_u2", "gamma_d", "gamma_e", "enc_fdist"});
  set_identity(s, "stereo.enc_udist", 1, 1.0);
  s.get_mut("stereo.head.w").at(0, 0) = 1.0;

  add_linear(s, init, "flow.enc_p", w3, c);
  add_linear(s, init, "flow.enc_p2", w3, c);
  add_linear(s, init, "flow.gamma_d", c, c, std::sqrt(2.0));
  add_linear(s, init, "flow.gamma_e", c, c, std::sqrt(2.0));
  add_linear(s, init, "flow.enc_fdist", w1, c);
  add_linear(s, init, "flow.enc_pdist", w1, c);
  for (std::size_t l = 0; l < cfg.dilations.size(); ++l)
    add_gat(s, init, "flow.gat" + std::to_string(l), c);
  add_linear(s, init, "flow.query", w3, c);
  add_gat(s, init, "flow.interp", c);
  add_linear(s, init, "flow.head", c, 3, 1e-3);
  // Flow starts as the attention-weighted 3D displacement of nearby matches.
  reserve_carrier(s, "flow", cfg.dilations.size(), 3,
                  {"gamma_d", "gamma_e", "enc_fdist", "enc_pdist"});
  set_identity(s, "flow.enc_p", 3, -1.0);
  set_identity(s, "flow.enc_p2", 3, 1.0);
  for (std::size_t j = 0; j < 3; ++j)
    s.get_mut("flow.head.w").at(j, j) = cfg.position_scale_mm / cfg.flow_scale_mm;

  s.add("__config.channels", Tensor::scalar(double(c)));
  s.add("__config.k", Tensor::scalar(double(cfg.k)));
  s.add("__config.bands", Tensor::scalar(double(cfg.bands)));
  s.add("__config.detector_channels", Tensor::scalar(double(dc)));
  s.add("__config.cell", Tensor::scalar(double(cfg.cell)));
  s.add("__config.patch", Tensor::scalar(double(cfg.patch)));
  std::vector<double> dil(cfg.dilations.begin(), cfg.dilations.end());
  s.add("__config.dilations", Tensor({dil.size()}, dil));
  s.add("__config.depth_ref_mm", Tensor::scalar(cfg.depth_ref_mm));
  s.add("__config.position_scale_mm", Tensor::scalar(cfg.position_scale_mm));
  s.add("__config.flow_scale_mm", Tensor::scalar(cfg.flow_scale_mm));
  // Stored in hundredths so the f32 file round-trips it exactly.
  s.add("__config.disparity_ratio_x100", Tensor::scalar(std::round(cfg.disparity_ratio * 100.0)));
  return s;
}

ModelConfig config_from_parameters(const ad::ParameterStore& p) {
  ModelConfig c;
  auto count = [&](const char* key, std::size_t& field) {
    if (p.contains(key)) field = static_cast<std::size_t>(std::llround(p.get(key).item()));
  };
  auto real = [&](const char* key, double& field) {
    if (p.contains(key)) field = p.get(key).item();
  };
  count("__config.channels", c.channels);
  count("__config.k", c.k);
  count("__config.bands", c.bands);
  count("__config.detector_channels", c.detector_channels);
  count("__config.cell", c.cell);
  count("__config.patch", c.patch);
  if (p.contains("__config.dilations")) {
    c.dilations.clear();
    for (double d : p.get("__config.dilations").values())
      c.dilations.push_back(static_cast<std::size_t>(std::llround(d)));
  }
  real("__config.depth_ref_mm", c.depth_ref_mm);
  real("__config.position_scale_mm", c.position_scale_mm);
  real("__config.flow_scale_mm", c.flow_scale_mm);
  if (p.contains("__config.disparity_ratio_x100"))
    c.disparity_ratio = p.get("__config.disparity_ratio_x100").item() / 100.0;
  return c;
}

void check_compatible(const ModelConfig& cfg, const ad::ParameterStore& params) {
  const ModelConfig stored = config_from_parameters(params);
  auto mismatch = [](const std::string& what, double want, double have) {
    throw ParameterError("weights incompatible: " + what + " is " + std::to_string(have) +
                         ", config expects " + std::to_string(want));
  };
  if (stored.channels != cfg.channels) mismatch("channels", cfg.channels, stored.channels);
  if (stored.k != cfg.k) mismatch("k", cfg.k, stored.k);
  if (stored.bands != cfg.bands) mismatch("bands", cfg.bands, stored.bands);
  if (stored.dilations != cfg.dilations)
    mismatch("layer count", cfg.dilations.size(), stored.dilations.size());
  const ad::ParameterStore reference = init_parameters(cfg);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const auto& name = reference.name(i);
    if (is_metadata(name)) continue;
    if (!params.contains(name)) throw ParameterError("weights incompatible: missing " + name);
    if (params.get(name).shape() != reference.value(i).shape())
      throw ParameterError("weights incompatible: " + name + " has shape " +
                           ad::shape_string(params.get(name).shape()) + ", expected " +
                           ad::shape_string(reference.value(i).shape()));
  }
}

ad::ParameterStore weights_only(const ad::ParameterStore& params) {
  ad::ParameterStore out;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params.name(i).rfind("__adam", 0) != 0 && params.name(i) != "__step")
      out.add(params.name(i), params.value(i));
  return out;
}

}  // namespace sendd::model
