// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "sendd/autodiff/ops.hpp"
#include "sendd/errors.hpp"
#include "sendd/pipeline/pipeline.hpp"
#include "sendd/train/schedule.hpp"

namespace sendd::train {

using ad::ParameterStore;
using ad::Tensor;

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

PairRef draw(const TrainConfig& cfg, const std::vector<synth::Clip>& clips, std::mt19937_64& rng) {
  PairRef r;
  r.clip = std::uniform_int_distribution<std::size_t>(0, clips.size() - 1)(rng);
  const int n = clips[r.clip].frames();
  if (n < 2) throw ContractError("training clips need at least two frames");
  const int hi = std::min(cfg.skip_max, n - 1);
  const int lo = std::min(cfg.skip_min, hi);
  r.skip = std::uniform_int_distribution<int>(lo, hi)(rng);
  r.frame = std::uniform_int_distribution<int>(0, n - 1 - r.skip)(rng);
  return r;
}

pipeline::TrainingSample sample_of(const std::vector<synth::Clip>& clips, const PairRef& r) {
  const auto& c = clips[r.clip];
  return {&c.left[r.frame], &c.right[r.frame], &c.left[r.frame + r.skip],
          &c.right[r.frame + r.skip]};
}

bool finite(const Tensor& t) {
  for (double v : t.values())
    if (!std::isfinite(v)) return false;
  return true;
}

struct Adam {
  std::map<std::string, Tensor> m, v;
};

ParameterStore with_state(const ParameterStore& params, const Adam& adam, long step) {
  ParameterStore out = params;
  for (const auto& [name, t] : adam.m) out.add("__adam.m/" + name, t);
  for (const auto& [name, t] : adam.v) out.add("__adam.v/" + name, t);
  out.add("__step", Tensor::scalar(static_cast<double>(step)));
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  weights.validate();
  if (steps < 1 || batch_size < 1) throw ParameterError("train: steps and batch size must be >= 1");
  if (!(minlr > 0.0) || !(minlr < maxlr)) throw ParameterError("train: need 0 < minlr < maxlr");
  if (skip_min < 1 || skip_max < skip_min) throw ParameterError("train: bad frame skip range");
  if (checkpoint_every < 1) throw ParameterError("train: checkpoint interval must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 &&
        adam_eps > 0.0))
    throw ParameterError("train: bad Adam coefficients");
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "steps=" << steps << "\nbatch_size=" << batch_size << "\nmaxlr=" << maxlr
     << "\nminlr=" << minlr << "\nskip_min=" << skip_min << "\nskip_max=" << skip_max
     << "\nseed=" << seed << "\ncheckpoint_every=" << checkpoint_every
     << "\nadam_beta1=" << adam_beta1 << "\nadam_beta2=" << adam_beta2
     << "\nadam_eps=" << adam_eps << "\nalpha=" << weights.alpha << "\nbeta=" << weights.beta
     << "\nlambda_d=" << weights.lambda_d << "\nlambda_F=" << weights.lambda_F
     << "\nlambda_D=" << weights.lambda_D << "\n";
  std::istringstream m(model.to_text());
  std::string line;
  while (std::getline(m, line))
    if (!line.empty()) os << "model." << line << "\n";
  return os.str();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line, model_text;
  std::map<std::string, std::string> kv;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("train config line without '=': " + line);
    const std::string key = line.substr(0, eq);
    if (key.rfind("model.", 0) == 0)
      model_text += line.substr(6) + "\n";
    else
      kv[key] = line.substr(eq + 1);
  }
  auto take = [&](const char* key, auto& field) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    std::istringstream v(it->second);
    if (!(v >> field)) throw FormatError(std::string("train config: bad value for ") + key);
    kv.erase(it);
  };
  take("steps", c.steps);
  take("batch_size", c.batch_size);
  take("maxlr", c.maxlr);
  take("minlr", c.minlr);
  take("skip_min", c.skip_min);
  take("skip_max", c.skip_max);
  take("seed", c.seed);
  take("checkpoint_every", c.checkpoint_every);
  take("adam_beta1", c.adam_beta1);
  take("adam_beta2", c.adam_beta2);
  take("adam_eps", c.adam_eps);
  take("alpha", c.weights.alpha);
  take("beta", c.weights.beta);
  take("lambda_d", c.weights.lambda_d);
  take("lambda_F", c.weights.lambda_F);
  take("lambda_D", c.weights.lambda_D);
  if (!kv.empty()) throw ParameterError("train config: unknown key " + kv.begin()->first);
  if (!model_text.empty()) c.model = model::ModelConfig::from_text(model_text);
  return c;
}

PairRef sample_pair(const TrainConfig& cfg, const std::vector<synth::Clip>& clips, long step,
                    int slot) {
  if (clips.empty()) throw ContractError("training needs at least one clip");
  auto rng = stream(cfg.seed, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(slot));
  return draw(cfg, clips, rng);
}

std::vector<PairRef> validation_pairs(const TrainConfig& cfg, const std::vector<synth::Clip>& clips,
                                      std::size_t count, std::uint64_t seed) {
  if (clips.empty()) throw ContractError("validation needs at least one clip");
  auto rng = stream(seed, 0xa11da7e5ULL, 0);
  std::vector<PairRef> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw(cfg, clips, rng));
  return out;
}

losses::LossLogRow mean_losses(const ParameterStore& params, const TrainConfig& cfg,
                               const std::vector<synth::Clip>& clips,
                               const std::vector<PairRef>& pairs, std::size_t* used) {
  losses::LossLogRow row;
  std::size_t n = 0;
  for (const auto& pr : pairs) {
    ad::Tape tape;
    ad::ParamBinding p(tape, params, false);
    const auto terms = pipeline::training_losses(p, cfg.model, clips[pr.clip].spec.rig,
                                                 sample_of(clips, pr), cfg.weights);
    if (!terms) continue;
    row.lp_stereo += terms->lp_stereo.item();
    row.lp_flow += terms->lp_flow.item();
    row.ls_flow += terms->ls_flow.item();
    row.ls_disp += terms->ls_disp.item();
    row.l_d += terms->l_d.item();
    row.total += losses::total_loss(*terms, cfg.weights).item();
    ++n;
  }
  if (n) {
    const double s = 1.0 / static_cast<double>(n);
    row.lp_stereo *= s;
    row.lp_flow *= s;
    row.ls_flow *= s;
    row.ls_disp *= s;
    row.l_d *= s;
    row.total *= s;
  }
  if (used) *used = n;
  return row;
}

TrainResult train(const TrainConfig& cfg, const std::vector<synth::Clip>& clips, const TrainIo& io) {
  cfg.validate();
  if (clips.empty()) throw ContractError("training needs at least one clip");
  TrainResult res;
  ParameterStore params = io.initial ? *io.initial : model::init_parameters(cfg.model);
  model::check_compatible(cfg.model, params);
  params = model::weights_only(params);
  Adam adam;
  long start = 0;
  if (io.resume) {
    const auto ck = ParameterStore::load(*io.resume);
    model::check_compatible(cfg.model, ck);
    params = model::weights_only(ck);
    for (std::size_t i = 0; i < ck.size(); ++i) {
      const auto& name = ck.name(i);
      if (name.rfind("__adam.m/", 0) == 0) adam.m[name.substr(9)] = ck.value(i);
      if (name.rfind("__adam.v/", 0) == 0) adam.v[name.substr(9)] = ck.value(i);
    }
    if (ck.contains("__step")) start = std::lround(ck.get("__step").item());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.name(i);
    if (model::is_metadata(name)) continue;
    if (!adam.m.contains(name)) adam.m[name] = Tensor(params.value(i).shape());
    if (!adam.v.contains(name)) adam.v[name] = Tensor(params.value(i).shape());
  }

  const bool writing = !io.out_dir.empty();
  std::ofstream log;
  if (writing) {
    std::filesystem::create_directories(io.out_dir);
    const auto path = io.out_dir / kLossLogName;
    const bool append = io.resume && std::filesystem::exists(path);
    log.open(path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw FormatError("cannot write " + path.string());
    if (!append) losses::write_loss_log_header(log);
  }

  ParameterStore last_good = params;
  auto checkpoint = [&](long step) {
    last_good = params;
    if (writing) with_state(params, adam, step).save(io.out_dir / kCheckpointName);
  };

  long step = start;
  for (; step < cfg.steps; ++step) {
    const double lr = one_cycle_lr(step, cfg.steps, cfg.maxlr, cfg.minlr);
    ad::Tape tape;
    ad::ParamBinding p(tape, params, true);
    std::vector<ad::Var> totals;
    losses::LossLogRow row;
    row.step = step;
    row.lr = lr;
    bool bad = false;
    try {
      for (int slot = 0; slot < cfg.batch_size; ++slot) {
        const auto pr = sample_pair(cfg, clips, step, slot);
        const auto terms = pipeline::training_losses(p, cfg.model, clips[pr.clip].spec.rig,
                                                     sample_of(clips, pr), cfg.weights);
        if (!terms) {
          ++res.skipped_samples;
          continue;
        }
        row.lp_stereo += terms->lp_stereo.item();
        row.lp_flow += terms->lp_flow.item();
        row.ls_flow += terms->ls_flow.item();
        row.ls_disp += terms->ls_disp.item();
        row.l_d += terms->l_d.item();
        totals.push_back(losses::total_loss(*terms, cfg.weights));
      }
    } catch (const NumericError&) {
      bad = true;
    }
    std::vector<Tensor> grads;
    if (!bad && !totals.empty()) {
      const double s = 1.0 / static_cast<double>(totals.size());
      ad::Var loss = ad::scale(ad::add_n(totals), s);
      row.total = loss.item();
      row.lp_stereo *= s;
      row.lp_flow *= s;
      row.ls_flow *= s;
      row.ls_disp *= s;
      row.l_d *= s;
      bad = !std::isfinite(row.total);
      if (!bad) {
        tape.backward(loss);
        grads = p.gradients();
        for (const auto& g : grads) bad = bad || !finite(g);
      }
    }
    if (bad) {
      res.diverged = true;
      res.message = "loss diverged at step " + std::to_string(step) +
                    "; returning the last checkpoint";
      res.params = last_good;
      res.steps_done = step;
      return res;
    }
    if (totals.empty()) continue;

    const double t = static_cast<double>(step + 1);
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& name = params.name(i);
      if (model::is_metadata(name)) continue;
      auto w = params.value(i).values();
      auto m = adam.m[name].values();
      auto v = adam.v[name].values();
      const auto& g = grads[i].values();
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * g[j];
        v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * g[j] * g[j];
        w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.adam_eps);
      }
    }
    res.log.push_back(row);
    if (writing) {
      losses::write_loss_log_row(log, row);
      log.flush();
    }
    if (io.progress && (step % io.progress_every == 0 || step + 1 == cfg.steps))
      *io.progress << "step " << step << " loss " << row.total << " lr " << lr << std::endl;
    if ((step + 1) % cfg.checkpoint_every == 0) checkpoint(step + 1);
  }
  checkpoint(step);
  res.params = params;
  res.steps_done = step;
  if (writing) params.save(io.out_dir / kWeightsName);
  res.message = "ok";
  return res;
}

std::vector<synth::Clip> make_corpus(std::size_t count, int frames, std::uint64_t seed,
                                     const geometry::CameraRig& rig) {
  std::vector<synth::Clip> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    synth::SceneSpec s;
    s.seed = seed * 1000003ULL + i;
    s.rig = rig;
    s.frames = frames;
    s.surface = i % 2 ? synth::Surface::Sine : synth::Surface::Plane;
    s.motion = i % 3 == 2 ? synth::Motion::Deform : synth::Motion::Rigid;
    s.depth_mm = 50.0 + 20.0 * u(rng);
    s.velocity_mm = {0.5 * (u(rng) - 0.5), 0.5 * (u(rng) - 0.5), 0.16 * (u(rng) - 0.5)};
    s.markers = 0;
    out.push_back(synth::generate_clip(s, false));
  }
  return out;
}

}  // namespace sendd::train
