// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/train/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "sendd/errors.hpp"

namespace sendd::train {
namespace {

double dist(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }
double dist(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

template <class V>
EndpointErrors epe(std::span<const std::optional<V>> pred, std::span<const std::optional<V>> gt) {
  EndpointErrors e;
  const std::size_t n = std::max(pred.size(), gt.size());
  for (std::size_t m = 0; m < n; ++m) {
    const bool hp = m < pred.size() && pred[m], hg = m < gt.size() && gt[m];
    if (!hp || !hg) {
      ++e.missing;
      continue;
    }
    e.errors.push_back(dist(*pred[m], *gt[m]));
    e.markers.push_back(m);
  }
  return e;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != columns)
      throw FormatError(path.filename().string() + ": expected " + std::to_string(columns) +
                        " columns in: " + line);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::optional<double> sample_depth(const geometry::DepthMap& d, const Vec2& p) {
  if (!(p.x >= 0 && p.y >= 0 && p.x <= d.width - 1 && p.y <= d.height - 1)) return std::nullopt;
  const int x0 = std::min(static_cast<int>(p.x), d.width - 2 < 0 ? 0 : d.width - 2);
  const int y0 = std::min(static_cast<int>(p.y), d.height - 2 < 0 ? 0 : d.height - 2);
  const int x1 = std::min(x0 + 1, d.width - 1), y1 = std::min(y0 + 1, d.height - 1);
  const double fx = p.x - x0, fy = p.y - y0;
  auto at = [&](int x, int y) -> std::optional<double> {
    const std::size_t i = static_cast<std::size_t>(y) * d.width + x;
    if (!d.valid.empty() && !d.valid[i]) return std::nullopt;
    return d.data[i * d.channels];
  };
  const auto a = at(x0, y0), b = at(x1, y0), c = at(x0, y1), e = at(x1, y1);
  if (!a || !b || !c || !e) return std::nullopt;
  return (1 - fy) * ((1 - fx) * *a + fx * *b) + fy * ((1 - fx) * *c + fx * *e);
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", *v);
  return buf;
}

std::string fmt(double v) { return fmt(std::optional<double>(v)); }

}  // namespace

EndpointErrors endpoint_error(std::span<const std::optional<Vec2>> pred,
                              std::span<const std::optional<Vec2>> gt) {
  return epe(pred, gt);
}

EndpointErrors endpoint_error(std::span<const std::optional<Vec3>> pred,
                              std::span<const std::optional<Vec3>> gt) {
  return epe(pred, gt);
}

double chamfer_distance(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.empty() || b.empty()) throw ContractError("chamfer_distance: empty point set");
  auto directed = [](std::span<const Vec2> from, std::span<const Vec2> to) {
    double s = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y));
      s += std::sqrt(best);
    }
    return s / static_cast<double>(from.size());
  };
  return 0.5 * (directed(a, b) + directed(b, a));
}

Aggregate aggregate(std::span<const double> v) {
  Aggregate a;
  a.count = v.size();
  if (v.empty()) return a;
  double s = 0.0;
  for (double x : v) s += x;
  a.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - a.mean) * (x - a.mean);
    a.sem = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
  }
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  a.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return a;
}

std::vector<Query> marker_queries(const std::vector<int>& labels, int width, int markers) {
  std::vector<Query> out;
  const auto centers = synth::marker_centroids(labels, width, markers);
  for (int m = 0; m < markers; ++m)
    if (centers[m]) out.push_back({out.size(), *centers[m], m + 1, true});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l < 1 || l > markers) continue;
    out.push_back({out.size(), {static_cast<double>(i % width), static_cast<double>(i / width)}, l,
                   false});
  }
  return out;
}

void write_queries_csv(std::ostream& out, const std::vector<Query>& qs) {
  out << "query_id,u,v,marker,kind\n";
  char buf[128];
  for (const auto& q : qs) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%d,%s\n", q.id, q.uv.x, q.uv.y, q.marker,
                  q.center ? "center" : "mask");
    out << buf;
  }
}

std::vector<Query> read_queries_csv(const std::filesystem::path& path) {
  std::vector<Query> out;
  for (const auto& r : read_csv(path, 5)) {
    Query q;
    q.id = std::stoul(r[0]);
    q.uv = {std::stod(r[1]), std::stod(r[2])};
    q.marker = std::stoi(r[3]);
    if (r[4] != "center" && r[4] != "mask") throw FormatError("queries: unknown kind " + r[4]);
    q.center = r[4] == "center";
    out.push_back(q);
  }
  return out;
}

std::vector<TrackRow> read_track_csv(const std::filesystem::path& path) {
  std::vector<TrackRow> out;
  for (const auto& r : read_csv(path, 8)) {
    TrackRow t;
    t.query = std::stoul(r[0]);
    t.frame = std::stoi(r[1]);
    t.uv = {std::stod(r[2]), std::stod(r[3])};
    t.xyz = {std::stod(r[4]), std::stod(r[5]), std::stod(r[6])};
    t.valid = r[7] == "1";
    out.push_back(t);
  }
  return out;
}

ClipEval evaluate_clip(const std::string& name, const synth::Clip& clip,
                       const std::vector<Query>& queries, const std::vector<TrackRow>& tracks) {
  ClipEval ce;
  ce.name = name;
  ce.frames = clip.frames();
  const int markers = clip.spec.markers;
  const auto& rig = clip.spec.rig;
  std::map<std::size_t, const Query*> by_id;
  for (const auto& q : queries) by_id[q.id] = &q;
  std::map<int, std::vector<const TrackRow*>> by_frame;
  for (const auto& t : tracks) by_frame[t.frame].push_back(&t);

  int last = -1;
  for (const auto& [frame, rows] : by_frame) {
    if (frame <= 0 || frame >= clip.frames()) continue;
    if (static_cast<std::size_t>(frame) >= clip.gt.labels.size()) continue;
    std::vector<std::optional<Vec2>> pred2(markers);
    std::vector<std::optional<Vec3>> pred3(markers), gt3(markers);
    std::vector<std::vector<Vec2>> tracked(markers), truth(markers);
    for (const auto* t : rows) {
      auto it = by_id.find(t->query);
      if (it == by_id.end() || !t->valid) continue;
      const Query& q = *it->second;
      if (q.marker < 1 || q.marker > markers) continue;
      if (q.center) {
        pred2[q.marker - 1] = t->uv;
        pred3[q.marker - 1] = t->xyz;
      } else {
        tracked[q.marker - 1].push_back(t->uv);
      }
    }
    const auto& labels = clip.gt.labels[frame];
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] >= 1 && labels[i] <= markers)
        truth[labels[i] - 1].push_back(
            {static_cast<double>(i % rig.width), static_cast<double>(i / rig.width)});
    const auto& gt2 = clip.gt.centers[frame];
    for (int m = 0; m < markers; ++m)
      if (gt2[m]) gt3[m] = geometry::backproject(*gt2[m], sample_depth(clip.gt.depth[frame], *gt2[m]), rig);

    const auto e2 = endpoint_error(std::span<const std::optional<Vec2>>(pred2),
                                   std::span<const std::optional<Vec2>>(gt2));
    const auto e3 = endpoint_error(std::span<const std::optional<Vec3>>(pred3),
                                   std::span<const std::optional<Vec3>>(gt3));
    std::vector<MarkerError> here(markers);
    for (int m = 0; m < markers; ++m) {
      here[m].frame = frame;
      here[m].length_s = frame / clip.spec.fps;
      here[m].marker = m + 1;
      if (!tracked[m].empty() && !truth[m].empty())
        here[m].chamfer_px = chamfer_distance(tracked[m], truth[m]);
    }
    for (std::size_t i = 0; i < e2.errors.size(); ++i) here[e2.markers[i]].epe_px = e2.errors[i];
    for (std::size_t i = 0; i < e3.errors.size(); ++i) here[e3.markers[i]].epe_mm = e3.errors[i];
    for (auto& h : here)
      if (h.epe_px || h.epe_mm || h.chamfer_px) ce.markers.push_back(h);
    if (frame > last) {
      last = frame;
      ce.missing = e2.missing;
      std::vector<double> a, b, c;
      for (const auto& h : here) {
        if (h.epe_px) a.push_back(*h.epe_px);
        if (h.epe_mm) b.push_back(*h.epe_mm);
        if (h.chamfer_px) c.push_back(*h.chamfer_px);
      }
      ce.epe_px = mean_of(a);
      ce.epe_mm = mean_of(b);
      ce.chamfer_px = mean_of(c);
    }
  }
  ce.length_s = last > 0 ? last / clip.spec.fps : 0.0;
  return ce;
}

OracleTracks ground_truth_tracks(const synth::Clip& clip) {
  OracleTracks o;
  const int markers = clip.spec.markers, n = clip.frames();
  const auto& rig = clip.spec.rig;
  if (clip.gt.labels.size() != static_cast<std::size_t>(n))
    throw ContractError("ground_truth_tracks: clip has no marker ground truth");
  std::vector<std::vector<std::vector<Vec2>>> pixels(n, std::vector<std::vector<Vec2>>(markers));
  std::vector<std::size_t> most(markers, 0);
  for (int f = 0; f < n; ++f) {
    const auto& labels = clip.gt.labels[f];
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] >= 1 && labels[i] <= markers)
        pixels[f][labels[i] - 1].push_back(
            {static_cast<double>(i % rig.width), static_cast<double>(i / rig.width)});
    for (int m = 0; m < markers; ++m) most[m] = std::max(most[m], pixels[f][m].size());
  }
  for (int m = 0; m < markers; ++m) {
    const std::size_t id = o.queries.size();
    const auto& c0 = clip.gt.centers[0][m];
    o.queries.push_back({id, c0 ? *c0 : Vec2{}, m + 1, true});
    for (int f = 0; f < n; ++f) {
      const auto& c = clip.gt.centers[f][m];
      std::optional<Vec3> p;
      if (c) p = geometry::backproject(*c, sample_depth(clip.gt.depth[f], *c), rig);
      o.rows.push_back({id, f, c ? *c : Vec2{}, p ? *p : Vec3{}, p.has_value()});
    }
    for (std::size_t j = 0; j < most[m]; ++j) {
      const std::size_t qid = o.queries.size();
      const auto& first = pixels[0][m];
      o.queries.push_back({qid, first.empty() ? Vec2{} : first[j % first.size()], m + 1, false});
      for (int f = 0; f < n; ++f) {
        const auto& px = pixels[f][m];
        if (px.empty()) continue;
        o.rows.push_back({qid, f, px[j % px.size()], Vec3{}, true});
      }
    }
  }
  return o;
}

EvalReport build_report(std::vector<ClipEval> clips) {
  EvalReport r;
  r.clips = std::move(clips);
  std::vector<double> a, b, c;
  std::map<int, std::vector<double>> ca, cb, cc;
  for (const auto& ce : r.clips) {
    if (ce.epe_px) a.push_back(*ce.epe_px);
    if (ce.epe_mm) b.push_back(*ce.epe_mm);
    if (ce.chamfer_px) c.push_back(*ce.chamfer_px);
    r.missing += ce.missing;
    for (const auto& m : ce.markers) {
      const int bucket = std::max(1, static_cast<int>(std::ceil(m.length_s - 1e-9)));
      if (m.epe_px) ca[bucket].push_back(*m.epe_px);
      if (m.epe_mm) cb[bucket].push_back(*m.epe_mm);
      if (m.chamfer_px) cc[bucket].push_back(*m.chamfer_px);
      ca.try_emplace(bucket);
    }
  }
  r.epe_px = aggregate(a);
  r.epe_mm = aggregate(b);
  r.chamfer_px = aggregate(c);
  for (const auto& [bucket, vals] : ca) {
    CurvePoint p;
    p.length_s = bucket;
    p.epe_px = aggregate(vals);
    p.epe_mm = aggregate(cb[bucket]);
    p.chamfer_px = aggregate(cc[bucket]);
    r.curve.push_back(p);
  }
  return r;
}

void EvalReport::write_clips_csv(std::ostream& out) const {
  out << "clip,frames,length_s,epe_px,epe_mm,chamfer_px,missing\n";
  for (const auto& c : clips)
    out << c.name << ',' << c.frames << ',' << fmt(c.length_s) << ',' << fmt(c.epe_px) << ','
        << fmt(c.epe_mm) << ',' << fmt(c.chamfer_px) << ',' << c.missing << '\n';
}

void EvalReport::write_markers_csv(std::ostream& out) const {
  out << "clip,frame,length_s,marker,epe_px,epe_mm,chamfer_px\n";
  for (const auto& c : clips)
    for (const auto& m : c.markers)
      out << c.name << ',' << m.frame << ',' << fmt(m.length_s) << ',' << m.marker << ','
          << fmt(m.epe_px) << ',' << fmt(m.epe_mm) << ',' << fmt(m.chamfer_px) << '\n';
}

void EvalReport::write_curve_csv(std::ostream& out) const {
  out << "length_s,count,epe_px_mean,epe_px_sem,epe_px_median,epe_mm_mean,epe_mm_sem,"
         "epe_mm_median,chamfer_px_mean,chamfer_px_sem,chamfer_px_median\n";
  for (const auto& p : curve)
    out << fmt(p.length_s) << ',' << p.epe_px.count << ',' << fmt(p.epe_px.mean) << ','
        << fmt(p.epe_px.sem) << ',' << fmt(p.epe_px.median) << ',' << fmt(p.epe_mm.mean) << ','
        << fmt(p.epe_mm.sem) << ',' << fmt(p.epe_mm.median) << ',' << fmt(p.chamfer_px.mean)
        << ',' << fmt(p.chamfer_px.sem) << ',' << fmt(p.chamfer_px.median) << '\n';
}

void EvalReport::write_summary(std::ostream& out) const {
  char buf[256];
  auto line = [&](const char* what, const Aggregate& a, const char* unit) {
    std::snprintf(buf, sizeof buf, "%-16s %.3f +- %.3f %s (median %.3f, n=%zu)\n", what, a.mean,
                  a.sem, unit, a.median, a.count);
    out << buf;
  };
  out << "clips: " << clips.size() << ", markers missing at the last frame: " << missing << "\n";
  line("endpoint error", epe_px, "px");
  line("endpoint error", epe_mm, "mm");
  line("chamfer", chamfer_px, "px");
  out << "by clip length (s): mean endpoint error px / mm, chamfer px\n";
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "  %4.0f  %8.3f  %8.3f  %8.3f  (n=%zu)\n", p.length_s,
                  p.epe_px.mean, p.epe_mm.mean, p.chamfer_px.mean, p.epe_px.count);
    out << buf;
  }
}

}  // namespace sendd::train
