#include "endotrack/tiplocate/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "endotrack/error.hpp"

namespace endotrack::tiplocate {

namespace fs = std::filesystem;
using nlohmann::json;

double iou(const Box& a, const Box& b) {
  const double ox = std::max(0.0, std::min(a.center.x() + a.side / 2, b.center.x() + b.side / 2) -
                                      std::max(a.center.x() - a.side / 2, b.center.x() - b.side / 2));
  const double oy = std::max(0.0, std::min(a.center.y() + a.side / 2, b.center.y() + b.side / 2) -
                                      std::max(a.center.y() - a.side / 2, b.center.y() - b.side / 2));
  const double inter = ox * oy;
  const double uni = a.side * a.side + b.side * b.side - inter;
  return uni > 0 ? inter / uni : 0.0;
}

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int rows = static_cast<int>(cost.size());
  if (rows == 0) return {};
  const int cols = static_cast<int>(cost[0].size());
  if (cols == 0) return std::vector<int>(rows, -1);
  if (rows > cols) {
    std::vector<std::vector<double>> t(cols, std::vector<double>(rows));
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) t[j][i] = cost[i][j];
    const auto col_to_row = hungarian(t);
    std::vector<int> out(rows, -1);
    for (int j = 0; j < cols; ++j)
      if (col_to_row[j] >= 0) out[col_to_row[j]] = j;
    return out;
  }
  // Potentials method, rows <= cols, 1-based internally.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0), v(cols + 1, 0);
  std::vector<int> p(cols + 1, 0), way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> out(rows, -1);
  for (int j = 1; j <= cols; ++j)
    if (p[j] > 0) out[p[j] - 1] = j - 1;
  return out;
}

MatchCounts match_tips(const std::vector<Vec2>& truth, const std::vector<Vec2>& predicted, double box_side,
                       double min_iou) {
  MatchCounts c;
  if (truth.empty() || predicted.empty()) {
    c.fp = static_cast<int>(predicted.size());
    c.fn = static_cast<int>(truth.size());
    return c;
  }
  std::vector<std::vector<double>> cost(truth.size(), std::vector<double>(predicted.size()));
  for (size_t i = 0; i < truth.size(); ++i)
    for (size_t j = 0; j < predicted.size(); ++j)
      cost[i][j] = 1.0 - iou({truth[i], box_side}, {predicted[j], box_side});
  const auto assign = hungarian(cost);
  for (size_t i = 0; i < truth.size(); ++i)
    if (assign[i] >= 0 && 1.0 - cost[i][assign[i]] >= min_iou) ++c.tp;
  c.fn = static_cast<int>(truth.size()) - c.tp;
  c.fp = static_cast<int>(predicted.size()) - c.tp;
  return c;
}

void DetectionMetrics::add(const MatchCounts& c, bool has_truth) {
  tp += c.tp;
  fp += c.fp;
  fn += c.fn;
  ++frames;
  if (has_truth) {
    ++frames_with_tips;
    if (c.tp > 0) ++frames_hit;
  }
}

void DetectionMetrics::finish() {
  precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  at_least_one_rate = frames_with_tips > 0 ? static_cast<double>(frames_hit) / frames_with_tips : 0.0;
}

namespace {

template <typename T>
T field(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw Error(Errc::ManifestInvalid, where + key + " is missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::ManifestInvalid, where + key + " has the wrong type");
  }
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).string();
}

}  // namespace

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ManifestInvalid, "cannot open manifest " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ManifestInvalid, std::string("manifest is not valid JSON: ") + e.what());
  }
  CorpusManifest m;
  m.base_dir = fs::path(path).parent_path().string();
  m.image_width = field<int>(j, "image_width", "");
  m.image_height = field<int>(j, "image_height", "");
  if (m.image_width <= 0 || m.image_height <= 0) throw Error(Errc::ManifestInvalid, "image size must be positive");
  m.box_side = j.contains("box_side") ? field<double>(j, "box_side", "") : 200.0 * m.image_height / 1080.0;
  const auto frames = field<json>(j, "frames", "");
  if (!frames.is_array()) throw Error(Errc::ManifestInvalid, "frames must be an array");
  for (size_t i = 0; i < frames.size(); ++i) {
    const std::string where = "frames[" + std::to_string(i) + "].";
    const json& f = frames[i];
    CorpusFrame cf;
    cf.mask = resolve(m.base_dir, field<std::string>(f, "mask", where));
    if (f.contains("left")) cf.left = resolve(m.base_dir, field<std::string>(f, "left", where));
    if (f.contains("right")) cf.right = resolve(m.base_dir, field<std::string>(f, "right", where));
    if (f.contains("tags")) cf.tags = field<std::vector<std::string>>(f, "tags", where);
    const auto tips = field<json>(f, "tips", where);
    for (size_t k = 0; k < tips.size(); ++k) {
      const std::string tw = where + "tips[" + std::to_string(k) + "].";
      GroundTruthTip t;
      t.p = Vec2(field<double>(tips[k], "x", tw), field<double>(tips[k], "y", tw));
      const auto side = field<std::string>(tips[k], "side", tw);
      if (side != "LEFT" && side != "RIGHT") throw Error(Errc::ManifestInvalid, tw + "side must be LEFT or RIGHT");
      t.side = side == "LEFT" ? Side::Left : Side::Right;
      t.visible = tips[k].contains("visible") ? field<bool>(tips[k], "visible", tw) : true;
      cf.tips.push_back(t);
    }
    m.frames.push_back(std::move(cf));
  }
  return m;
}

void save_manifest(const std::string& path, const CorpusManifest& m) {
  json j;
  j["image_width"] = m.image_width;
  j["image_height"] = m.image_height;
  j["box_side"] = m.box_side;
  j["frames"] = json::array();
  const fs::path base = fs::path(path).parent_path();
  auto rel = [&](const std::string& p) { return p.empty() ? p : fs::relative(p, base).generic_string(); };
  for (const auto& f : m.frames) {
    json jf;
    jf["mask"] = rel(f.mask);
    if (!f.left.empty()) jf["left"] = rel(f.left);
    if (!f.right.empty()) jf["right"] = rel(f.right);
    if (!f.tags.empty()) jf["tags"] = f.tags;
    jf["tips"] = json::array();
    for (const auto& t : f.tips)
      jf["tips"].push_back({{"x", t.p.x()}, {"y", t.p.y()}, {"side", to_string(t.side)}, {"visible", t.visible}});
    j["frames"].push_back(std::move(jf));
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out << j.dump(1) << '\n';
}

DetectionMetrics evaluate_corpus(const CorpusManifest& m, const LocalizerConfig& cfg, Exec exec) {
  const auto start = std::chrono::steady_clock::now();
  const auto geo = ProcessingGeometry::for_image(m.image_width, m.image_height);
  const int n = static_cast<int>(m.frames.size());
  std::vector<MatchCounts> counts(n);
  std::vector<char> has_truth(n, 0);
  std::vector<std::string> errors(n);
  auto one = [&](int i) {
    try {
      const auto& f = m.frames[i];
      const BinaryMask mask = read_mask(f.mask);
      std::vector<Vec2> truth, pred;
      for (const auto& t : f.tips)
        if (t.visible) truth.push_back(t.p);
      try {
        for (const auto& d : detect_instruments(mask, geo, cfg, Exec::Serial))
          pred.insert(pred.end(), d.tips.begin(), d.tips.end());
      } catch (const Error& e) {
        if (e.code() != Errc::AmbiguousSides) throw;
      }
      counts[i] = match_tips(truth, pred, m.box_side);
      has_truth[i] = !truth.empty();
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) one(i);
  } else {
    for (int i = 0; i < n; ++i) one(i);
  }
  for (int i = 0; i < n; ++i)
    if (!errors[i].empty()) throw Error(Errc::ManifestInvalid, "frame " + std::to_string(i) + ": " + errors[i]);
  DetectionMetrics metrics;
  for (int i = 0; i < n; ++i) metrics.add(counts[i], has_truth[i]);
  metrics.finish();
  metrics.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return metrics;
}

}  // namespace endotrack::tiplocate
