#include "realism/skyseg.hpp"

#include <Eigen/Dense>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

#include "realism/error.hpp"

namespace realism {

namespace {

struct RegionStats {
  double n = 0;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d sumsq = Eigen::Vector3d::Zero();

  Eigen::Vector3d mean() const { return sum / n; }
  double sse() const { return (sumsq - sum.cwiseProduct(sum) / n).sum(); }
};

double ward_cost(const RegionStats& a, const RegionStats& b) {
  return a.n * b.n / (a.n + b.n) * (a.mean() - b.mean()).squaredNorm();
}

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

void check_segment_map(const SegmentMap& seg) {
  if (seg.n_segments <= 0) throw InvalidArgument("segment map has no segments");
  std::vector<char> present(seg.n_segments, 0);
  for (Index i = 0; i < seg.labels.size(); ++i) {
    int l = seg.labels.data()[i];
    if (l < 0 || l >= seg.n_segments) throw InvalidArgument("segment label out of range");
    present[l] = 1;
  }
  if (std::find(present.begin(), present.end(), 0) != present.end())
    throw InvalidArgument("segment map has an empty label");
}

SegmentMap a3c_cluster(const Image& image, int target_segments, const A3CConfig& config,
                       std::vector<MergeStep>* merge_log) {
  if (image.empty()) throw InvalidArgument("a3c_cluster: empty image");
  const Index h = image.height(), w = image.width();
  if (target_segments < 2 || target_segments > h * w)
    throw InvalidArgument("a3c_cluster: target_segments must be in [2, pixel count], got " +
                          std::to_string(target_segments));
  int block = std::max(1, config.seed_block);
  auto seed_count = [&](int b) { return ((h + b - 1) / b) * ((w + b - 1) / b); };
  while (block > 1 && seed_count(block) < target_segments) block /= 2;

  const Index by = (h + block - 1) / block, bx = (w + block - 1) / block;
  const int n_seeds = static_cast<int>(by * bx);

  std::vector<RegionStats> stats(n_seeds);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      auto& s = stats[(r / block) * bx + c / block];
      Eigen::Vector3d px(image.channel[0](r, c), image.channel[1](r, c), image.channel[2](r, c));
      s.n += 1;
      s.sum += px;
      s.sumsq += px.cwiseProduct(px);
    }
  }

  std::vector<std::set<int>> neighbors(n_seeds);
  for (Index y = 0; y < by; ++y) {
    for (Index x = 0; x < bx; ++x) {
      int id = static_cast<int>(y * bx + x);
      if (x + 1 < bx) {
        neighbors[id].insert(id + 1);
        neighbors[id + 1].insert(id);
      }
      if (y + 1 < by) {
        neighbors[id].insert(static_cast<int>(id + bx));
        neighbors[id + bx].insert(id);
      }
    }
  }

  using Candidate = std::tuple<double, int, int, int, int>;  // cost, a, b, version a, version b
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap;
  std::vector<int> version(n_seeds, 0);
  std::vector<char> alive(n_seeds, 1);
  for (int a = 0; a < n_seeds; ++a)
    for (int b : neighbors[a])
      if (a < b) heap.emplace(ward_cost(stats[a], stats[b]), a, b, 0, 0);

  std::vector<int> parent(n_seeds);
  std::iota(parent.begin(), parent.end(), 0);
  double total = 0.0;
  for (const auto& s : stats) total += s.sse();

  int regions = n_seeds;
  while (regions > target_segments && !heap.empty()) {
    auto [cost, a, b, va, vb] = heap.top();
    heap.pop();
    if (!alive[a] || !alive[b] || version[a] != va || version[b] != vb) continue;

    // b is absorbed into a (a < b always holds for queued pairs).
    const bool adjacent = neighbors[a].contains(b);
    stats[a].n += stats[b].n;
    stats[a].sum += stats[b].sum;
    stats[a].sumsq += stats[b].sumsq;
    alive[b] = 0;
    parent[b] = a;
    neighbors[a].erase(b);
    for (int nb : neighbors[b]) {
      if (nb == a) continue;
      neighbors[nb].erase(b);
      neighbors[nb].insert(a);
      neighbors[a].insert(nb);
    }
    neighbors[b].clear();
    ++version[a];
    for (int nb : neighbors[a]) {
      int lo = std::min(a, nb), hi = std::max(a, nb);
      heap.emplace(ward_cost(stats[lo], stats[hi]), lo, hi, version[lo], version[hi]);
    }
    total += cost;
    --regions;
    if (merge_log) merge_log->push_back(MergeStep{a, b, cost, total, adjacent});
  }

  SegmentMap out;
  out.labels.resize(h, w);
  std::vector<int> compact(n_seeds, -1);
  int next = 0;
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      int root = find_root(parent, static_cast<int>((r / block) * bx + c / block));
      if (compact[root] < 0) compact[root] = next++;
      out.labels(r, c) = compact[root];
    }
  }
  out.n_segments = next;
  return out;
}

double within_segment_sse(const Image& image, const SegmentMap& seg) {
  std::vector<RegionStats> stats(seg.n_segments);
  for (Index r = 0; r < image.height(); ++r) {
    for (Index c = 0; c < image.width(); ++c) {
      auto& s = stats[seg.labels(r, c)];
      Eigen::Vector3d px(image.channel[0](r, c), image.channel[1](r, c), image.channel[2](r, c));
      s.n += 1;
      s.sum += px;
      s.sumsq += px.cwiseProduct(px);
    }
  }
  double total = 0.0;
  for (const auto& s : stats)
    if (s.n > 0) total += s.sse();
  return total;
}

std::vector<SegmentFeatures> segment_features(const Image& image, const SegmentMap& seg) {
  if (seg.height() != image.height() || seg.width() != image.width())
    throw ShapeMismatch("segment map does not match image size");
  const Index h = image.height(), w = image.width();
  const int k = seg.n_segments;
  std::vector<RegionStats> color(k);
  std::vector<double> row_sum(k, 0.0), col_sum(k, 0.0);
  std::vector<Index> top(k, h);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      int l = seg.labels(r, c);
      Eigen::Vector3d px(image.channel[0](r, c), image.channel[1](r, c), image.channel[2](r, c));
      color[l].n += 1;
      color[l].sum += px;
      color[l].sumsq += px.cwiseProduct(px);
      row_sum[l] += r + 0.5;
      col_sum[l] += c + 0.5;
      top[l] = std::min(top[l], r);
    }
  }
  std::vector<SegmentFeatures> out(k);
  for (int l = 0; l < k; ++l) {
    const auto& s = color[l];
    if (s.n == 0) throw InvalidArgument("segment " + std::to_string(l) + " is empty");
    Eigen::Vector3d mean = s.mean();
    Eigen::Vector3d var = (s.sumsq / s.n - mean.cwiseProduct(mean)).cwiseMax(0.0);
    SegmentFeatures f;
    f << mean, var.cwiseSqrt(), row_sum[l] / s.n / h, col_sum[l] / s.n / w, static_cast<double>(top[l]) / h,
        s.n / static_cast<double>(h * w);
    out[l] = f;
  }
  return out;
}

SkyClassifier SkyClassifier::fit(std::span<const LabeledSegment> data, const Options& options) {
  const Index n = static_cast<Index>(data.size());
  Index positives = 0;
  for (const auto& d : data) positives += d.sky ? 1 : 0;
  if (n == 0 || positives == 0 || positives == n)
    throw DegenerateData("sky classifier needs both sky and non-sky segments");

  Eigen::MatrixXd x(n, 10);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    x.row(i) = data[i].features.transpose();
    y[i] = data[i].sky ? 1.0 : 0.0;
  }
  Eigen::RowVectorXd mu = x.colwise().mean();
  Eigen::RowVectorXd sigma = ((x.rowwise() - mu).array().square().colwise().mean()).sqrt();
  for (Index j = 0; j < 10; ++j)
    if (sigma[j] < 1e-12) sigma[j] = 1.0;

  Eigen::MatrixXd design(n, 11);
  design.leftCols(10) = (x.rowwise() - mu).array().rowwise() / sigma.array();
  design.col(10).setOnes();

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(11);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(11, options.l2);
  penalty[10] = 0.0;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    Eigen::VectorXd p = (-(design * theta)).array().exp().matrix();
    p = (1.0 + p.array()).inverse().matrix();
    Eigen::VectorXd grad = design.transpose() * (p - y) / static_cast<double>(n) + penalty.cwiseProduct(theta);
    Eigen::VectorXd wdiag = p.array() * (1.0 - p.array());
    Eigen::MatrixXd hess = design.transpose() * wdiag.asDiagonal() * design / static_cast<double>(n);
    hess.diagonal() += penalty;
    hess.diagonal().array() += 1e-12;
    Eigen::VectorXd step = hess.ldlt().solve(grad);
    theta -= step;
    if (step.lpNorm<Eigen::Infinity>() < options.tolerance) {
      ++it;
      break;
    }
  }

  Eigen::Matrix<double, 10, 1> w = (theta.head(10).array() / sigma.transpose().array()).matrix();
  double b = theta[10] - w.dot(mu.transpose());
  SkyClassifier clf(w, b);
  clf.iterations_ = it;
  return clf;
}

double SkyClassifier::probability(const SegmentFeatures& f) const {
  return 1.0 / (1.0 + std::exp(-(weights_.dot(f) + bias_)));
}

std::string SkyClassifier::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = "sky_logistic";
  j["weights"] = std::vector<double>(weights_.data(), weights_.data() + 10);
  j["bias"] = bias_;
  return j.dump(2);
}

SkyClassifier SkyClassifier::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("sky classifier: ") + e.what());
  }
  auto w = j.at("weights").get<std::vector<double>>();
  if (w.size() != 10) throw ParseError("sky classifier: expected 10 weights");
  return SkyClassifier(Eigen::Map<const Eigen::Matrix<double, 10, 1>>(w.data()), j.at("bias").get<double>());
}

void SkyClassifier::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json() << "\n";
}

SkyClassifier SkyClassifier::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::vector<LabeledSegment> label_segments(const Image& image, const SegmentMap& seg, const MaskGrid& truth) {
  if (truth.rows() != image.height() || truth.cols() != image.width())
    throw ShapeMismatch("ground-truth mask does not match image size");
  auto features = segment_features(image, seg);
  std::vector<double> sky(seg.n_segments, 0.0), total(seg.n_segments, 0.0);
  for (Index r = 0; r < seg.height(); ++r) {
    for (Index c = 0; c < seg.width(); ++c) {
      total[seg.labels(r, c)] += 1;
      sky[seg.labels(r, c)] += truth(r, c) ? 1 : 0;
    }
  }
  std::vector<LabeledSegment> out;
  for (int l = 0; l < seg.n_segments; ++l) out.push_back({features[l], sky[l] * 2 > total[l]});
  return out;
}

MaskGrid predict_sky_mask(const Image& image, const SegmentMap& seg, const SkyClassifier& clf) {
  if (!clf.trained()) throw InvalidArgument("sky classifier is not trained");
  auto features = segment_features(image, seg);
  std::vector<std::uint8_t> decision(seg.n_segments);
  for (int l = 0; l < seg.n_segments; ++l) decision[l] = clf.is_sky(features[l]) ? 1 : 0;
  MaskGrid mask(seg.height(), seg.width());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = decision[seg.labels.data()[i]];
  return mask;
}

SkySelectedImage apply_sky_selection(const Image& image, const MaskGrid& mask, Index out_height, Index out_width,
                                     std::string provenance) {
  if (mask.rows() != image.height() || mask.cols() != image.width())
    throw ShapeMismatch("sky mask does not match image size");
  SkySelectedImage out;
  out.provenance = std::move(provenance);
  out.pixels = resize_bilinear(image, out_height, out_width);
  MaskGrid small = resize_nearest(mask, out_height, out_width);
  for (auto& ch : out.pixels.channel) ch = (small != 0).select(ch, 0.0f);
  return out;
}

SegMetrics seg_metrics(const MaskGrid& pred, const MaskGrid& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) throw ShapeMismatch("masks differ in shape");
  if (pred.size() == 0) throw InvalidArgument("empty masks");
  // confusion[truth][pred]
  double confusion[2][2] = {{0, 0}, {0, 0}};
  for (Index i = 0; i < pred.size(); ++i) confusion[gt.data()[i] ? 1 : 0][pred.data()[i] ? 1 : 0] += 1;
  const double total = static_cast<double>(pred.size());
  SegMetrics m;
  m.pixel_accuracy = (confusion[0][0] + confusion[1][1]) / total;
  double acc_sum = 0, iou_sum = 0;
  int acc_classes = 0, iou_classes = 0;
  for (int k = 0; k < 2; ++k) {
    const double gt_count = confusion[k][0] + confusion[k][1];
    const double pred_count = confusion[0][k] + confusion[1][k];
    const double tp = confusion[k][k];
    if (gt_count > 0) {
      acc_sum += tp / gt_count;
      ++acc_classes;
    }
    if (gt_count + pred_count > 0) {
      iou_sum += tp / (gt_count + pred_count - tp);
      ++iou_classes;
    }
  }
  m.mean_accuracy = acc_classes ? acc_sum / acc_classes : 0.0;
  m.mean_iou = iou_classes ? iou_sum / iou_classes : 0.0;
  return m;
}

SkyClassifier fit_sky_classifier(std::span<const Image> images, std::span<const MaskGrid> masks,
                                 int target_segments, const A3CConfig& a3c) {
  if (images.size() != masks.size()) throw InvalidArgument("images and masks differ in count");
  std::vector<LabeledSegment> data;
  for (std::size_t i = 0; i < images.size(); ++i) {
    int target = static_cast<int>(std::min<Index>(target_segments, images[i].pixels()));
    auto seg = a3c_cluster(images[i], std::max(2, target), a3c);
    auto labeled = label_segments(images[i], seg, masks[i]);
    data.insert(data.end(), labeled.begin(), labeled.end());
  }
  return SkyClassifier::fit(data);
}

}  // namespace realism
