#include "adp/token_scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <utility>

#include "adp/errors.hpp"

namespace adp::tokens {

namespace {

// Position of each kind in the canonical sequence order.
int rank_of(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::kBos: return 0;
    case SegmentKind::kVis: return 1;
    case SegmentKind::kProp: return 2;
    case SegmentKind::kTxt: return 3;
    case SegmentKind::kAct: return 4;
    case SegmentKind::kEos: return 5;
  }
  throw InvalidArgument("unknown segment kind");
}

void validate_layout(const std::vector<SegmentSpec>& layout, std::size_t rows) {
  if (layout.empty()) throw InvalidArgument("embedding layout: no segments");
  std::size_t total = 0;
  std::size_t vis_total = 0;
  int counts[6] = {0, 0, 0, 0, 0, 0};
  std::set<std::uint32_t> views;
  int last_rank = -1;
  for (const auto& seg : layout) {
    const int r = rank_of(seg.kind);
    if (r < last_rank || (r == last_rank && seg.kind != SegmentKind::kVis)) {
      throw InvalidArgument(std::string("embedding layout: segment ") + to_string(seg.kind) +
                            " out of order");
    }
    last_rank = r;
    ++counts[r];
    total += seg.length;
    if (seg.kind == SegmentKind::kVis) {
      vis_total += seg.length;
      if (!views.insert(seg.view_id).second) {
        throw InvalidArgument("embedding layout: duplicate view id " + std::to_string(seg.view_id));
      }
    } else if (seg.view_id != 0) {
      throw InvalidArgument(std::string("embedding layout: view id set on ") + to_string(seg.kind));
    }
    if ((seg.kind == SegmentKind::kBos || seg.kind == SegmentKind::kEos) && seg.length != 1) {
      throw InvalidArgument(std::string("embedding layout: ") + to_string(seg.kind) +
                            " must hold exactly one token");
    }
  }
  if (counts[0] != 1) throw InvalidArgument("embedding layout: exactly one BOS segment required");
  if (counts[1] < 1) throw InvalidArgument("embedding layout: at least one VIS segment required");
  if (counts[3] != 1) throw InvalidArgument("embedding layout: exactly one TXT segment required");
  if (vis_total == 0) throw InvalidArgument("embedding layout: no visual tokens");
  if (total != rows) {
    throw InvalidArgument("embedding layout: segment lengths sum to " + std::to_string(total) +
                          " but matrix has " + std::to_string(rows) + " rows");
  }
}

bool ranks_before(const std::vector<double>& phi, std::size_t a, std::size_t b) {
  if (phi[a] != phi[b]) return phi[a] > phi[b];
  return a < b;
}

}  // namespace

const char* to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::kBos: return "BOS";
    case SegmentKind::kVis: return "VIS";
    case SegmentKind::kProp: return "PROP";
    case SegmentKind::kTxt: return "TXT";
    case SegmentKind::kAct: return "ACT";
    case SegmentKind::kEos: return "EOS";
  }
  return "?";
}

EmbeddingMatrix::EmbeddingMatrix(RowMatrixF data, std::vector<SegmentSpec> layout)
    : data_(std::move(data)) {
  validate_layout(layout, rows());
  if (!data_.allFinite()) throw InvalidArgument("embedding matrix contains non-finite entries");
  std::size_t offset = 0;
  segments_.reserve(layout.size());
  for (const auto& spec : layout) {
    segments_.push_back({spec, offset});
    offset += spec.length;
  }
}

std::vector<SegmentSpec> EmbeddingMatrix::layout() const {
  std::vector<SegmentSpec> out;
  out.reserve(segments_.size());
  for (const auto& s : segments_) out.push_back(s.spec);
  return out;
}

std::optional<Segment> EmbeddingMatrix::find(SegmentKind kind) const {
  for (const auto& s : segments_) {
    if (s.spec.kind == kind) return s;
  }
  return std::nullopt;
}

std::size_t EmbeddingMatrix::length_of(SegmentKind kind) const {
  std::size_t n = 0;
  for (const auto& s : segments_) {
    if (s.spec.kind == kind) n += s.spec.length;
  }
  return n;
}

std::size_t EmbeddingMatrix::vis_length() const { return length_of(SegmentKind::kVis); }

std::size_t EmbeddingMatrix::vis_offset() const { return find(SegmentKind::kVis)->offset; }

std::vector<std::size_t> EmbeddingMatrix::view_lengths() const {
  std::vector<std::size_t> out;
  for (const auto& s : segments_) {
    if (s.spec.kind == SegmentKind::kVis) out.push_back(s.spec.length);
  }
  return out;
}

std::vector<std::uint32_t> EmbeddingMatrix::view_ids() const {
  std::vector<std::uint32_t> out;
  for (const auto& s : segments_) {
    if (s.spec.kind == SegmentKind::kVis) out.push_back(s.spec.view_id);
  }
  return out;
}

bool EmbeddingMatrix::operator==(const EmbeddingMatrix& other) const {
  return layout() == other.layout() && data_.rows() == other.data_.rows() &&
         data_.cols() == other.data_.cols() && data_ == other.data_;
}

void ProjectionWeights::validate() const {
  if (w_q.rows() == 0 || w_q.rows() != w_q.cols()) {
    throw InvalidArgument("projection weights: W_Q must be square and non-empty");
  }
  if (w_k.rows() != w_q.rows() || w_k.cols() != w_q.cols()) {
    throw InvalidArgument("projection weights: W_K shape differs from W_Q");
  }
  if (num_heads == 0 || head_dim == 0) {
    throw InvalidArgument("projection weights: num_heads and head_dim must be positive");
  }
  if (static_cast<std::size_t>(num_heads) * head_dim != width()) {
    throw InvalidArgument("projection weights: num_heads * head_dim != D");
  }
  if (!w_q.allFinite() || !w_k.allFinite()) {
    throw InvalidArgument("projection weights: non-finite entries");
  }
}

std::vector<std::size_t> PruneDecision::flat_kept() const {
  std::vector<std::size_t> out;
  for (const auto& view : kept_indices) out.insert(out.end(), view.begin(), view.end());
  return out;
}

std::size_t retained_count(double rho, std::size_t length) {
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw InvalidArgument("retention ratio must lie in (0, 1]");
  }
  const double raw = std::floor(rho * static_cast<double>(length) + 1e-9);
  return std::min(length, static_cast<std::size_t>(raw));
}

AttentionTensor attention_scores(const EmbeddingMatrix& embeddings, const ProjectionWeights& weights) {
  weights.validate();
  if (embeddings.cols() != weights.width()) {
    throw InvalidArgument("attention_scores: embedding width " + std::to_string(embeddings.cols()) +
                          " != weight width " + std::to_string(weights.width()));
  }
  const auto txt = embeddings.find(SegmentKind::kTxt);
  if (!txt || txt->spec.length == 0) throw InvalidState("attention_scores: empty text segment");
  const std::size_t l_txt = txt->spec.length;
  const std::size_t l_vis = embeddings.vis_length();
  const std::size_t vis_off = embeddings.vis_offset();
  const auto& x = embeddings.data();

  const Eigen::MatrixXd h_txt = x.middleRows(static_cast<Eigen::Index>(txt->offset), l_txt).cast<double>();
  const Eigen::MatrixXd h_vis = x.middleRows(static_cast<Eigen::Index>(vis_off), l_vis).cast<double>();
  const Eigen::MatrixXd q = h_txt * weights.w_q.cast<double>();
  const Eigen::MatrixXd k = h_vis * weights.w_k.cast<double>();

  AttentionTensor out;
  out.heads = weights.num_heads;
  out.text = l_txt;
  out.vis = l_vis;
  out.values.assign(out.heads * l_txt * l_vis, 0.0);
  const auto d = static_cast<Eigen::Index>(weights.head_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(weights.head_dim));
  for (std::size_t h = 0; h < out.heads; ++h) {
    const auto col = static_cast<Eigen::Index>(h) * d;
    const Eigen::MatrixXd a = (q.middleCols(col, d) * k.middleCols(col, d).transpose()) * scale;
    for (std::size_t t = 0; t < l_txt; ++t) {
      for (std::size_t v = 0; v < l_vis; ++v) {
        out.at(h, t, v) = a(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(v));
      }
    }
  }
  return out;
}

ImportanceScores aggregate_importance(const AttentionTensor& scores, std::vector<std::size_t> view_lengths) {
  if (scores.values.size() != scores.heads * scores.text * scores.vis) {
    throw InvalidArgument("aggregate_importance: tensor size does not match its shape");
  }
  if (scores.heads == 0 || scores.text == 0) {
    throw InvalidState("aggregate_importance: no heads or text queries to average");
  }
  if (view_lengths.empty()) view_lengths.push_back(scores.vis);
  if (std::accumulate(view_lengths.begin(), view_lengths.end(), std::size_t{0}) != scores.vis) {
    throw InvalidArgument("aggregate_importance: view lengths do not sum to L_vis");
  }
  ImportanceScores out;
  out.phi.assign(scores.vis, 0.0);
  out.view_lengths = std::move(view_lengths);
  for (std::size_t h = 0; h < scores.heads; ++h) {
    for (std::size_t t = 0; t < scores.text; ++t) {
      for (std::size_t v = 0; v < scores.vis; ++v) {
        out.phi[v] += scores.at(h, t, v);
      }
    }
  }
  const double norm = static_cast<double>(scores.heads * scores.text);
  for (double& p : out.phi) {
    p /= norm;
    if (!std::isfinite(p)) throw InvalidArgument("aggregate_importance: non-finite score");
  }
  return out;
}

PruneDecision topk_per_view(const ImportanceScores& scores, double rho, std::span<const double> alpha) {
  const std::size_t l_vis = scores.phi.size();
  std::vector<std::size_t> views = scores.view_lengths;
  if (views.empty()) views.push_back(l_vis);
  if (std::accumulate(views.begin(), views.end(), std::size_t{0}) != l_vis) {
    throw InvalidArgument("topk_per_view: view lengths do not sum to L_vis");
  }
  for (double p : scores.phi) {
    if (!std::isfinite(p)) throw InvalidArgument("topk_per_view: non-finite importance score");
  }
  const std::size_t c = views.size();

  PruneDecision out;
  out.rho = rho;
  out.alpha.assign(alpha.begin(), alpha.end());
  if (out.alpha.empty() && c == 1) out.alpha = {1.0};
  if (out.alpha.size() != c) {
    throw InvalidArgument("topk_per_view: alpha has " + std::to_string(out.alpha.size()) +
                          " entries for " + std::to_string(c) + " views");
  }
  double alpha_sum = 0.0;
  for (double a : out.alpha) {
    if (!std::isfinite(a) || a < 0.0) throw InvalidArgument("topk_per_view: alpha entries must be >= 0");
    alpha_sum += a;
  }
  if (std::abs(alpha_sum - 1.0) > 1e-9) throw InvalidArgument("topk_per_view: alpha must sum to 1");

  out.k = retained_count(rho, l_vis);
  if (out.k == 0) throw InvalidArgument("topk_per_view: rho * L_vis floors to zero tokens");

  out.floor_quota.resize(c);
  out.quota.resize(c);
  std::size_t assigned = 0;
  for (std::size_t v = 0; v < c; ++v) {
    out.floor_quota[v] =
        static_cast<std::size_t>(std::floor(out.alpha[v] * static_cast<double>(out.k) + 1e-9));
    out.quota[v] = std::min(out.floor_quota[v], views[v]);
    assigned += out.quota[v];
  }
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out.alpha[a] > out.alpha[b]; });
  // assigned can exceed k only through the 1e-9 guard on pathological alphas.
  while (assigned > out.k) {
    for (auto it = order.rbegin(); it != order.rend() && assigned > out.k; ++it) {
      if (out.quota[*it] > 0) {
        --out.quota[*it];
        --assigned;
      }
    }
  }
  while (assigned < out.k) {
    for (std::size_t v : order) {
      if (assigned == out.k) break;
      if (out.quota[v] < views[v]) {
        ++out.quota[v];
        ++assigned;
      }
    }
  }

  out.kept_indices.resize(c);
  std::size_t offset = 0;
  for (std::size_t v = 0; v < c; ++v) {
    std::vector<std::size_t> idx(views[v]);
    std::iota(idx.begin(), idx.end(), offset);
    const auto take = static_cast<std::ptrdiff_t>(out.quota[v]);
    std::partial_sort(idx.begin(), idx.begin() + take, idx.end(),
                      [&](std::size_t a, std::size_t b) { return ranks_before(scores.phi, a, b); });
    idx.resize(out.quota[v]);
    std::sort(idx.begin(), idx.end());
    out.kept_indices[v] = std::move(idx);
    offset += views[v];
  }
  return out;
}

EmbeddingMatrix assemble_pruned(const EmbeddingMatrix& embeddings, const PruneDecision& decision) {
  const auto view_lengths = embeddings.view_lengths();
  if (decision.kept_indices.size() != view_lengths.size()) {
    throw InvalidArgument("assemble_pruned: decision covers a different number of views");
  }
  std::vector<SegmentSpec> layout;
  std::vector<Eigen::Index> source_rows;
  source_rows.reserve(embeddings.rows());

  const std::size_t vis_off = embeddings.vis_offset();
  std::size_t view = 0;
  std::size_t view_start = 0;
  for (const auto& seg : embeddings.segments()) {
    if (seg.spec.kind != SegmentKind::kVis) {
      layout.push_back(seg.spec);
      for (std::size_t r = 0; r < seg.spec.length; ++r) {
        source_rows.push_back(static_cast<Eigen::Index>(seg.offset + r));
      }
      continue;
    }
    const auto& kept = decision.kept_indices[view];
    std::size_t previous = 0;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const std::size_t local = kept[i];
      if (local < view_start || local >= view_start + seg.spec.length) {
        throw InvalidArgument("assemble_pruned: kept index " + std::to_string(local) +
                              " outside view " + std::to_string(view));
      }
      if (i > 0 && local <= previous) {
        throw InvalidArgument("assemble_pruned: kept indices must be strictly increasing");
      }
      previous = local;
      source_rows.push_back(static_cast<Eigen::Index>(vis_off + local));
    }
    layout.push_back({SegmentKind::kVis, static_cast<std::uint32_t>(kept.size()), seg.spec.view_id});
    view_start += seg.spec.length;
    ++view;
  }

  const auto& src = embeddings.data();
  RowMatrixF out(static_cast<Eigen::Index>(source_rows.size()), src.cols());
  for (std::size_t r = 0; r < source_rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = src.row(source_rows[r]);
  }
  return EmbeddingMatrix(std::move(out), std::move(layout));
}

PruneResult prune_pipeline(const EmbeddingMatrix& embeddings, const ProjectionWeights& weights,
                           double rho, std::span<const double> alpha) {
  auto scores = aggregate_importance(attention_scores(embeddings, weights), embeddings.view_lengths());
  auto decision = topk_per_view(scores, rho, alpha);
  auto pruned = assemble_pruned(embeddings, decision);
  return {std::move(pruned), std::move(decision), std::move(scores)};
}

std::vector<double> default_alpha(std::size_t views) {
  if (views == 0) return {};
  if (views == 1) return {1.0};
  if (views == 2) return {0.4, 0.6};
  return std::vector<double>(views, 1.0 / static_cast<double>(views));
}

}  // namespace adp::tokens
