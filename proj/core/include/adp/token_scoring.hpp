#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace adp::tokens {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Codes match the on-disk embedding format.
enum class SegmentKind : std::uint8_t {
  kBos = 0,
  kVis = 1,
  kProp = 2,
  kTxt = 3,
  kAct = 4,
  kEos = 5,
};

const char* to_string(SegmentKind kind);

struct SegmentSpec {
  SegmentKind kind;
  std::uint32_t length = 0;
  std::uint32_t view_id = 0;  // meaningful for kVis only

  bool operator==(const SegmentSpec&) const = default;
};

struct Segment {
  SegmentSpec spec;
  std::size_t offset = 0;  // first row in the matrix
};

// A multimodal token sequence plus its segment layout. Accepted layout:
//   BOS(1) VIS(view 0) [VIS(view 1) ...] [PROP] TXT [ACT] [EOS(1)]
// Segment lengths must sum to the row count and all entries must be finite.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(RowMatrixF data, std::vector<SegmentSpec> layout);

  std::size_t rows() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  const RowMatrixF& data() const noexcept { return data_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  std::vector<SegmentSpec> layout() const;

  // Rows of the first segment of `kind`, empty when absent.
  std::size_t length_of(SegmentKind kind) const;
  std::optional<Segment> find(SegmentKind kind) const;

  std::size_t vis_length() const;
  std::size_t vis_offset() const;
  std::vector<std::size_t> view_lengths() const;
  std::vector<std::uint32_t> view_ids() const;
  bool has_eos() const { return find(SegmentKind::kEos).has_value(); }

  bool operator==(const EmbeddingMatrix& other) const;

 private:
  RowMatrixF data_;
  std::vector<Segment> segments_;
};

struct ProjectionWeights {
  RowMatrixF w_q;  // D x D
  RowMatrixF w_k;  // D x D
  std::uint32_t num_heads = 1;
  std::uint32_t head_dim = 1;

  std::size_t width() const { return static_cast<std::size_t>(w_q.rows()); }
  // Square matrices of equal size, num_heads * head_dim == D, finite entries.
  void validate() const;
};

// Dense heads x text x vis tensor of scaled similarities.
struct AttentionTensor {
  std::size_t heads = 0;
  std::size_t text = 0;
  std::size_t vis = 0;
  std::vector<double> values;  // [h][t][v] row-major

  double at(std::size_t h, std::size_t t, std::size_t v) const {
    return values[(h * text + t) * vis + v];
  }
  double& at(std::size_t h, std::size_t t, std::size_t v) { return values[(h * text + t) * vis + v]; }
};

struct ImportanceScores {
  std::vector<double> phi;                // one entry per visual token, original order
  std::vector<std::size_t> view_lengths;  // sums to phi.size()
};

struct PruneDecision {
  double rho = 1.0;
  std::vector<double> alpha;
  std::size_t k = 0;
  std::vector<std::size_t> floor_quota;  // floor(alpha_c * k) before redistribution
  std::vector<std::size_t> quota;        // final k_c
  // Sorted visual-token indices (offsets into the vis span, across views).
  std::vector<std::vector<std::size_t>> kept_indices;

  std::vector<std::size_t> flat_kept() const;
};

// k = floor(rho * length), with rho in (0, 1]. A 1e-9 guard absorbs binary
// rounding of decimal ratios (0.7 * 10 is 7, not 6).
std::size_t retained_count(double rho, std::size_t length);

// Q = H_txt W_Q, K = H_vis W_K, A_h = Q_h K_h^T / sqrt(d). No softmax.
AttentionTensor attention_scores(const EmbeddingMatrix& embeddings, const ProjectionWeights& weights);

// Mean over heads and text queries. `view_lengths` defaults to one view.
ImportanceScores aggregate_importance(const AttentionTensor& scores,
                                      std::vector<std::size_t> view_lengths = {});

// Per-view Top-K. Ties break toward the lower index. Quotas are floored per
// view, clamped to the view size, and the shortfall is handed out one token
// at a time to views in descending alpha order (stable), skipping full views.
PruneDecision topk_per_view(const ImportanceScores& scores, double rho, std::span<const double> alpha);

// BOS + kept vis rows + PROP + TXT + ACT + EOS, rows copied verbatim.
EmbeddingMatrix assemble_pruned(const EmbeddingMatrix& embeddings, const PruneDecision& decision);

struct PruneResult {
  EmbeddingMatrix pruned;
  PruneDecision decision;
  ImportanceScores scores;
};

PruneResult prune_pipeline(const EmbeddingMatrix& embeddings, const ProjectionWeights& weights,
                           double rho, std::span<const double> alpha);

// Alpha used when the caller supplies none: 1 view -> {1}, 2 views -> {0.4, 0.6}
// (main:wrist), otherwise uniform.
std::vector<double> default_alpha(std::size_t views);

}  // namespace adp::tokens
