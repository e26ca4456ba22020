#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "adp/errors.hpp"
#include "adp/token_scoring.hpp"
#include "support/oracles.hpp"

using namespace adp::tokens;

namespace {

// BOS, `vis` visual rows, `txt` text rows, EOS; rows are unit basis vectors
// of the given width so inner products are easy to predict.
EmbeddingMatrix basis_embeddings(std::size_t vis, std::size_t txt, std::size_t width,
                                 const std::vector<std::size_t>& hot) {
  const std::size_t rows = 2 + vis + txt;
  RowMatrixF m = RowMatrixF::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows; ++r) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(hot[r])) = 1.0f;
  return EmbeddingMatrix(m, {{SegmentKind::kBos, 1, 0},
                             {SegmentKind::kVis, static_cast<std::uint32_t>(vis), 0},
                             {SegmentKind::kTxt, static_cast<std::uint32_t>(txt), 0},
                             {SegmentKind::kEos, 1, 0}});
}

ProjectionWeights identity_weights(std::size_t width, std::uint32_t heads = 1) {
  ProjectionWeights w;
  w.w_q = RowMatrixF::Identity(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(width));
  w.w_k = w.w_q;
  w.num_heads = heads;
  w.head_dim = static_cast<std::uint32_t>(width / heads);
  return w;
}

}  // namespace

TEST(EmbeddingMatrix, ValidatesLayout) {
  RowMatrixF m = RowMatrixF::Zero(5, 2);
  EXPECT_NO_THROW(EmbeddingMatrix(m, {{SegmentKind::kBos, 1, 0}, {SegmentKind::kVis, 3, 0}, {SegmentKind::kTxt, 1, 0}}));
  // Lengths must sum to the row count.
  EXPECT_THROW(EmbeddingMatrix(m, {{SegmentKind::kBos, 1, 0}, {SegmentKind::kVis, 2, 0}, {SegmentKind::kTxt, 1, 0}}),
               adp::InvalidArgument);
  // Text before vision is not a valid order.
  EXPECT_THROW(EmbeddingMatrix(m, {{SegmentKind::kBos, 1, 0}, {SegmentKind::kTxt, 1, 0}, {SegmentKind::kVis, 3, 0}}),
               adp::InvalidArgument);
  // Duplicate view ids.
  EXPECT_THROW(EmbeddingMatrix(m, {{SegmentKind::kBos, 1, 0},
                                   {SegmentKind::kVis, 2, 0},
                                   {SegmentKind::kVis, 1, 0},
                                   {SegmentKind::kTxt, 1, 0}}),
               adp::InvalidArgument);
  RowMatrixF bad = m;
  bad(2, 1) = std::numeric_limits<float>::infinity();
  EXPECT_THROW(EmbeddingMatrix(bad, {{SegmentKind::kBos, 1, 0}, {SegmentKind::kVis, 3, 0}, {SegmentKind::kTxt, 1, 0}}),
               adp::InvalidArgument);
}

TEST(EmbeddingMatrix, Accessors) {
  RowMatrixF m = RowMatrixF::Zero(10, 2);
  EmbeddingMatrix e(m, {{SegmentKind::kBos, 1, 0},
                        {SegmentKind::kVis, 3, 0},
                        {SegmentKind::kVis, 2, 1},
                        {SegmentKind::kProp, 1, 0},
                        {SegmentKind::kTxt, 2, 0},
                        {SegmentKind::kEos, 1, 0}});
  EXPECT_EQ(e.vis_length(), 5u);
  EXPECT_EQ(e.vis_offset(), 1u);
  EXPECT_EQ(e.view_lengths(), (std::vector<std::size_t>{3, 2}));
  EXPECT_EQ(e.length_of(SegmentKind::kAct), 0u);
  EXPECT_EQ(e.find(SegmentKind::kTxt)->offset, 7u);
  EXPECT_TRUE(e.has_eos());
}

TEST(RetainedCount, FloorsWithDecimalGuard) {
  EXPECT_EQ(retained_count(0.7, 10), 7u);
  EXPECT_EQ(retained_count(0.3, 10), 3u);
  EXPECT_EQ(retained_count(0.5, 7), 3u);
  EXPECT_EQ(retained_count(1.0, 7), 7u);
  EXPECT_THROW(retained_count(0.0, 7), adp::InvalidArgument);
  EXPECT_THROW(retained_count(1.5, 7), adp::InvalidArgument);
  EXPECT_THROW(retained_count(std::nan(""), 7), adp::InvalidArgument);
}

TEST(AttentionScores, OrthogonalRowsScoreZero) {
  // vis rows on axes 0, 1; text rows on axes 2, 3.
  const auto e = basis_embeddings(2, 2, 4, {0, 0, 1, 2, 3, 0});
  const auto a = attention_scores(e, identity_weights(4));
  for (double v : a.values) EXPECT_EQ(v, 0.0);
}

TEST(AttentionScores, SelfInnerProductOverRootD) {
  RowMatrixF m(4, 3);
  m << 0, 0, 0,  //
      1, 2, 2,   // vis
      1, 2, 2,   // txt
      0, 0, 0;
  EmbeddingMatrix e(m, {{SegmentKind::kBos, 1, 0},
                        {SegmentKind::kVis, 1, 0},
                        {SegmentKind::kTxt, 1, 0},
                        {SegmentKind::kEos, 1, 0}});
  const auto a = attention_scores(e, identity_weights(3));
  ASSERT_EQ(a.values.size(), 1u);
  EXPECT_NEAR(a.values[0], 9.0 / std::sqrt(3.0), 1e-12);
}

TEST(AttentionScores, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(21);
  for (int n = 0; n < 50; ++n) {
    const auto e = oracle::random_embeddings(rng, 12, 8);
    const auto w = oracle::random_weights(rng, e.cols());
    const auto got = attention_scores(e, w);
    const auto ref = oracle::attention_reference(e, w);
    ASSERT_EQ(got.values.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_NEAR(got.values[i], ref[i], 1e-6 * std::max(1.0, std::fabs(ref[i])));
    }
  }
}

TEST(AttentionScores, Errors) {
  RowMatrixF m = RowMatrixF::Zero(4, 2);
  EmbeddingMatrix no_text(m, {{SegmentKind::kBos, 1, 0}, {SegmentKind::kVis, 3, 0}, {SegmentKind::kTxt, 0, 0}});
  EXPECT_THROW(attention_scores(no_text, identity_weights(2)), adp::InvalidState);
  EmbeddingMatrix ok(m, {{SegmentKind::kBos, 1, 0}, {SegmentKind::kVis, 2, 0}, {SegmentKind::kTxt, 1, 0}});
  EXPECT_THROW(attention_scores(ok, identity_weights(4)), adp::InvalidArgument);
}

TEST(AggregateImportance, ConstantAndDegenerateCases) {
  AttentionTensor t{2, 3, 4, std::vector<double>(24, 1.5)};
  for (double p : aggregate_importance(t).phi) EXPECT_DOUBLE_EQ(p, 1.5);

  AttentionTensor row{1, 1, 3, {0.5, -1.0, 2.0}};
  EXPECT_EQ(aggregate_importance(row).phi, (std::vector<double>{0.5, -1.0, 2.0}));
}

TEST(AggregateImportance, MatchesExplicitMean) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> g;
  AttentionTensor t{3, 5, 7, std::vector<double>(105)};
  for (auto& v : t.values) v = g(rng);
  const auto phi = aggregate_importance(t, {4, 3});
  EXPECT_EQ(phi.view_lengths, (std::vector<std::size_t>{4, 3}));
  for (std::size_t v = 0; v < 7; ++v) {
    double s = 0.0;
    for (std::size_t h = 0; h < 3; ++h) {
      for (std::size_t q = 0; q < 5; ++q) s += t.at(h, q, v);
    }
    EXPECT_NEAR(phi.phi[v], s / 15.0, 1e-12);
  }
}

TEST(TopK, SingleViewExample) {
  const auto d = topk_per_view({{0.1, 0.5, 0.3, 0.2}, {4}}, 0.5, std::vector<double>{1.0});
  EXPECT_EQ(d.k, 2u);
  EXPECT_EQ(d.kept_indices[0], (std::vector<std::size_t>{1, 2}));
}

TEST(TopK, MainWristSplit) {
  std::vector<double> phi(20);
  std::iota(phi.begin(), phi.end(), 0.0);
  const auto d = topk_per_view({phi, {10, 10}}, 0.5, std::vector<double>{0.4, 0.6});
  EXPECT_EQ(d.k, 10u);
  EXPECT_EQ(d.quota, (std::vector<std::size_t>{4, 6}));
  EXPECT_EQ(d.kept_indices[0], (std::vector<std::size_t>{6, 7, 8, 9}));
  EXPECT_EQ(d.kept_indices[1], (std::vector<std::size_t>{14, 15, 16, 17, 18, 19}));
}

TEST(TopK, FullRetentionKeepsEverything) {
  const auto d = topk_per_view({{3, 1, 2, 5, 4}, {2, 3}}, 1.0, std::vector<double>{0.4, 0.6});
  EXPECT_EQ(d.flat_kept(), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(TopK, TiesPreferLowerIndex) {
  const auto d = topk_per_view({{1, 1, 1, 1, 1, 1}, {6}}, 0.5, std::vector<double>{1.0});
  EXPECT_EQ(d.kept_indices[0], (std::vector<std::size_t>{0, 1, 2}));
}

TEST(TopK, RemainderGoesToLargerAlphaFirst) {
  // k = 5, floors are (2, 2, 0); the leftover token goes to view 1.
  const auto d = topk_per_view({std::vector<double>(15, 0.0), {5, 5, 5}}, 1.0 / 3.0, std::vector<double>{0.45, 0.5, 0.05});
  EXPECT_EQ(d.k, 5u);
  EXPECT_EQ(d.floor_quota, (std::vector<std::size_t>{2, 2, 0}));
  EXPECT_EQ(d.quota, (std::vector<std::size_t>{2, 3, 0}));
}

TEST(TopK, FullViewsHandOverflowToOthers) {
  // View 0 can hold 2 tokens; alpha asks for 8 of 10.
  const auto d = topk_per_view({std::vector<double>(12, 1.0), {2, 10}}, 10.0 / 12.0, std::vector<double>{0.8, 0.2});
  EXPECT_EQ(d.quota, (std::vector<std::size_t>{2, 8}));
}

TEST(TopK, Errors) {
  ImportanceScores s{{1, 2, 3}, {3}};
  EXPECT_THROW(topk_per_view(s, 0.0, std::vector<double>{1.0}), adp::InvalidArgument);
  EXPECT_THROW(topk_per_view(s, 1.2, std::vector<double>{1.0}), adp::InvalidArgument);
  EXPECT_THROW(topk_per_view(s, 0.2, std::vector<double>{1.0}), adp::InvalidArgument);  // k = 0
  EXPECT_THROW(topk_per_view(s, 0.5, std::vector<double>{0.5, 0.5}), adp::InvalidArgument);
  EXPECT_THROW(topk_per_view(s, 0.5, std::vector<double>{0.9}), adp::InvalidArgument);
  ImportanceScores two{{1, 2, 3, 4}, {2, 2}};
  EXPECT_THROW(topk_per_view(two, 0.5, std::vector<double>{}), adp::InvalidArgument);
}

TEST(TopK, ShiftAndScaleInvariance) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  for (int n = 0; n < 200; ++n) {
    std::vector<double> phi(64);
    for (auto& x : phi) x = g(rng);
    const std::vector<double> alpha{0.4, 0.6};
    const auto base = topk_per_view({phi, {24, 40}}, 0.3, alpha);
    auto moved = phi;
    for (auto& x : moved) x = 2.5 * x + 0.75;
    EXPECT_EQ(topk_per_view({moved, {24, 40}}, 0.3, alpha).kept_indices, base.kept_indices);
  }
}

TEST(TopK, PermutationEquivariantWithinView) {
  std::mt19937_64 rng(24);
  std::normal_distribution<double> g;
  for (int n = 0; n < 100; ++n) {
    std::vector<double> phi(32);
    for (auto& x : phi) x = g(rng);
    std::vector<std::size_t> perm(32);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> permuted(32);
    for (std::size_t i = 0; i < 32; ++i) permuted[i] = phi[perm[i]];
    const auto a = topk_per_view({phi, {32}}, 0.4, std::vector<double>{1.0});
    const auto b = topk_per_view({permuted, {32}}, 0.4, std::vector<double>{1.0});
    std::vector<std::size_t> back;
    for (std::size_t i : b.kept_indices[0]) back.push_back(perm[i]);
    std::sort(back.begin(), back.end());
    EXPECT_EQ(back, a.kept_indices[0]);
  }
}

TEST(TopK, RetainedCountIsExactOverSmallGrid) {
  for (std::size_t l = 1; l <= 20; ++l) {
    for (int dec = 1; dec <= 10; ++dec) {
      const double rho = dec / 10.0;
      if (retained_count(rho, l) == 0) continue;
      for (std::size_t l0 = 1; l0 < l; ++l0) {
        for (int a = 0; a <= 10; ++a) {
          const std::vector<double> alpha{a / 10.0, 1.0 - a / 10.0};
          const auto d = topk_per_view({std::vector<double>(l, 0.0), {l0, l - l0}}, rho, alpha);
          EXPECT_EQ(d.flat_kept().size(), retained_count(rho, l));
        }
      }
    }
  }
}

TEST(AssemblePruned, FullRetentionIsIdentity) {
  std::mt19937_64 rng(25);
  const auto e = oracle::random_embeddings(rng);
  const auto w = oracle::random_weights(rng, e.cols());
  const auto r = prune_pipeline(e, w, 1.0, default_alpha(e.view_lengths().size()));
  EXPECT_TRUE(r.pruned == e);
}

TEST(AssemblePruned, SingleKeptToken) {
  std::mt19937_64 rng(26);
  const auto e = oracle::random_embeddings(rng, 24, 8, 1);
  const auto w = oracle::random_weights(rng, e.cols());
  const double rho = 1.0 / static_cast<double>(e.vis_length());
  const auto r = prune_pipeline(e, w, rho, std::vector<double>{1.0});
  EXPECT_EQ(r.pruned.rows(), e.rows() - e.vis_length() + 1);
}

TEST(AssemblePruned, RowsComeFromTheirSource) {
  std::mt19937_64 rng(27);
  for (int n = 0; n < 100; ++n) {
    const auto e = oracle::random_embeddings(rng);
    const auto w = oracle::random_weights(rng, e.cols());
    const double rho = std::max(0.6, 1.0 / static_cast<double>(e.vis_length()));
    const auto r = prune_pipeline(e, w, rho, default_alpha(e.view_lengths().size()));
    const auto kept = r.decision.flat_kept();
    for (std::size_t j = 0; j < kept.size(); ++j) {
      EXPECT_TRUE(r.pruned.data().row(static_cast<Eigen::Index>(1 + j)) ==
                  e.data().row(static_cast<Eigen::Index>(e.vis_offset() + kept[j])));
    }
    const auto txt_in = *e.find(SegmentKind::kTxt);
    const auto txt_out = *r.pruned.find(SegmentKind::kTxt);
    EXPECT_TRUE(r.pruned.data().middleRows(static_cast<Eigen::Index>(txt_out.offset), txt_out.spec.length) ==
                e.data().middleRows(static_cast<Eigen::Index>(txt_in.offset), txt_in.spec.length));
  }
}

TEST(AssemblePruned, RejectsBadIndices) {
  std::mt19937_64 rng(28);
  const auto e = oracle::random_embeddings(rng, 24, 8, 1);
  PruneDecision d;
  d.k = 2;
  d.quota = {2};
  d.kept_indices = {{1, 0}};
  EXPECT_THROW(assemble_pruned(e, d), adp::InvalidArgument);
  d.kept_indices = {{0, e.vis_length()}};
  EXPECT_THROW(assemble_pruned(e, d), adp::InvalidArgument);
}

TEST(DefaultAlpha, KnownViewCounts) {
  EXPECT_EQ(default_alpha(1), (std::vector<double>{1.0}));
  EXPECT_EQ(default_alpha(2), (std::vector<double>{0.4, 0.6}));
  const auto three = default_alpha(3);
  EXPECT_NEAR(std::accumulate(three.begin(), three.end(), 0.0), 1.0, 1e-12);
}
