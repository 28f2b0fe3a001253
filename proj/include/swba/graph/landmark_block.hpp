#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "swba/graph/residuals.hpp"

namespace swba {

enum class BlockState { kLinearized, kNsProjected };

/// Dense storage [frame columns | landmark (3) | residual (1)] for all
/// reprojection rows of one landmark.
template <typename Scalar>
struct LandmarkBlock {
  LandmarkId landmark = -1;
  std::vector<FrameId> frames;
  MatX<Scalar> storage;
  BlockState state = BlockState::kLinearized;
  /// After projection: rows kept for landmark back substitution.
  Index retained_rows = 0;
  bool degenerate = false;

  Index num_frames() const { return static_cast<Index>(frames.size()); }
  Index landmark_col() const { return kPoseDim * num_frames(); }
  Index res_col() const { return landmark_col() + 3; }
  Index rows() const { return storage.rows(); }

  Index frame_slot(FrameId id) const {
    auto it = std::find(frames.begin(), frames.end(), id);
    return it == frames.end() ? -1 : static_cast<Index>(it - frames.begin());
  }

  /// Rows with zero landmark columns after projection.
  Index projected_rows() const {
    return state == BlockState::kNsProjected ? rows() - retained_rows : 0;
  }
};

/// Reprojection residual indices grouped by landmark, in landmark id order.
template <typename Scalar>
std::map<LandmarkId, std::vector<std::size_t>> residuals_by_landmark(
    const WindowProblem<Scalar>& pb) {
  std::map<LandmarkId, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < pb.residuals.size(); ++i) {
    if (pb.residuals[i].kind == ResidualKind::kReprojection) {
      out[pb.residuals[i].landmark].push_back(i);
    }
  }
  return out;
}

/// Builds the block of one landmark from the given reprojection residuals.
/// Frame columns follow `frame_order`. Returns false if no row is valid.
template <typename Scalar>
bool assemble_landmark_block(const WindowProblem<Scalar>& pb, LandmarkId id,
                             const std::vector<std::size_t>& residual_indices,
                             const std::vector<FrameId>& frame_order,
                             LandmarkBlock<Scalar>& blk) {
  std::vector<ResidualEval<Scalar>> evals;
  evals.reserve(residual_indices.size());
  std::vector<FrameId> used;
  Index rows = 0;
  for (std::size_t ri : residual_indices) {
    ResidualEval<Scalar> ev = evaluate_residual(pb.residuals[ri], pb);
    if (!ev.valid) continue;
    for (FrameId f : ev.frame_ids) {
      if (std::find(used.begin(), used.end(), f) == used.end()) used.push_back(f);
    }
    rows += ev.r.size();
    evals.push_back(std::move(ev));
  }
  if (evals.empty()) return false;

  blk = LandmarkBlock<Scalar>();
  blk.landmark = id;
  for (FrameId f : frame_order) {
    if (std::find(used.begin(), used.end(), f) != used.end()) blk.frames.push_back(f);
  }
  if (blk.frames.size() != used.size()) {
    throw Error("assemble_landmark_blocks: frame missing from column order");
  }
  blk.storage = MatX<Scalar>::Zero(rows, blk.res_col() + 1);
  Index row = 0;
  for (const auto& ev : evals) {
    const Index m = ev.r.size();
    for (std::size_t k = 0; k < ev.frame_ids.size(); ++k) {
      const Index slot = blk.frame_slot(ev.frame_ids[k]);
      blk.storage.block(row, kPoseDim * slot, m, kPoseDim) += ev.frame_jacs[k];
    }
    blk.storage.block(row, blk.landmark_col(), m, 3) = ev.landmark_jac;
    blk.storage.block(row, blk.res_col(), m, 1) = ev.r;
    row += m;
  }
  return true;
}

/// One dense block per landmark. Landmarks without any valid observation are
/// omitted and counted in `omitted`.
template <typename Scalar>
std::vector<LandmarkBlock<Scalar>> assemble_landmark_blocks(
    const WindowProblem<Scalar>& pb, const std::vector<FrameId>& frame_order,
    Index* omitted = nullptr) {
  std::vector<LandmarkBlock<Scalar>> out;
  Index skipped = 0;
  const auto groups = residuals_by_landmark(pb);
  for (const auto& [id, lm] : pb.landmarks) {
    auto it = groups.find(id);
    LandmarkBlock<Scalar> blk;
    if (it == groups.end() || !assemble_landmark_block(pb, id, it->second, frame_order, blk)) {
      ++skipped;
      continue;
    }
    out.push_back(std::move(blk));
  }
  if (omitted) *omitted = skipped;
  return out;
}

template <typename Scalar>
std::vector<LandmarkBlock<Scalar>> assemble_landmark_blocks(const WindowProblem<Scalar>& pb,
                                                            Index* omitted = nullptr) {
  return assemble_landmark_blocks(pb, pb.frame_ids(), omitted);
}

}  // namespace swba
