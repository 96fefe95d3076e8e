#pragma once

#include <string>
#include <vector>

#include "lomv/factor_model.hpp"

namespace lomv {

/// p x n matrix of per-period excess returns, one row per asset.
struct ReturnsPanel {
  MatrixXd data;
  std::vector<std::string> asset_ids;
  std::vector<std::string> period_labels;
  bool centered = false;

  Index p() const noexcept { return data.rows(); }
  Index n() const noexcept { return data.cols(); }

  void validate() const {
    if (p() < 1) throw InvalidInput("returns panel needs at least one asset");
    if (n() < 2) throw InvalidInput("returns panel needs at least two periods");
    if (!data.allFinite()) throw InvalidInput("returns panel contains missing or non-finite values");
    if (!asset_ids.empty() && static_cast<Index>(asset_ids.size()) != p()) {
      throw InvalidInput("asset_ids must be empty or have length p");
    }
    if (!period_labels.empty() && static_cast<Index>(period_labels.size()) != n()) {
      throw InvalidInput("period labels must be empty or have length n");
    }
  }

  /// Copy with each asset's time-series mean removed.
  ReturnsPanel centered_copy() const {
    ReturnsPanel out = *this;
    if (!centered) {
      out.data = data.colwise() - data.rowwise().mean();
      out.centered = true;
    }
    return out;
  }
};

}  // namespace lomv
