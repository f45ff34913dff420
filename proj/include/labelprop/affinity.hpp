#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "labelprop/grid.hpp"
#include "labelprop/simd.hpp"

namespace labelprop {

enum class AffinityState { Raw, ColumnNormalized };

/// P x N affinities: row i is a context location, column j a target location.
class AffinityBlock {
 public:
  AffinityBlock() = default;
  AffinityBlock(std::size_t rows, std::size_t cols, std::vector<float> values,
                AffinityState state = AffinityState::Raw);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  AffinityState state() const { return state_; }

  float operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  float& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  std::span<const float> values() const { return values_; }

  /// Columns whose rows were all excluded during normalization (left all-zero).
  const std::vector<std::uint8_t>& empty_columns() const { return empty_columns_; }

  std::vector<float> column(std::size_t j) const;
  AffinityBlock transposed() const;

 private:
  friend AffinityBlock column_softmax(const AffinityBlock&, double,
                                      const std::function<bool(std::size_t, std::size_t)>&);
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> values_;
  AffinityState state_ = AffinityState::Raw;
  std::vector<std::uint8_t> empty_columns_;
};

/// Predicate: true if context row `row` may not contribute to target column `col`.
using RowExclusion = std::function<bool(std::size_t row, std::size_t col)>;

struct TopKSelection {
  std::size_t k = 0;
  std::size_t cols = 0;
  std::vector<std::uint32_t> indices;  // [k][cols]; slots past effective_k are 0
  std::vector<double> weights;         // [k][cols]; slots past effective_k are 0
  std::vector<std::uint32_t> effective_k;
  bool softmaxed = false;

  std::uint32_t index(std::size_t slot, std::size_t col) const { return indices[slot * cols + col]; }
  double weight(std::size_t slot, std::size_t col) const { return weights[slot * cols + col]; }
};

/// A[i][j] = <context column i, target column j>, double accumulation, stored as float.
AffinityBlock compute_affinity(const FeatureMatrix& context, const FeatureMatrix& target,
                               const simd::Kernels& kernels = simd::active());

/// Column-wise softmax of A / T. Excluded rows are dropped from the normalisation set and
/// left at zero; a column with every row excluded stays all-zero and is flagged.
AffinityBlock column_softmax(const AffinityBlock& affinity, double temperature,
                             const RowExclusion& excluded = {});

/// Joins context frames column-wise, first frame first.
std::pair<FeatureMatrix, LabelMatrix> concat_context(std::span<const FeatureMatrix> features,
                                                     std::span<const LabelMatrix> labels);

/// Per column, the k largest non-excluded entries ordered by (value desc, row asc).
TopKSelection topk_select(const AffinityBlock& affinity, std::size_t k, const RowExclusion& excluded = {});

/// Replaces the selected values of each column with their softmax at temperature T.
TopKSelection softmax_over_topk(TopKSelection selection, double temperature);

/// z[l][j] = sum over selected rows i of weight(i, j) * y[l][i].
LabelMatrix soft_copy(const TopKSelection& selection, const LabelMatrix& labels);

namespace column {

/// Candidate context row with its score for one target column.
struct Entry {
  std::uint32_t row = 0;
  double value = 0.0;
};

/// Ordering used by every top-k selection: larger value first, then lower row.
inline bool ranks_before(const Entry& a, const Entry& b) {
  return a.value > b.value || (a.value == b.value && a.row < b.row);
}

/// Sorts the best min(k, size) entries to the front and truncates the rest.
void select_top(std::vector<Entry>& entries, std::size_t k);

/// Softmax of `values / temperature` in place; empty spans are left alone.
void softmax(std::span<double> values, double temperature);

/// Softmax over the entry values in place.
void softmax(std::span<Entry> entries, double temperature);

}  // namespace column

void require_positive_temperature(double temperature);

}  // namespace labelprop
