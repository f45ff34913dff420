#include "labelprop/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "labelprop/errors.hpp"

namespace labelprop {

void require_positive_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ConfigError("temperature must be a positive finite number, got " + std::to_string(temperature));
}

AffinityBlock::AffinityBlock(std::size_t rows, std::size_t cols, std::vector<float> values, AffinityState state)
    : rows_(rows), cols_(cols), values_(std::move(values)), state_(state), empty_columns_(cols, 0) {
  if (values_.size() != rows * cols) throw ConfigError("AffinityBlock: value count does not match P x N");
}

std::vector<float> AffinityBlock::column(std::size_t j) const {
  std::vector<float> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = values_[i * cols_ + j];
  return out;
}

AffinityBlock AffinityBlock::transposed() const {
  std::vector<float> out(values_.size());
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) out[j * rows_ + i] = values_[i * cols_ + j];
  return AffinityBlock(cols_, rows_, std::move(out), state_);
}

AffinityBlock compute_affinity(const FeatureMatrix& context, const FeatureMatrix& target,
                               const simd::Kernels& kernels) {
  if (context.channels() != target.channels())
    throw ConfigError("compute_affinity: channel mismatch (" + std::to_string(context.channels()) + " vs " +
                      std::to_string(target.channels()) + ")");
  const std::size_t dim = context.channels();
  const std::size_t rows = context.cols();
  const std::size_t cols = target.cols();
  const auto ctx = context.location_major();
  const auto tgt = target.location_major();
  std::vector<float> values(rows * cols);
  std::vector<float> col(rows);
  for (std::size_t j = 0; j < cols; ++j) {
    kernels.dot_rows(ctx.data(), rows, dim, tgt.data() + j * dim, col.data());
    for (std::size_t i = 0; i < rows; ++i) values[i * cols + j] = col[i];
  }
  return AffinityBlock(rows, cols, std::move(values));
}

AffinityBlock column_softmax(const AffinityBlock& affinity, double temperature, const RowExclusion& excluded) {
  require_positive_temperature(temperature);
  if (affinity.state() != AffinityState::Raw) throw ConfigError("column_softmax: block is already normalized");
  const std::size_t rows = affinity.rows();
  const std::size_t cols = affinity.cols();
  AffinityBlock out(rows, cols, std::vector<float>(rows * cols, 0.0f), AffinityState::ColumnNormalized);
  std::vector<double> kept;
  std::vector<std::size_t> kept_rows;
  for (std::size_t j = 0; j < cols; ++j) {
    kept.clear();
    kept_rows.clear();
    for (std::size_t i = 0; i < rows; ++i) {
      if (excluded && excluded(i, j)) continue;
      kept.push_back(affinity(i, j));
      kept_rows.push_back(i);
    }
    if (kept.empty()) {
      out.empty_columns_[j] = 1;
      continue;
    }
    column::softmax(kept, temperature);
    for (std::size_t t = 0; t < kept.size(); ++t) out(kept_rows[t], j) = static_cast<float>(kept[t]);
  }
  return out;
}

std::pair<FeatureMatrix, LabelMatrix> concat_context(std::span<const FeatureMatrix> features,
                                                     std::span<const LabelMatrix> labels) {
  if (features.empty() || features.size() != labels.size())
    throw ConfigError("concat_context: need one label matrix per feature matrix");
  const auto& first = features.front();
  const std::size_t n = first.cols();
  const std::size_t classes = labels.front().classes();
  for (std::size_t f = 0; f < features.size(); ++f) {
    if (features[f].channels() != first.channels() || features[f].cols() != n ||
        features[f].height() != first.height() || features[f].width() != first.width())
      throw ConfigError("concat_context: feature frame " + std::to_string(f) + " has a different shape");
    if (labels[f].classes() != classes || labels[f].cols() != n)
      throw ConfigError("concat_context: label frame " + std::to_string(f) + " has a different shape");
  }
  const std::size_t frames = features.size();
  const std::size_t total = n * frames;
  std::vector<float> fv(first.channels() * total);
  for (std::size_t c = 0; c < first.channels(); ++c)
    for (std::size_t f = 0; f < frames; ++f) {
      const auto src = features[f].channel(c);
      std::copy(src.begin(), src.end(), fv.begin() + static_cast<std::ptrdiff_t>(c * total + f * n));
    }
  std::vector<float> lv(classes * total);
  for (std::size_t l = 0; l < classes; ++l)
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t j = 0; j < n; ++j) lv[l * total + f * n + j] = labels[f](l, j);
  bool normalized = std::all_of(features.begin(), features.end(), [](const auto& m) { return m.normalized(); });
  return {FeatureMatrix(first.channels(), total, first.height(), first.width(), std::move(fv), normalized),
          LabelMatrix(classes, total, first.height(), first.width(), std::move(lv))};
}

TopKSelection topk_select(const AffinityBlock& affinity, std::size_t k, const RowExclusion& excluded) {
  if (k == 0) throw ConfigError("topk_select: k must be at least 1");
  const std::size_t rows = affinity.rows();
  const std::size_t cols = affinity.cols();
  TopKSelection sel;
  sel.k = k;
  sel.cols = cols;
  sel.indices.assign(k * cols, 0);
  sel.weights.assign(k * cols, 0.0);
  sel.effective_k.assign(cols, 0);
  std::vector<column::Entry> entries;
  for (std::size_t j = 0; j < cols; ++j) {
    entries.clear();
    for (std::size_t i = 0; i < rows; ++i) {
      if (excluded && excluded(i, j)) continue;
      entries.push_back({static_cast<std::uint32_t>(i), affinity(i, j)});
    }
    column::select_top(entries, k);
    sel.effective_k[j] = static_cast<std::uint32_t>(entries.size());
    for (std::size_t s = 0; s < entries.size(); ++s) {
      sel.indices[s * cols + j] = entries[s].row;
      sel.weights[s * cols + j] = entries[s].value;
    }
  }
  return sel;
}

TopKSelection softmax_over_topk(TopKSelection selection, double temperature) {
  require_positive_temperature(temperature);
  std::vector<double> w;
  for (std::size_t j = 0; j < selection.cols; ++j) {
    const std::size_t count = selection.effective_k[j];
    w.resize(count);
    for (std::size_t s = 0; s < count; ++s) w[s] = selection.weight(s, j);
    column::softmax(w, temperature);
    for (std::size_t s = 0; s < count; ++s) selection.weights[s * selection.cols + j] = w[s];
  }
  selection.softmaxed = true;
  return selection;
}

LabelMatrix soft_copy(const TopKSelection& selection, const LabelMatrix& labels) {
  const std::size_t cols = selection.cols;
  const std::size_t cells = labels.height() * labels.width();
  if (cols != cells)
    throw ConfigError("soft_copy: target column count " + std::to_string(cols) + " does not match the label grid");
  LabelMatrix out(labels.classes(), cols, labels.height(), labels.width());
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t l = 0; l < labels.classes(); ++l) {
      double acc = 0.0;
      for (std::size_t s = 0; s < selection.effective_k[j]; ++s) {
        const std::uint32_t row = selection.index(s, j);
        if (row >= labels.cols()) throw ConfigError("soft_copy: selected row out of range");
        acc += selection.weight(s, j) * labels(l, row);
      }
      out(l, j) = static_cast<float>(acc);
    }
  }
  return out;
}

namespace column {

void select_top(std::vector<Entry>& entries, std::size_t k) {
  if (k < entries.size()) {
    std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(k), entries.end(),
                      ranks_before);
    entries.resize(k);
  } else {
    std::sort(entries.begin(), entries.end(), ranks_before);
  }
}

void softmax(std::span<double> values, double temperature) {
  if (values.empty()) return;
  const double peak = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (auto& v : values) {
    v = std::exp((v - peak) / temperature);
    total += v;
  }
  for (auto& v : values) v /= total;
}

void softmax(std::span<Entry> entries, double temperature) {
  if (entries.empty()) return;
  double peak = entries.front().value;
  for (const auto& e : entries) peak = std::max(peak, e.value);
  double total = 0.0;
  for (auto& e : entries) {
    e.value = std::exp((e.value - peak) / temperature);
    total += e.value;
  }
  for (auto& e : entries) e.value /= total;
}

}  // namespace column

}  // namespace labelprop
