#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "uqmc/distributions.hpp"
#include "uqmc/errors.hpp"
#include "uqmc/parallel.hpp"
#include "uqmc/rng.hpp"

namespace uqmc {

/// Deterministic scalar map from an input vector, with a declared cost per
/// evaluation in abstract work units.
class Model {
 public:
  using Function = std::function<double(std::span<const double>)>;

  Model(std::string id, std::size_t input_dim, double cost_per_eval, Function fn)
      : id_(std::move(id)), input_dim_(input_dim), cost_(cost_per_eval), fn_(std::move(fn)) {
    detail::require(input_dim_ >= 1, "model '" + id_ + "': input_dim must be positive");
    detail::require(cost_ > 0.0 && std::isfinite(cost_), "model '" + id_ + "': cost_per_eval must be positive");
    detail::require(static_cast<bool>(fn_), "model '" + id_ + "': empty evaluator");
  }

  const std::string& id() const { return id_; }
  std::size_t input_dim() const { return input_dim_; }
  double cost_per_eval() const { return cost_; }

  double operator()(std::span<const double> x) const { return fn_(x); }

 private:
  std::string id_;
  std::size_t input_dim_;
  double cost_;
  Function fn_;
};

/// Per-model evaluation counts. Totals are recomputed from counts, so
/// total() == sum(count * cost_per_eval) holds exactly.
class CostLedger {
 public:
  struct Entry {
    std::uint64_t count = 0;
    double cost_per_eval = 0.0;
    double seconds = 0.0;  // measured wall time, reporting only
  };

  void charge(const Model& m, std::uint64_t n, double seconds = 0.0) {
    auto& e = entries_[m.id()];
    e.count += n;
    e.cost_per_eval = m.cost_per_eval();
    e.seconds += seconds;
  }

  void merge(const CostLedger& other) {
    for (const auto& [id, e] : other.entries_) {
      auto& mine = entries_[id];
      mine.count += e.count;
      mine.cost_per_eval = e.cost_per_eval;
      mine.seconds += e.seconds;
    }
  }

  std::uint64_t count(const std::string& id) const {
    const auto it = entries_.find(id);
    return it == entries_.end() ? 0 : it->second.count;
  }

  std::uint64_t total_evaluations() const {
    std::uint64_t n = 0;
    for (const auto& [id, e] : entries_) n += e.count;
    return n;
  }

  double total() const {
    double c = 0.0;
    for (const auto& [id, e] : entries_) c += static_cast<double>(e.count) * e.cost_per_eval;
    return c;
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }

  /// When set, evaluate() records wall time. It never feeds allocation.
  bool measure_time = false;

 private:
  std::map<std::string, Entry> entries_;
};

/// Row-major batch of input vectors.
class InputBatch {
 public:
  InputBatch(std::size_t rows, std::size_t dim) : dim_(dim), data_(rows * dim) {}

  static InputBatch from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t dim = rows.empty() ? 1 : rows.front().size();
    InputBatch b(rows.size(), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      detail::require(rows[i].size() == dim, "ragged input batch");
      std::copy(rows[i].begin(), rows[i].end(), b.row(i).begin());
    }
    return b;
  }

  std::size_t rows() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  /// First n rows as a new batch.
  InputBatch prefix(std::size_t n) const {
    InputBatch b(n, dim_);
    std::copy(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(n * dim_), b.data_.begin());
    return b;
  }

 private:
  std::size_t dim_;
  std::vector<double> data_;
};

namespace detail {

inline std::string describe_input(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (std::size_t i = 0; i < x.size() && i < 8; ++i) os << (i ? ", " : "") << x[i];
  if (x.size() > 8) os << ", ... (" << x.size() << " components)";
  os << "]";
  return os.str();
}

}  // namespace detail

/// Outputs of `model` on every row, in row order; charges rows * cost to the
/// ledger. A non-finite output aborts with the offending input.
inline std::vector<double> evaluate(const Model& model, const InputBatch& inputs, CostLedger& ledger,
                                    const Executor& exec = {}) {
  if (inputs.rows() > 0 && inputs.dim() != model.input_dim()) {
    throw invalid_argument("model '" + model.id() + "' expects " + std::to_string(model.input_dim()) +
                           " inputs, got " + std::to_string(inputs.dim()));
  }
  std::vector<double> out(inputs.rows());
  const auto start = std::chrono::steady_clock::now();
  parallel_for(exec, inputs.rows(), [&](std::size_t i) {
    const double y = model(inputs.row(i));
    if (!std::isfinite(y)) {
      throw numeric_error("model '" + model.id() + "' returned a non-finite value at sample " +
                          std::to_string(i) + " for input " + detail::describe_input(inputs.row(i)));
    }
    out[i] = y;
  });
  double seconds = 0.0;
  if (ledger.measure_time) {
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  ledger.charge(model, inputs.rows(), seconds);
  return out;
}

inline std::vector<double> evaluate(const Model& model, const std::vector<std::vector<double>>& inputs,
                                    CostLedger& ledger, const Executor& exec = {}) {
  return evaluate(model, InputBatch::from_rows(inputs), ledger, exec);
}

/// Generator of random model inputs; one call fills one input vector.
class InputSampler {
 public:
  using DrawFn = std::function<void(SampleRng&, std::span<double>)>;

  InputSampler(std::size_t dim, DrawFn fn) : dim_(dim), fn_(std::move(fn)) {
    detail::require(dim_ >= 1, "input dimension must be positive");
  }

  /// Independent components, each distributed as `d`.
  static InputSampler iid(Distribution d, std::size_t dim = 1) {
    return InputSampler(dim, [d](SampleRng& rng, std::span<double> x) {
      for (double& v : x) v = draw(d, rng);
    });
  }

  std::size_t dim() const { return dim_; }
  void draw_into(SampleRng& rng, std::span<double> x) const { fn_(rng, x); }

  /// n inputs; row i uses stream.at(i).
  InputBatch draw_batch(const RngStream& stream, std::size_t n, const Executor& exec = {}) const {
    InputBatch batch(n, dim_);
    parallel_for(exec, n, [&](std::size_t i) {
      auto rng = stream.at(i);
      fn_(rng, batch.row(i));
    });
    return batch;
  }

 private:
  std::size_t dim_;
  DrawFn fn_;
};

/// Models M(0), ..., M(L) of increasing cost. Level l draws its own inputs;
/// `coarsen` maps a level-l input to the level-(l-1) input describing the
/// same random outcome (identity when levels share an input space).
class LevelHierarchy {
 public:
  using CoarsenFn = std::function<std::vector<double>(std::size_t level, std::span<const double>)>;

  LevelHierarchy(std::vector<Model> levels, std::vector<InputSampler> inputs, CoarsenFn coarsen = {})
      : levels_(std::move(levels)), inputs_(std::move(inputs)), coarsen_(std::move(coarsen)) {
    detail::require(!levels_.empty(), "level hierarchy needs at least one level");
    detail::require(inputs_.size() == levels_.size(), "one input sampler per level required");
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      detail::require(inputs_[l].dim() == levels_[l].input_dim(),
                      "input sampler dimension does not match model '" + levels_[l].id() + "'");
      if (l > 0) {
        detail::require(levels_[l].cost_per_eval() > levels_[l - 1].cost_per_eval(),
                        "level costs must be strictly increasing");
      }
    }
  }

  /// Levels evaluated on one shared input space.
  static LevelHierarchy shared_input(std::vector<Model> levels, const InputSampler& input) {
    std::vector<InputSampler> inputs(levels.size(), input);
    return LevelHierarchy(std::move(levels), std::move(inputs));
  }

  std::size_t size() const { return levels_.size(); }
  std::size_t max_level() const { return levels_.size() - 1; }
  const Model& model(std::size_t l) const { return levels_.at(l); }
  const InputSampler& input(std::size_t l) const { return inputs_.at(l); }

  /// Input for level `to` derived from a level-`from` input (to <= from).
  std::vector<double> coarsen(std::size_t from, std::size_t to, std::span<const double> x) const {
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t l = from; l > to; --l) {
      if (coarsen_) cur = coarsen_(l, cur);
    }
    return cur;
  }

  /// Hierarchy restricted to the listed levels (strictly increasing).
  LevelHierarchy select(std::vector<std::size_t> picks) const {
    detail::require(!picks.empty(), "select needs at least one level");
    std::vector<Model> models;
    std::vector<InputSampler> inputs;
    for (std::size_t i = 0; i < picks.size(); ++i) {
      detail::require(picks[i] < size(), "level index out of range");
      if (i > 0) detail::require(picks[i] > picks[i - 1], "levels must be strictly increasing");
      models.push_back(levels_[picks[i]]);
      inputs.push_back(inputs_[picks[i]]);
    }
    auto parent = std::make_shared<LevelHierarchy>(*this);
    CoarsenFn fn = [parent, picks](std::size_t level, std::span<const double> x) {
      return parent->coarsen(picks[level], picks[level - 1], x);
    };
    return LevelHierarchy(std::move(models), std::move(inputs), std::move(fn));
  }

  /// Levels 0..L.
  LevelHierarchy truncated(std::size_t L) const {
    std::vector<std::size_t> picks(std::min(L + 1, size()));
    for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
    return select(picks);
  }

 private:
  std::vector<Model> levels_;
  std::vector<InputSampler> inputs_;
  CoarsenFn coarsen_;
};

/// High-fidelity model plus ordered low-fidelity models on a shared input.
struct FidelityEnsemble {
  Model high;
  std::vector<Model> lows;
  InputSampler input;

  FidelityEnsemble(Model hi, std::vector<Model> lo, InputSampler in)
      : high(std::move(hi)), lows(std::move(lo)), input(std::move(in)) {
    detail::require(high.input_dim() == input.dim(), "high-fidelity model dimension mismatch");
    for (const auto& m : lows) {
      detail::require(m.input_dim() == input.dim(), "low-fidelity model '" + m.id() + "' dimension mismatch");
    }
  }
};

/// Outputs of level `fine` and of level `coarse` on the same n random
/// outcomes (stream.at(i) for outcome i). With no coarse level only the fine
/// outputs are produced.
struct CoupledSamples {
  std::vector<double> fine;
  std::vector<double> coarse;  // empty when there is no coarse level

  std::vector<double> differences() const {
    if (coarse.empty()) return fine;
    std::vector<double> d(fine.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = fine[i] - coarse[i];
    return d;
  }
};

inline CoupledSamples coupled_samples(const LevelHierarchy& h, std::size_t fine, std::optional<std::size_t> coarse,
                                      const RngStream& stream, std::size_t n, CostLedger& ledger,
                                      const Executor& exec = {}) {
  const InputBatch x = h.input(fine).draw_batch(stream, n, exec);
  CoupledSamples out;
  out.fine = evaluate(h.model(fine), x, ledger, exec);
  if (coarse) {
    InputBatch xc(n, h.model(*coarse).input_dim());
    parallel_for(exec, n, [&](std::size_t i) {
      const auto c = h.coarsen(fine, *coarse, x.row(i));
      std::copy(c.begin(), c.end(), xc.row(i).begin());
    });
    out.coarse = evaluate(h.model(*coarse), xc, ledger, exec);
  }
  return out;
}

}  // namespace uqmc
