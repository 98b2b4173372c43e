#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "g2s/common.hpp"
#include "g2s/tensor.hpp"

namespace g2s::ad {

enum class OpKind {
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kConcat,
  kSliceCols,
  kRelu,
  kTanh,
  kSigmoid,
  kSoftmax,
  kSegmentSum,
  kSegmentSoftmax,
  kEmbeddingLookup,
  kLayerNorm,
  kDropout,
  kLog,
  kExp,
  kRsqrt,
  kClampMin,
  kSumAxis,
  kSumAll,
  kPick,
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kConcat: return "concat";
    case OpKind::kSliceCols: return "slice-cols";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kSegmentSum: return "segment-sum";
    case OpKind::kSegmentSoftmax: return "segment-softmax";
    case OpKind::kEmbeddingLookup: return "embedding-lookup";
    case OpKind::kLayerNorm: return "layer-normalization";
    case OpKind::kDropout: return "dropout";
    case OpKind::kLog: return "log";
    case OpKind::kExp: return "exp";
    case OpKind::kRsqrt: return "rsqrt";
    case OpKind::kClampMin: return "clamp-min";
    case OpKind::kSumAxis: return "sum-axis";
    case OpKind::kSumAll: return "sum-all";
    case OpKind::kPick: return "pick";
  }
  return "?";
}

using IdList = std::shared_ptr<const std::vector<std::int32_t>>;

inline IdList make_ids(std::vector<std::int32_t> v) {
  return std::make_shared<const std::vector<std::int32_t>>(std::move(v));
}

// Saved forward context, enough to replay any op backward.
template <typename T>
struct OpCtx {
  int axis = -1;
  bool trans_a = false;
  bool trans_b = false;
  T scalar{};                       // eps / clamp floor / keep probability
  IdList ids;                       // segment ids, lookup ids, pick ids
  std::size_t num_segments = 0;
  std::vector<std::size_t> offsets; // concat part sizes or slice {start, len}
  std::vector<T> saved;             // layer-norm xhat and inv-sigma
  std::vector<std::uint8_t> mask;   // dropout keep mask
};

template <typename T>
struct TapeRecord {
  OpKind kind;
  std::vector<Tensor<T>> inputs;
  Tensor<T> output;
  OpCtx<T> ctx;
};

namespace detail {

template <typename T>
inline void check_finite(std::span<const T> v, OpKind kind) {
  for (const T x : v) {
    if (!std::isfinite(static_cast<double>(x))) {
      throw NumericError(std::string(op_name(kind)) + ": non-finite output value");
    }
  }
}

struct Dim2 {
  std::size_t r = 1;
  std::size_t c = 1;
};

inline Dim2 as2d(const Shape& s, OpKind kind) {
  if (s.size() == 2) return {s[0], s[1]};
  if (s.size() == 1) return {1, s[0]};
  throw ShapeError(std::string(op_name(kind)) + ": rank " + std::to_string(s.size()) +
                   " unsupported, shape " + shape_str(s));
}

// C (m x n) = op_a(A) * op_b(B), optionally accumulating.
template <typename T>
inline void mm(std::span<T> out, std::span<const T> a, std::size_t am, std::size_t an,
               bool ta, std::span<const T> b, std::size_t bm, std::size_t bn, bool tb,
               bool accumulate) {
  const std::size_t m = ta ? an : am;
  const std::size_t k = ta ? am : an;
  const std::size_t n = tb ? bm : bn;
  if (!accumulate) std::fill(out.begin(), out.end(), T(0));
  if (!ta && !tb) {
    for (std::size_t i = 0; i < m; ++i) {
      T* ci = out.data() + i * n;
      const T* ai = a.data() + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const T av = ai[p];
        if (av == T(0)) continue;
        const T* bp = b.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else if (!ta && tb) {
    for (std::size_t i = 0; i < m; ++i) {
      const T* ai = a.data() + i * k;
      T* ci = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const T* bj = b.data() + j * k;
        T acc = T(0);
        for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
        ci[j] += acc;
      }
    }
  } else if (ta && !tb) {
    for (std::size_t p = 0; p < k; ++p) {
      const T* ap = a.data() + p * m;
      const T* bp = b.data() + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const T av = ap[i];
        if (av == T(0)) continue;
        T* ci = out.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      T* ci = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        T acc = T(0);
        for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[j * bn + p];
        ci[j] += acc;
      }
    }
  }
}

// Sum `src` (rs x cs) into `dst` (rd x cd) where each dst dim is either equal
// to the src dim or 1 (gradient of a broadcast operand).
template <typename T>
inline void reduce_into(std::span<T> dst, Dim2 dd, std::span<const T> src, Dim2 ds) {
  for (std::size_t i = 0; i < ds.r; ++i) {
    const std::size_t di = dd.r == 1 ? 0 : i;
    for (std::size_t j = 0; j < ds.c; ++j) {
      const std::size_t dj = dd.c == 1 ? 0 : j;
      dst[di * dd.c + dj] += src[i * ds.c + j];
    }
  }
}

}  // namespace detail

// Records operations in execution order; replaying the records in reverse
// drives reverse-mode differentiation.
template <typename T>
class Tape {
 public:
  void record(TapeRecord<T> r) { records_.push_back(std::move(r)); }

  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }
  const TapeRecord<T>& at(std::size_t i) const { return records_[i]; }

  // Seeds d(loss)/d(loss) = 1 and sweeps the records once in reverse.
  // Leaves listed in `leaves` that the loss does not reach get a zero grad.
  void backward(const Tensor<T>& loss, std::span<const Tensor<T>> leaves = {});

 private:
  std::vector<TapeRecord<T>> records_;
};

namespace detail {

template <typename T>
inline Tensor<T> finish_op(Tape<T>* tape, OpKind kind, std::vector<Tensor<T>> inputs,
                           Tensor<T> out, OpCtx<T> ctx) {
  check_finite<T>(out.values(), kind);
  bool needs_grad = false;
  if (tape != nullptr) {
    for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  }
  if (needs_grad) {
    out.set_requires_grad(true);
    tape->record(TapeRecord<T>{kind, std::move(inputs), out, std::move(ctx)});
  }
  return out;
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b,
                 bool trans_a = false, bool trans_b = false) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: needs rank-2 inputs, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t k = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                     (trans_a ? "^T" : "") + " x " + shape_str(b.shape()) +
                     (trans_b ? "^T" : ""));
  }
  Tensor<T> out = Tensor<T>::zeros({m, n});
  detail::mm<T>(out.values(), a.values(), a.rows(), a.cols(), trans_a, b.values(), b.rows(),
                b.cols(), trans_b, false);
  OpCtx<T> ctx;
  ctx.trans_a = trans_a;
  ctx.trans_b = trans_b;
  return detail::finish_op(tape, OpKind::kMatmul, {a, b}, std::move(out), std::move(ctx));
}

namespace detail {

template <typename T, typename F>
inline Tensor<T> broadcast_binary(Tape<T>* tape, OpKind kind, const Tensor<T>& a,
                                  const Tensor<T>& b, F&& fn) {
  const Dim2 da = as2d(a.shape(), kind);
  const Dim2 db = as2d(b.shape(), kind);
  const std::size_t r = std::max(da.r, db.r);
  const std::size_t c = std::max(da.c, db.c);
  const bool ok = (da.r == r || da.r == 1) && (db.r == r || db.r == 1) &&
                  (da.c == c || da.c == 1) && (db.c == c || db.c == 1);
  if (!ok) {
    throw ShapeError(std::string(op_name(kind)) + ": shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()) + " do not broadcast");
  }
  const bool rank1 = a.rank() == 1 && b.rank() == 1;
  Tensor<T> out = rank1 ? Tensor<T>::zeros({c}) : Tensor<T>::zeros({r, c});
  auto ov = out.values();
  auto av = a.values();
  auto bv = b.values();
  if (da.r == db.r && da.c == db.c) {
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = fn(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < r; ++i) {
      const std::size_t ia = da.r == 1 ? 0 : i;
      const std::size_t ib = db.r == 1 ? 0 : i;
      for (std::size_t j = 0; j < c; ++j) {
        const std::size_t ja = da.c == 1 ? 0 : j;
        const std::size_t jb = db.c == 1 ? 0 : j;
        ov[i * c + j] = fn(av[ia * da.c + ja], bv[ib * db.c + jb]);
      }
    }
  }
  return finish_op(tape, kind, {a, b}, std::move(out), OpCtx<T>{});
}

}  // namespace detail

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  return detail::broadcast_binary(tape, OpKind::kAdd, a, b,
                                  [](T x, T y) { return x + y; });
}

template <typename T>
Tensor<T> sub(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  return detail::broadcast_binary(tape, OpKind::kSub, a, b,
                                  [](T x, T y) { return x - y; });
}

template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  return detail::broadcast_binary(tape, OpKind::kMul, a, b,
                                  [](T x, T y) { return x * y; });
}

template <typename T>
Tensor<T> concat(Tape<T>* tape, const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  const std::size_t rank = parts[0].rank();
  for (const auto& p : parts) {
    if (p.rank() != rank) throw ShapeError("concat: mixed input ranks");
  }
  if (rank == 1) {
    std::size_t total = 0;
    OpCtx<T> ctx;
    for (const auto& p : parts) {
      ctx.offsets.push_back(p.size());
      total += p.size();
    }
    ctx.axis = 0;
    Tensor<T> out = Tensor<T>::zeros({total});
    std::size_t pos = 0;
    for (const auto& p : parts) {
      std::copy(p.values().begin(), p.values().end(), out.values().begin() + pos);
      pos += p.size();
    }
    return detail::finish_op(tape, OpKind::kConcat, parts, std::move(out), std::move(ctx));
  }
  OpCtx<T> ctx;
  ctx.axis = axis;
  if (axis == 0) {
    const std::size_t c = parts[0].cols();
    std::size_t rows = 0;
    for (const auto& p : parts) {
      if (p.cols() != c) {
        throw ShapeError("concat: column mismatch, " + shape_str(p.shape()) + " vs " +
                         shape_str(parts[0].shape()));
      }
      ctx.offsets.push_back(p.rows());
      rows += p.rows();
    }
    Tensor<T> out = Tensor<T>::zeros({rows, c});
    std::size_t pos = 0;
    for (const auto& p : parts) {
      std::copy(p.values().begin(), p.values().end(), out.values().begin() + pos);
      pos += p.size();
    }
    return detail::finish_op(tape, OpKind::kConcat, parts, std::move(out), std::move(ctx));
  }
  const std::size_t r = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) {
      throw ShapeError("concat: row mismatch, " + shape_str(p.shape()) + " vs " +
                       shape_str(parts[0].shape()));
    }
    ctx.offsets.push_back(p.cols());
    cols += p.cols();
  }
  Tensor<T> out = Tensor<T>::zeros({r, cols});
  std::size_t col0 = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < r; ++i) {
      std::copy(p.values().begin() + i * p.cols(), p.values().begin() + (i + 1) * p.cols(),
                out.values().begin() + i * cols + col0);
    }
    col0 += p.cols();
  }
  return detail::finish_op(tape, OpKind::kConcat, parts, std::move(out), std::move(ctx));
}

template <typename T>
Tensor<T> slice_cols(Tape<T>* tape, const Tensor<T>& x, std::size_t start, std::size_t len) {
  const std::size_t c = x.cols();
  if (start + len > c) {
    throw ShapeError("slice-cols: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") exceeds " + shape_str(x.shape()));
  }
  OpCtx<T> ctx;
  ctx.offsets = {start, len};
  if (x.rank() == 1) {
    Tensor<T> out = Tensor<T>::zeros({len});
    std::copy(x.values().begin() + start, x.values().begin() + start + len,
              out.values().begin());
    return detail::finish_op(tape, OpKind::kSliceCols, {x}, std::move(out), std::move(ctx));
  }
  const std::size_t r = x.rows();
  Tensor<T> out = Tensor<T>::zeros({r, len});
  for (std::size_t i = 0; i < r; ++i) {
    std::copy(x.values().begin() + i * c + start, x.values().begin() + i * c + start + len,
              out.values().begin() + i * len);
  }
  return detail::finish_op(tape, OpKind::kSliceCols, {x}, std::move(out), std::move(ctx));
}

namespace detail {

template <typename T, typename F>
inline Tensor<T> unary_op(Tape<T>* tape, OpKind kind, const Tensor<T>& x, F&& fn) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  auto ov = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = fn(xv[i]);
  return finish_op(tape, kind, {x}, std::move(out), OpCtx<T>{});
}

}  // namespace detail

template <typename T>
Tensor<T> relu(Tape<T>* tape, const Tensor<T>& x) {
  return detail::unary_op(tape, OpKind::kRelu, x, [](T v) { return v > T(0) ? v : T(0); });
}

template <typename T>
Tensor<T> tanh_op(Tape<T>* tape, const Tensor<T>& x) {
  return detail::unary_op(tape, OpKind::kTanh, x, [](T v) { return std::tanh(v); });
}

template <typename T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& x) {
  return detail::unary_op(tape, OpKind::kSigmoid, x, [](T v) {
    return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  });
}

template <typename T>
Tensor<T> log_op(Tape<T>* tape, const Tensor<T>& x) {
  return detail::unary_op(tape, OpKind::kLog, x, [](T v) { return std::log(v); });
}

template <typename T>
Tensor<T> exp_op(Tape<T>* tape, const Tensor<T>& x) {
  return detail::unary_op(tape, OpKind::kExp, x, [](T v) { return std::exp(v); });
}

template <typename T>
Tensor<T> rsqrt(Tape<T>* tape, const Tensor<T>& x, T eps) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  auto ov = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = T(1) / std::sqrt(xv[i] + eps);
  OpCtx<T> ctx;
  ctx.scalar = eps;
  return detail::finish_op(tape, OpKind::kRsqrt, {x}, std::move(out), std::move(ctx));
}

template <typename T>
Tensor<T> clamp_min(Tape<T>* tape, const Tensor<T>& x, T floor) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  auto ov = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] < floor ? floor : xv[i];
  OpCtx<T> ctx;
  ctx.scalar = floor;
  return detail::finish_op(tape, OpKind::kClampMin, {x}, std::move(out), std::move(ctx));
}

// Max-subtracted softmax; axis 1 normalizes each row, rank-1 input normalizes
// the whole vector.
template <typename T>
Tensor<T> softmax(Tape<T>* tape, const Tensor<T>& x, int axis = 1) {
  if (!(x.rank() == 1 || (x.rank() == 2 && axis == 1))) {
    throw ShapeError("softmax: unsupported axis " + std::to_string(axis) + " for shape " +
                     shape_str(x.shape()));
  }
  const std::size_t r = x.rank() == 1 ? 1 : x.rows();
  const std::size_t c = x.rank() == 1 ? x.size() : x.cols();
  if (c == 0) throw ShapeError("softmax: empty axis");
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  auto ov = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < r; ++i) {
    const T* row = xv.data() + i * c;
    T* orow = ov.data() + i * c;
    T mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (std::size_t j = 0; j < c; ++j) orow[j] /= sum;
  }
  OpCtx<T> ctx;
  ctx.axis = 1;
  return detail::finish_op(tape, OpKind::kSoftmax, {x}, std::move(out), std::move(ctx));
}

template <typename T>
Tensor<T> segment_sum(Tape<T>* tape, const Tensor<T>& x, const IdList& segments,
                      std::size_t num_segments) {
  if (x.rank() != 2) throw ShapeError("segment-sum: needs rank-2 input");
  if (segments == nullptr || segments->size() != x.rows()) {
    throw ShapeError("segment-sum: segment ids do not align with rows of " +
                     shape_str(x.shape()));
  }
  const std::size_t d = x.cols();
  Tensor<T> out = Tensor<T>::zeros({num_segments, d});
  auto ov = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto s = (*segments)[i];
    if (s < 0 || static_cast<std::size_t>(s) >= num_segments) {
      throw ContractError("segment-sum: segment id out of range");
    }
    const T* row = xv.data() + i * d;
    T* orow = ov.data() + static_cast<std::size_t>(s) * d;
    for (std::size_t j = 0; j < d; ++j) orow[j] += row[j];
  }
  OpCtx<T> ctx;
  ctx.ids = segments;
  ctx.num_segments = num_segments;
  return detail::finish_op(tape, OpKind::kSegmentSum, {x}, std::move(out), std::move(ctx));
}

// Softmax over the entries of each segment independently. Input is a column
// vector [n x 1] or rank-1 [n].
template <typename T>
Tensor<T> segment_softmax(Tape<T>* tape, const Tensor<T>& x, const IdList& segments,
                          std::size_t num_segments) {
  const std::size_t n = x.rank() == 1 ? x.size() : x.rows();
  if (x.rank() == 2 && x.cols() != 1) {
    throw ShapeError("segment-softmax: needs a single score per row, got " +
                     shape_str(x.shape()));
  }
  if (segments == nullptr || segments->size() != n) {
    throw ShapeError("segment-softmax: segment ids do not align with input");
  }
  std::vector<T> mx(num_segments, std::numeric_limits<T>::lowest());
  auto xv = x.values();
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = (*segments)[i];
    if (s < 0 || static_cast<std::size_t>(s) >= num_segments) {
      throw ContractError("segment-softmax: segment id out of range");
    }
    mx[static_cast<std::size_t>(s)] = std::max(mx[static_cast<std::size_t>(s)], xv[i]);
  }
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  auto ov = out.values();
  std::vector<T> sum(num_segments, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>((*segments)[i]);
    ov[i] = std::exp(xv[i] - mx[s]);
    sum[s] += ov[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    ov[i] /= sum[static_cast<std::size_t>((*segments)[i])];
  }
  OpCtx<T> ctx;
  ctx.ids = segments;
  ctx.num_segments = num_segments;
  return detail::finish_op(tape, OpKind::kSegmentSoftmax, {x}, std::move(out), std::move(ctx));
}

// Row gather; also the embedding primitive. Gradients scatter-add into the
// table, so it works on parameters and intermediate matrices alike.
template <typename T>
Tensor<T> embedding_lookup(Tape<T>* tape, const Tensor<T>& table, const IdList& ids) {
  if (table.rank() != 2) throw ShapeError("embedding-lookup: table must be rank-2");
  if (ids == nullptr) throw ContractError("embedding-lookup: missing ids");
  const std::size_t d = table.cols();
  Tensor<T> out = Tensor<T>::zeros({ids->size(), d});
  auto ov = out.values();
  auto tv = table.values();
  for (std::size_t i = 0; i < ids->size(); ++i) {
    const auto r = (*ids)[i];
    if (r < 0 || static_cast<std::size_t>(r) >= table.rows()) {
      throw ContractError("embedding-lookup: id " + std::to_string(r) +
                          " out of range for table " + shape_str(table.shape()));
    }
    std::copy(tv.begin() + static_cast<std::size_t>(r) * d,
              tv.begin() + (static_cast<std::size_t>(r) + 1) * d, ov.begin() + i * d);
  }
  OpCtx<T> ctx;
  ctx.ids = ids;
  return detail::finish_op(tape, OpKind::kEmbeddingLookup, {table}, std::move(out),
                           std::move(ctx));
}

// Row-wise layer normalization with learnable scale and shift.
template <typename T>
Tensor<T> layer_norm(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps) {
  if (x.rank() != 2) throw ShapeError("layer-normalization: needs rank-2 input");
  const std::size_t d = x.cols();
  if (gamma.size() != d || beta.size() != d) {
    throw ShapeError("layer-normalization: scale/shift size mismatch with " +
                     shape_str(x.shape()));
  }
  const std::size_t r = x.rows();
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  OpCtx<T> ctx;
  ctx.scalar = eps;
  ctx.saved.resize(r * d + r);
  auto xv = x.values();
  auto ov = out.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  for (std::size_t i = 0; i < r; ++i) {
    const T* row = xv.data() + i * d;
    T mean = T(0);
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<T>(d);
    const T inv = T(1) / std::sqrt(var + eps);
    ctx.saved[r * d + i] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const T xhat = (row[j] - mean) * inv;
      ctx.saved[i * d + j] = xhat;
      ov[i * d + j] = gv[j] * xhat + bv[j];
    }
  }
  return detail::finish_op(tape, OpKind::kLayerNorm, {x, gamma, beta}, std::move(out),
                           std::move(ctx));
}

// Inverted dropout: in training mode entries are kept with probability
// 1 - p and scaled by 1/(1-p); in evaluation mode this is the identity.
template <typename T>
Tensor<T> dropout(Tape<T>* tape, const Tensor<T>& x, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout: p must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  const T keep = static_cast<T>(1.0 - p);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  OpCtx<T> ctx;
  ctx.scalar = keep;
  ctx.mask.resize(x.size());
  auto ov = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const bool keep_it = rng.uniform() < static_cast<double>(keep);
    ctx.mask[i] = keep_it ? 1 : 0;
    ov[i] = keep_it ? xv[i] / keep : T(0);
  }
  return detail::finish_op(tape, OpKind::kDropout, {x}, std::move(out), std::move(ctx));
}

template <typename T>
Tensor<T> sum_axis(Tape<T>* tape, const Tensor<T>& x, int axis) {
  if (x.rank() == 1) {
    if (axis != 0) throw ShapeError("sum-axis: axis out of range for rank-1 input");
    Tensor<T> out = Tensor<T>::zeros({1});
    T acc = T(0);
    for (T v : x.values()) acc += v;
    out.at(0) = acc;
    OpCtx<T> ctx;
    ctx.axis = 0;
    return detail::finish_op(tape, OpKind::kSumAxis, {x}, std::move(out), std::move(ctx));
  }
  if (axis != 0 && axis != 1) throw ShapeError("sum-axis: axis must be 0 or 1");
  const std::size_t r = x.rows();
  const std::size_t c = x.cols();
  Tensor<T> out = axis == 0 ? Tensor<T>::zeros({1, c}) : Tensor<T>::zeros({r, 1});
  auto ov = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      ov[axis == 0 ? j : i] += xv[i * c + j];
    }
  }
  OpCtx<T> ctx;
  ctx.axis = axis;
  return detail::finish_op(tape, OpKind::kSumAxis, {x}, std::move(out), std::move(ctx));
}

template <typename T>
Tensor<T> sum_all(Tape<T>* tape, const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros({1});
  T acc = T(0);
  for (T v : x.values()) acc += v;
  out.at(0) = acc;
  return detail::finish_op(tape, OpKind::kSumAll, {x}, std::move(out), OpCtx<T>{});
}

// out[i] = x[i, ids[i]].
template <typename T>
Tensor<T> pick(Tape<T>* tape, const Tensor<T>& x, const IdList& ids) {
  if (x.rank() != 2) throw ShapeError("pick: needs rank-2 input");
  if (ids == nullptr || ids->size() != x.rows()) {
    throw ShapeError("pick: ids do not align with rows of " + shape_str(x.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros({ids->size()});
  for (std::size_t i = 0; i < ids->size(); ++i) {
    const auto j = (*ids)[i];
    if (j < 0 || static_cast<std::size_t>(j) >= x.cols()) {
      throw ContractError("pick: column id out of range");
    }
    out.at(i) = x.at(i, static_cast<std::size_t>(j));
  }
  OpCtx<T> ctx;
  ctx.ids = ids;
  return detail::finish_op(tape, OpKind::kPick, {x}, std::move(out), std::move(ctx));
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
inline void backward_record(const TapeRecord<T>& rec) {
  const Tensor<T>& out = rec.output;
  auto dy = out.grad();
  auto grad_of = [](const Tensor<T>& t) {
    Tensor<T> copy = t;
    copy.ensure_grad();
    return copy.grad();
  };
  switch (rec.kind) {
    case OpKind::kMatmul: {
      const Tensor<T>& a = rec.inputs[0];
      const Tensor<T>& b = rec.inputs[1];
      const bool ta = rec.ctx.trans_a;
      const bool tb = rec.ctx.trans_b;
      if (a.requires_grad()) {
        auto da = grad_of(a);
        if (!ta && !tb) {
          mm<T>(da, dy, out.rows(), out.cols(), false, b.values(), b.rows(), b.cols(), true,
                true);
        } else if (!ta && tb) {
          mm<T>(da, dy, out.rows(), out.cols(), false, b.values(), b.rows(), b.cols(), false,
                true);
        } else if (ta && !tb) {
          mm<T>(da, b.values(), b.rows(), b.cols(), false, dy, out.rows(), out.cols(), true,
                true);
        } else {
          mm<T>(da, b.values(), b.rows(), b.cols(), true, dy, out.rows(), out.cols(), true,
                true);
        }
      }
      if (b.requires_grad()) {
        auto db = grad_of(b);
        if (!ta && !tb) {
          mm<T>(db, a.values(), a.rows(), a.cols(), true, dy, out.rows(), out.cols(), false,
                true);
        } else if (!ta && tb) {
          mm<T>(db, dy, out.rows(), out.cols(), true, a.values(), a.rows(), a.cols(), false,
                true);
        } else if (ta && !tb) {
          mm<T>(db, a.values(), a.rows(), a.cols(), false, dy, out.rows(), out.cols(), false,
                true);
        } else {
          mm<T>(db, dy, out.rows(), out.cols(), true, a.values(), a.rows(), a.cols(), true,
                true);
        }
      }
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      const Tensor<T>& a = rec.inputs[0];
      const Tensor<T>& b = rec.inputs[1];
      const Dim2 dd = as2d(out.shape(), rec.kind);
      const Dim2 da = as2d(a.shape(), rec.kind);
      const Dim2 db = as2d(b.shape(), rec.kind);
      if (a.requires_grad()) {
        auto ga = grad_of(a);
        if (rec.kind == OpKind::kMul) {
          std::vector<T> tmp(dy.size());
          auto bv = b.values();
          for (std::size_t i = 0; i < dd.r; ++i) {
            for (std::size_t j = 0; j < dd.c; ++j) {
              const std::size_t ib = db.r == 1 ? 0 : i;
              const std::size_t jb = db.c == 1 ? 0 : j;
              tmp[i * dd.c + j] = dy[i * dd.c + j] * bv[ib * db.c + jb];
            }
          }
          reduce_into<T>(ga, da, tmp, dd);
        } else {
          reduce_into<T>(ga, da, dy, dd);
        }
      }
      if (b.requires_grad()) {
        auto gb = grad_of(b);
        std::vector<T> tmp(dy.size());
        auto av = a.values();
        for (std::size_t i = 0; i < dd.r; ++i) {
          for (std::size_t j = 0; j < dd.c; ++j) {
            const std::size_t ia = da.r == 1 ? 0 : i;
            const std::size_t ja = da.c == 1 ? 0 : j;
            T v = dy[i * dd.c + j];
            if (rec.kind == OpKind::kMul) v *= av[ia * da.c + ja];
            if (rec.kind == OpKind::kSub) v = -v;
            tmp[i * dd.c + j] = v;
          }
        }
        reduce_into<T>(gb, db, tmp, dd);
      }
      break;
    }
    case OpKind::kConcat: {
      const int axis = rec.ctx.axis;
      if (rec.inputs[0].rank() == 1) {
        std::size_t pos = 0;
        for (const auto& p : rec.inputs) {
          if (p.requires_grad()) {
            auto gp = grad_of(p);
            for (std::size_t i = 0; i < p.size(); ++i) gp[i] += dy[pos + i];
          }
          pos += p.size();
        }
      } else if (axis == 0) {
        std::size_t pos = 0;
        for (const auto& p : rec.inputs) {
          if (p.requires_grad()) {
            auto gp = grad_of(p);
            for (std::size_t i = 0; i < p.size(); ++i) gp[i] += dy[pos + i];
          }
          pos += p.size();
        }
      } else {
        const std::size_t cols = out.cols();
        std::size_t col0 = 0;
        for (const auto& p : rec.inputs) {
          if (p.requires_grad()) {
            auto gp = grad_of(p);
            for (std::size_t i = 0; i < p.rows(); ++i) {
              for (std::size_t j = 0; j < p.cols(); ++j) {
                gp[i * p.cols() + j] += dy[i * cols + col0 + j];
              }
            }
          }
          col0 += p.cols();
        }
      }
      break;
    }
    case OpKind::kSliceCols: {
      const Tensor<T>& x = rec.inputs[0];
      if (!x.requires_grad()) break;
      auto gx = grad_of(x);
      const std::size_t start = rec.ctx.offsets[0];
      const std::size_t len = rec.ctx.offsets[1];
      const std::size_t c = x.cols();
      const std::size_t r = x.rank() == 1 ? 1 : x.rows();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < len; ++j) gx[i * c + start + j] += dy[i * len + j];
      }
      break;
    }
    case OpKind::kRelu: {
      const Tensor<T>& x = rec.inputs[0];
      if (!x.requires_grad()) break;
      auto gx = grad_of(x);
      auto xv = x.values();
      for (std::size_t i = 0; i < xv.size(); ++i) {
        if (xv[i] > T(0)) gx[i] += dy[i];
      }
      break;
    }
    case OpKind::kTanh: {
      if (!rec.inputs[0].requires_grad()) break;
      auto gx = grad_of(rec.inputs[0]);
      auto yv = out.values();
      for (std::size_t i = 0; i < yv.size(); ++i) gx[i] += dy[i] * (T(1) - yv[i] * yv[i]);
      break;
    }
    case OpKind::kSigmoid: {
      if (!rec.inputs[0].requires_grad()) break;
      auto gx = grad_of(rec.inputs[0]);
      auto yv = out.values();
      for (std::size_t i = 0; i < yv.size(); ++i) gx[i] += dy[i] * yv[i] * (T(1) - yv[i]);
      break;
    }
    case OpKind::kLog: {
      if (!rec.inputs[0].requires_grad()) break;
      auto gx = grad_of(rec.inputs[0]);
      auto xv = rec.inputs[0].values();
      for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += dy[i] / xv[i];
      break;
    }
    case OpKind::kExp: {
      if (!rec.inputs[0].requires_grad()) break;
      auto gx = grad_of(rec.inputs[0]);
      auto yv = out.values();
      for (std::size_t i = 0; i < yv.size(); ++i) gx[i] += dy[i] * yv[i];
      break;
    }
    case OpKind::kRsqrt: {
      if (!rec.inputs[0].requires_grad()) break;
      auto gx = grad_of(rec.inputs[0]);
      auto yv = out.values();
      for (std::size_t i = 0; i < yv.size(); ++i) {
        gx[i] += dy[i] * T(-0.5) * yv[i] * yv[i] * yv[i];
      }
      break;
    }
    case OpKind::kClampMin: {
      if (!rec.inputs[0].requires_grad()) break;
      auto gx = grad_of(rec.inputs[0]);
      auto xv = rec.inputs[0].values();
      for (std::size_t i = 0; i < xv.size(); ++i) {
        if (xv[i] >= rec.ctx.scalar) gx[i] += dy[i];
      }
      break;
    }
    case OpKind::kSoftmax: {
      if (!rec.inputs[0].requires_grad()) break;
      auto gx = grad_of(rec.inputs[0]);
      auto yv = out.values();
      const std::size_t r = out.rank() == 1 ? 1 : out.rows();
      const std::size_t c = out.rank() == 1 ? out.size() : out.cols();
      for (std::size_t i = 0; i < r; ++i) {
        const T* yrow = yv.data() + i * c;
        const T* drow = dy.data() + i * c;
        T dot = T(0);
        for (std::size_t j = 0; j < c; ++j) dot += yrow[j] * drow[j];
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += yrow[j] * (drow[j] - dot);
      }
      break;
    }
    case OpKind::kSegmentSum: {
      if (!rec.inputs[0].requires_grad()) break;
      auto gx = grad_of(rec.inputs[0]);
      const auto& ids = *rec.ctx.ids;
      const std::size_t d = out.cols();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const T* drow = dy.data() + static_cast<std::size_t>(ids[i]) * d;
        for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += drow[j];
      }
      break;
    }
    case OpKind::kSegmentSoftmax: {
      if (!rec.inputs[0].requires_grad()) break;
      auto gx = grad_of(rec.inputs[0]);
      auto yv = out.values();
      const auto& ids = *rec.ctx.ids;
      std::vector<T> dot(rec.ctx.num_segments, T(0));
      for (std::size_t i = 0; i < ids.size(); ++i) {
        dot[static_cast<std::size_t>(ids[i])] += yv[i] * dy[i];
      }
      for (std::size_t i = 0; i < ids.size(); ++i) {
        gx[i] += yv[i] * (dy[i] - dot[static_cast<std::size_t>(ids[i])]);
      }
      break;
    }
    case OpKind::kEmbeddingLookup: {
      if (!rec.inputs[0].requires_grad()) break;
      auto gt = grad_of(rec.inputs[0]);
      const auto& ids = *rec.ctx.ids;
      const std::size_t d = out.cols();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        T* trow = gt.data() + static_cast<std::size_t>(ids[i]) * d;
        const T* drow = dy.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) trow[j] += drow[j];
      }
      break;
    }
    case OpKind::kLayerNorm: {
      const Tensor<T>& x = rec.inputs[0];
      const Tensor<T>& gamma = rec.inputs[1];
      const Tensor<T>& beta = rec.inputs[2];
      const std::size_t r = x.rows();
      const std::size_t d = x.cols();
      const T* xhat = rec.ctx.saved.data();
      const T* inv = rec.ctx.saved.data() + r * d;
      auto gv = gamma.values();
      if (gamma.requires_grad()) {
        auto gg = grad_of(gamma);
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < d; ++j) gg[j] += dy[i * d + j] * xhat[i * d + j];
        }
      }
      if (beta.requires_grad()) {
        auto gb = grad_of(beta);
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < d; ++j) gb[j] += dy[i * d + j];
        }
      }
      if (x.requires_grad()) {
        auto gx = grad_of(x);
        for (std::size_t i = 0; i < r; ++i) {
          T mean_dxhat = T(0);
          T mean_dxhat_xhat = T(0);
          for (std::size_t j = 0; j < d; ++j) {
            const T dxhat = dy[i * d + j] * gv[j];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xhat[i * d + j];
          }
          mean_dxhat /= static_cast<T>(d);
          mean_dxhat_xhat /= static_cast<T>(d);
          for (std::size_t j = 0; j < d; ++j) {
            const T dxhat = dy[i * d + j] * gv[j];
            gx[i * d + j] +=
                inv[i] * (dxhat - mean_dxhat - xhat[i * d + j] * mean_dxhat_xhat);
          }
        }
      }
      break;
    }
    case OpKind::kDropout: {
      if (!rec.inputs[0].requires_grad()) break;
      auto gx = grad_of(rec.inputs[0]);
      const T keep = rec.ctx.scalar;
      for (std::size_t i = 0; i < gx.size(); ++i) {
        if (rec.ctx.mask[i]) gx[i] += dy[i] / keep;
      }
      break;
    }
    case OpKind::kSumAxis: {
      if (!rec.inputs[0].requires_grad()) break;
      const Tensor<T>& x = rec.inputs[0];
      auto gx = grad_of(x);
      if (x.rank() == 1) {
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += dy[0];
      } else if (rec.ctx.axis == 0) {
        const std::size_t c = x.cols();
        for (std::size_t i = 0; i < x.rows(); ++i) {
          for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += dy[j];
        }
      } else {
        const std::size_t c = x.cols();
        for (std::size_t i = 0; i < x.rows(); ++i) {
          for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += dy[i];
        }
      }
      break;
    }
    case OpKind::kSumAll: {
      if (!rec.inputs[0].requires_grad()) break;
      auto gx = grad_of(rec.inputs[0]);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += dy[0];
      break;
    }
    case OpKind::kPick: {
      if (!rec.inputs[0].requires_grad()) break;
      auto gx = grad_of(rec.inputs[0]);
      const auto& ids = *rec.ctx.ids;
      const std::size_t c = rec.inputs[0].cols();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        gx[i * c + static_cast<std::size_t>(ids[i])] += dy[i];
      }
      break;
    }
  }
}

}  // namespace detail

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss, std::span<const Tensor<T>> leaves) {
  if (!loss.valid() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar tensor");
  }
  {
    Tensor<T> seed = loss;
    seed.zero_grad();
    seed.grad()[0] = T(1);
  }
  for (std::size_t i = records_.size(); i-- > 0;) {
    const TapeRecord<T>& rec = records_[i];
    if (!rec.output.has_grad()) continue;  // not on a path to the loss
    detail::backward_record(rec);
  }
  for (const Tensor<T>& leaf : leaves) {
    if (leaf.requires_grad() && !leaf.has_grad()) {
      Tensor<T> copy = leaf;
      copy.zero_grad();
    }
  }
}

}  // namespace g2s::ad
