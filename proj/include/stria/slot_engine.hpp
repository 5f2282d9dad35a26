#pragma once

// Packed-ciphertext semantics without cryptography: a ciphertext is a slot
// vector, and Add / Mult (ciphertext x plaintext) / Rotate act on it exactly
// while an OpLedger counts every operation.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <utility>

#include "stria/errors.hpp"
#include "stria/scalar.hpp"

namespace stria {

inline constexpr std::size_t kDefaultSlotCount = 8192;

/// Why a rotation happened. Tap rotations on alignment-rotated inputs
/// (input-rotation MIMO) are tallied as ex-Rot and also on their own.
enum class RotRole { kInRot, kExRot, kExRotTap };

struct OpLedger {
  std::uint64_t in_rot = 0;
  std::uint64_t ex_rot = 0;
  std::uint64_t mult = 0;
  std::uint64_t add = 0;
  std::uint64_t ex_rot_tap = 0;  // subset of ex_rot

  std::uint64_t rotations() const { return in_rot + ex_rot; }
  std::uint64_t ex_rot_align() const { return ex_rot - ex_rot_tap; }

  OpLedger& operator+=(const OpLedger& o) {
    in_rot += o.in_rot;
    ex_rot += o.ex_rot;
    mult += o.mult;
    add += o.add;
    ex_rot_tap += o.ex_rot_tap;
    return *this;
  }
  friend OpLedger operator+(OpLedger a, const OpLedger& b) { return a += b; }
  friend bool operator==(const OpLedger&, const OpLedger&) = default;
};

/// Component-wise after - before. Ledgers never decrease, so this is the
/// work done between two snapshots.
inline OpLedger ledger_diff(const OpLedger& before, const OpLedger& after) {
  return {after.in_rot - before.in_rot, after.ex_rot - before.ex_rot,
          after.mult - before.mult, after.add - before.add,
          after.ex_rot_tap - before.ex_rot_tap};
}

inline std::ostream& operator<<(std::ostream& os, const OpLedger& l) {
  return os << "{in_rot=" << l.in_rot << " ex_rot=" << l.ex_rot << " (tap " << l.ex_rot_tap
            << ") mult=" << l.mult << " add=" << l.add << "}";
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Slot count, encoding scale and the ledger for one engine run. Contexts
/// are not shared between threads; merge per-worker ledgers instead.
template <typename S>
class SimContext {
 public:
  explicit SimContext(std::size_t slot_count = kDefaultSlotCount,
                      int scale_bits = ScalarTraits<S>::kDefaultScaleBits,
                      int max_scale_bits = ScalarTraits<S>::kMaxScaleBits)
      : slot_count_(slot_count), scale_bits_(scale_bits), max_scale_bits_(max_scale_bits) {
    if (!is_power_of_two(slot_count)) throw ContextError("slot count must be a power of two");
    if (scale_bits < 0 || scale_bits > max_scale_bits)
      throw PrecisionError("scale outside the declared bit budget");
  }

  std::size_t slot_count() const { return slot_count_; }
  int scale_bits() const { return scale_bits_; }
  int max_scale_bits() const { return max_scale_bits_; }

  const OpLedger& ledger() const { return ledger_; }
  OpLedger snapshot() const { return ledger_; }
  void merge(const OpLedger& other) { ledger_ += other; }

  void count_rotation(RotRole role) {
    switch (role) {
      case RotRole::kInRot: ++ledger_.in_rot; break;
      case RotRole::kExRot: ++ledger_.ex_rot; break;
      case RotRole::kExRotTap:
        ++ledger_.ex_rot;
        ++ledger_.ex_rot_tap;
        break;
    }
  }
  void count_mult() { ++ledger_.mult; }
  void count_add() { ++ledger_.add; }

 private:
  std::size_t slot_count_;
  int scale_bits_;
  int max_scale_bits_;
  OpLedger ledger_;
};

template <typename S>
class SimCipher {
 public:
  SimCipher(const SimContext<S>& ctx, SlotVector<S> slots, int scale_bits)
      : slots_(std::move(slots)), scale_bits_(scale_bits) {
    if (static_cast<std::size_t>(slots_.size()) != ctx.slot_count())
      throw ContextError("cipher length differs from the context slot count");
  }

  const SlotVector<S>& slots() const { return slots_; }
  const S& operator[](std::size_t i) const { return slots_(static_cast<Eigen::Index>(i)); }
  std::size_t size() const { return static_cast<std::size_t>(slots_.size()); }
  int scale_bits() const { return scale_bits_; }

 private:
  SlotVector<S> slots_;
  int scale_bits_;
};

/// A plaintext slot vector at its own scale (kernel weights, masks).
template <typename S>
struct Plaintext {
  SlotVector<S> slots;
  int scale_bits = 0;
};

namespace detail {

template <typename S>
void require_slots(const SimContext<S>& ctx, const SimCipher<S>& c) {
  if (c.size() != ctx.slot_count()) throw ContextError("cipher belongs to a different context");
}

template <typename S>
struct CheckedSum {
  bool* overflow;
  S operator()(const S& a, const S& b) const {
    S r;
    if (checked_add(a, b, r)) *overflow = true;
    return r;
  }
};

template <typename S>
struct CheckedProduct {
  bool* overflow;
  S operator()(const S& a, const S& b) const {
    S r;
    if (checked_mul(a, b, r)) *overflow = true;
    return r;
  }
};

template <typename S>
SlotVector<S> lifted(const SlotVector<S>& v, int bits) {
  if (bits == 0) return v;
  return v.unaryExpr([bits](const S& x) { return lift(x, bits); });
}

}  // namespace detail

template <typename S>
SimCipher<S> new_cipher_raw(const SimContext<S>& ctx, std::span<const S> raw, int scale_bits) {
  if (raw.size() > ctx.slot_count())
    throw CapacityError("cannot place " + std::to_string(raw.size()) + " values in " +
                        std::to_string(ctx.slot_count()) + " slots");
  SlotVector<S> slots = SlotVector<S>::Zero(static_cast<Eigen::Index>(ctx.slot_count()));
  for (std::size_t i = 0; i < raw.size(); ++i) slots(static_cast<Eigen::Index>(i)) = raw[i];
  return SimCipher<S>(ctx, std::move(slots), scale_bits);
}

/// Encodes real values at the context scale into slots [0, len); the rest
/// are zero.
template <typename S>
SimCipher<S> new_cipher(const SimContext<S>& ctx, std::span<const double> values) {
  if (values.size() > ctx.slot_count())
    throw CapacityError("cannot place " + std::to_string(values.size()) + " values in " +
                        std::to_string(ctx.slot_count()) + " slots");
  SlotVector<S> slots = SlotVector<S>::Zero(static_cast<Eigen::Index>(ctx.slot_count()));
  for (std::size_t i = 0; i < values.size(); ++i)
    slots(static_cast<Eigen::Index>(i)) = encode_value<S>(values[i], ctx.scale_bits());
  return SimCipher<S>(ctx, std::move(slots), ctx.scale_bits());
}

template <typename S>
SimCipher<S> zero_cipher(const SimContext<S>& ctx, int scale_bits) {
  return SimCipher<S>(ctx, SlotVector<S>::Zero(static_cast<Eigen::Index>(ctx.slot_count())),
                      scale_bits);
}

/// Left rotation: result slot j holds input slot (j + offset) mod n.
/// Offset 0 is free and leaves the ledger untouched.
template <typename S>
SimCipher<S> rotate(SimContext<S>& ctx, const SimCipher<S>& c, std::ptrdiff_t offset,
                    RotRole role) {
  detail::require_slots(ctx, c);
  const auto n = static_cast<std::ptrdiff_t>(ctx.slot_count());
  if (offset <= -n || offset >= n) throw ContextError("rotation offset out of range");
  if (offset == 0) return c;
  const Eigen::Index k = static_cast<Eigen::Index>(offset < 0 ? offset + n : offset);
  const Eigen::Index len = static_cast<Eigen::Index>(n);
  SlotVector<S> out(len);
  out.head(len - k) = c.slots().tail(len - k);
  out.tail(k) = c.slots().head(k);
  ctx.count_rotation(role);
  return SimCipher<S>(ctx, std::move(out), c.scale_bits());
}

/// Slot-wise sum. Operands at different scales are aligned by lifting the
/// coarser one exactly (no rounding, no extra Mult).
template <typename S>
SimCipher<S> add(SimContext<S>& ctx, const SimCipher<S>& a, const SimCipher<S>& b) {
  detail::require_slots(ctx, a);
  detail::require_slots(ctx, b);
  const int scale = std::max(a.scale_bits(), b.scale_bits());
  bool overflow = false;
  SlotVector<S> out;
  if (a.scale_bits() == b.scale_bits()) {
    out = a.slots().binaryExpr(b.slots(), detail::CheckedSum<S>{&overflow});
  } else {
    const SlotVector<S> la = detail::lifted(a.slots(), scale - a.scale_bits());
    const SlotVector<S> lb = detail::lifted(b.slots(), scale - b.scale_bits());
    out = la.binaryExpr(lb, detail::CheckedSum<S>{&overflow});
  }
  if (overflow) throw PrecisionError("overflow in Add");
  ctx.count_add();
  return SimCipher<S>(ctx, std::move(out), scale);
}

/// Slot-wise product with a plaintext; result scale is the sum of scales.
template <typename S>
SimCipher<S> mult_plain(SimContext<S>& ctx, const SimCipher<S>& c, const Plaintext<S>& p) {
  detail::require_slots(ctx, c);
  if (static_cast<std::size_t>(p.slots.size()) != ctx.slot_count())
    throw ContextError("plaintext length differs from the slot count");
  const int scale = c.scale_bits() + p.scale_bits;
  if (scale > ctx.max_scale_bits()) throw PrecisionError("Mult exceeds the scale bit budget");
  bool overflow = false;
  SlotVector<S> out = c.slots().binaryExpr(p.slots, detail::CheckedProduct<S>{&overflow});
  if (overflow) throw PrecisionError("overflow in Mult");
  ctx.count_mult();
  return SimCipher<S>(ctx, std::move(out), scale);
}

template <typename S>
SimCipher<S> mult_plain(SimContext<S>& ctx, const SimCipher<S>& c, std::span<const S> p,
                        int plain_scale_bits = 0) {
  Plaintext<S> pt{SlotVector<S>(static_cast<Eigen::Index>(p.size())), plain_scale_bits};
  for (std::size_t i = 0; i < p.size(); ++i) pt.slots(static_cast<Eigen::Index>(i)) = p[i];
  return mult_plain(ctx, c, pt);
}

/// acc <- acc (+) (c (.) p). Same ledger effect as one mult_plain followed by
/// one add (no add when acc starts empty), without the temporaries.
template <typename S>
void multiply_accumulate(SimContext<S>& ctx, std::optional<SimCipher<S>>& acc,
                         const SimCipher<S>& c, const Plaintext<S>& p) {
  if (!acc) {
    acc = mult_plain(ctx, c, p);
    return;
  }
  const int scale = c.scale_bits() + p.scale_bits;
  if (acc->scale_bits() != scale) {
    acc = add(ctx, *acc, mult_plain(ctx, c, p));
    return;
  }
  if (scale > ctx.max_scale_bits()) throw PrecisionError("Mult exceeds the scale bit budget");
  detail::require_slots(ctx, c);
  if (static_cast<std::size_t>(p.slots.size()) != ctx.slot_count())
    throw ContextError("plaintext length differs from the slot count");
  bool overflow = false;
  SlotVector<S> out = acc->slots().binaryExpr(
      c.slots().binaryExpr(p.slots, detail::CheckedProduct<S>{&overflow}),
      detail::CheckedSum<S>{&overflow});
  if (overflow) throw PrecisionError("overflow in Mult/Add");
  ctx.count_mult();
  ctx.count_add();
  acc = SimCipher<S>(ctx, std::move(out), scale);
}

/// Debug dump: one raw slot value per line.
template <typename S>
void dump_slots(std::ostream& os, const SimCipher<S>& c) {
  for (Eigen::Index i = 0; i < c.slots().size(); ++i) os << to_string(c.slots()(i)) << '\n';
}

}  // namespace stria
