#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>

#include <Eigen/Core>
#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/eigen.hpp>

#include "stria/errors.hpp"

namespace Eigen {
template <>
struct NumTraits<__int128> : GenericNumTraits<__int128> {
  enum {
    IsInteger = 1,
    IsSigned = 1,
    IsComplex = 0,
    RequireInitialization = 0,
    ReadCost = 1,
    AddCost = 1,
    MulCost = 1
  };
  using Real = __int128;
  using NonInteger = __int128;
  using Literal = __int128;
  using Nested = __int128;
  static inline int digits10() { return 38; }
};
}  // namespace Eigen

namespace stria {

/// Scaled 64-bit fixed point; the default exact mode.
using Exact = std::int64_t;
/// Scaled 128-bit fixed point for deep chains at large scales.
using Wide = __int128;
/// Arbitrary-precision rationals for associativity and overflow audits.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

template <typename S>
using SlotVector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct ScalarTraits;

template <>
struct ScalarTraits<Exact> {
  static constexpr bool kIntegral = true;
  static constexpr int kDefaultScaleBits = 12;
  static constexpr int kMaxScaleBits = 62;
  static constexpr const char* kName = "exact";
};

template <>
struct ScalarTraits<Wide> {
  static constexpr bool kIntegral = true;
  static constexpr int kDefaultScaleBits = 12;
  static constexpr int kMaxScaleBits = 126;
  static constexpr const char* kName = "wide";
};

template <>
struct ScalarTraits<Rational> {
  static constexpr bool kIntegral = false;
  static constexpr int kDefaultScaleBits = 0;
  static constexpr int kMaxScaleBits = std::numeric_limits<int>::max();
  static constexpr const char* kName = "rational";
};

template <>
struct ScalarTraits<float> {
  static constexpr bool kIntegral = false;
  static constexpr int kDefaultScaleBits = 0;
  static constexpr int kMaxScaleBits = 120;
  static constexpr const char* kName = "float";
};

template <>
struct ScalarTraits<double> {
  static constexpr bool kIntegral = false;
  static constexpr int kDefaultScaleBits = 0;
  static constexpr int kMaxScaleBits = 1000;
  static constexpr const char* kName = "double";
};

template <typename S>
inline constexpr bool kIntegralScalar = ScalarTraits<S>::kIntegral;

/// Returns true on overflow. Non-integral scalars never overflow here.
template <typename S>
inline bool checked_add(const S& a, const S& b, S& out) {
  if constexpr (kIntegralScalar<S>) {
    return __builtin_add_overflow(a, b, &out);
  } else {
    out = a + b;
    return false;
  }
}

template <typename S>
inline bool checked_mul(const S& a, const S& b, S& out) {
  if constexpr (kIntegralScalar<S>) {
    return __builtin_mul_overflow(a, b, &out);
  } else {
    out = a * b;
    return false;
  }
}

inline BigInt to_bigint(Wide v) {
  const bool negative = v < 0;
  unsigned __int128 mag = negative ? -static_cast<unsigned __int128>(v)
                                   : static_cast<unsigned __int128>(v);
  BigInt r = static_cast<std::uint64_t>(mag >> 64);
  r <<= 64;
  r += static_cast<std::uint64_t>(mag);
  return negative ? BigInt(-r) : r;
}

/// Exact value of a scaled raw slot: raw / 2^scale_bits.
template <typename S>
Rational to_rational(const S& raw, int scale_bits) {
  Rational value;
  if constexpr (std::is_same_v<S, Wide>) {
    value = Rational(to_bigint(raw));
  } else if constexpr (std::is_same_v<S, Rational>) {
    value = raw;
  } else {
    value = Rational(raw);
  }
  if (scale_bits > 0) value /= Rational(BigInt(1) << scale_bits);
  return value;
}

template <typename S>
double to_double(const S& raw, int scale_bits) {
  if constexpr (std::is_same_v<S, Rational>) {
    return std::ldexp(raw.template convert_to<double>(), -scale_bits);
  } else {
    return std::ldexp(static_cast<double>(raw), -scale_bits);
  }
}

/// Encodes a real value at the given scale. Integral scalars round to the
/// nearest grid point; values already on the grid encode exactly.
template <typename S>
S encode_value(double value, int scale_bits) {
  const double scaled = std::ldexp(value, scale_bits);
  if constexpr (kIntegralScalar<S>) {
    const double rounded = std::nearbyint(scaled);
    if (!(std::fabs(rounded) < std::ldexp(1.0, std::numeric_limits<std::int64_t>::digits)))
      throw PrecisionError("value does not fit the scaled integer range");
    return static_cast<S>(static_cast<std::int64_t>(rounded));
  } else if constexpr (std::is_same_v<S, Rational>) {
    return Rational(scaled);
  } else {
    return static_cast<S>(scaled);
  }
}

/// Multiplies a raw value by 2^bits, moving it to a finer scale.
template <typename S>
S lift(const S& raw, int bits) {
  if (bits == 0) return raw;
  if constexpr (kIntegralScalar<S>) {
    if (bits >= std::numeric_limits<S>::digits) throw PrecisionError("scale lift out of range");
    S out;
    if (checked_mul(raw, static_cast<S>(static_cast<S>(1) << bits), out))
      throw PrecisionError("overflow while aligning scales");
    return out;
  } else if constexpr (std::is_same_v<S, Rational>) {
    return raw * Rational(BigInt(1) << bits);
  } else {
    return static_cast<S>(std::ldexp(raw, bits));
  }
}

template <typename S>
std::string to_string(const S& raw) {
  if constexpr (std::is_same_v<S, Wide>) {
    return to_bigint(raw).str();
  } else if constexpr (std::is_same_v<S, Rational>) {
    return raw.str();
  } else if constexpr (std::is_floating_point_v<S>) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(raw));
    return buf;
  } else {
    return std::to_string(raw);
  }
}

}  // namespace stria
