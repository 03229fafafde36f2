#pragma once

// Arithmetic in GF(2^q), q <= 16, and the seeded hash family used by the
// secrecy layer:
//
//   f_s(v)      = k most significant bits of s * v
//   phi_s(m, b) = s^{-1} * (m || b)
//
// Elements are polynomials over GF(2) packed into an integer, bit i holding
// the coefficient of x^i. Strings are written most-significant bit first, so
// a q-bit element prints as exactly q characters.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace wiretap::gf2q {

inline constexpr unsigned kMaxDegree = 16;

// Lexicographically smallest irreducible polynomial of each degree 1..16
// (index = degree). Bit q is the leading coefficient.
inline constexpr std::array<std::uint32_t, kMaxDegree + 1> kReductionPolynomials = {
    0x0,                         //
    0x2,                         // x
    0x7,                         // x^2+x+1
    0xb,                         // x^3+x+1
    0x13,                        // x^4+x+1
    0x25,                        // x^5+x^2+1
    0x43,                        // x^6+x+1
    0x83,                        // x^7+x+1
    0x11b,                       // x^8+x^4+x^3+x+1
    0x203,                       // x^9+x+1
    0x409,                       // x^10+x^3+1
    0x805,                       // x^11+x^2+1
    0x1009,                      // x^12+x^3+1
    0x201b,                      // x^13+x^4+x^3+x+1
    0x4021,                      // x^14+x^5+1
    0x8003,                      // x^15+x+1
    0x1002b,                     // x^16+x^5+x^3+x+1
};

bool is_irreducible(std::uint32_t poly);

class FieldSpec {
 public:
  // Field of order 2^q with the built-in reduction polynomial.
  static FieldSpec standard(unsigned q);
  // Field with a caller-supplied polynomial; throws unless it has degree
  // exactly q and is irreducible.
  static FieldSpec with_polynomial(unsigned q, std::uint32_t poly);

  unsigned q() const noexcept { return q_; }
  std::uint32_t reduction_poly() const noexcept { return poly_; }
  std::uint32_t order() const noexcept { return 1u << q_; }
  std::uint32_t mask() const noexcept { return order() - 1u; }

  bool operator==(const FieldSpec&) const = default;

 private:
  FieldSpec(unsigned q, std::uint32_t poly) : q_(q), poly_(poly) {}
  unsigned q_;
  std::uint32_t poly_;
};

struct FieldElement {
  std::uint32_t value = 0;
  bool operator==(const FieldElement&) const = default;
  auto operator<=>(const FieldElement&) const = default;
};

inline constexpr FieldElement kOne{1};

// Fixed-length bit string (length <= 16) stored right-aligned in `bits`.
class BitString {
 public:
  BitString() = default;
  BitString(std::uint32_t bits, unsigned length);

  // Parses "0101" (MSB first).
  static BitString parse(std::string_view text);

  std::uint32_t bits() const noexcept { return bits_; }
  unsigned length() const noexcept { return length_; }
  std::string str() const;

  // (this || low), the concatenation with `low` in the least significant bits.
  BitString concat(const BitString& low) const;

  bool operator==(const BitString&) const = default;

 private:
  std::uint32_t bits_ = 0;
  unsigned length_ = 0;
};

// Nonzero field element. The zero seed is rejected on construction, so every
// Seed in the program indexes a valid member of the hash family.
class Seed {
 public:
  Seed(FieldElement element, const FieldSpec& field);
  static Seed parse(std::string_view binary, const FieldSpec& field);

  FieldElement element() const noexcept { return element_; }
  std::uint32_t value() const noexcept { return element_.value; }
  std::string str(const FieldSpec& field) const;

  bool operator==(const Seed&) const = default;

 private:
  FieldElement element_;
};

FieldElement field_mul(FieldElement a, FieldElement b, const FieldSpec& field);
FieldElement field_inv(FieldElement a, const FieldSpec& field);

BitString hash_f(const Seed& s, FieldElement v, unsigned k, const FieldSpec& field);
FieldElement encode_phi(const Seed& s, const BitString& m, const BitString& b,
                        const FieldSpec& field);

// Unchecked-seed overloads for tests that want the zero-seed error path.
BitString hash_f(FieldElement s, FieldElement v, unsigned k, const FieldSpec& field);
FieldElement encode_phi(FieldElement s, const BitString& m, const BitString& b,
                        const FieldSpec& field);

std::string to_binary(FieldElement e, const FieldSpec& field);
FieldElement parse_element(std::string_view binary, const FieldSpec& field);

// Maximum, over distinct inputs x1 != x2, of the fraction of seeds s with
// f_s(x1) == f_s(x2). Multiplication distributes over XOR, so the collision
// event depends on the pair only through d = x1 ^ x2; the search runs over
// all nonzero d and all seeds, costing (2^q - 1)^2 multiplications.
struct UniversalityReport {
  double max_collision_fraction = 0.0;
  double bound = 0.0;  // 2^-k * (1 + 1/(2^q - 1))
  bool holds() const noexcept { return max_collision_fraction <= bound; }
};

inline constexpr std::uint64_t kDefaultEnumerationBudget = std::uint64_t{1} << 26;

UniversalityReport two_universality_check(const FieldSpec& field, unsigned k,
                                          std::uint64_t budget = kDefaultEnumerationBudget);

}  // namespace wiretap::gf2q
