#include "wiretap/gf2q.hpp"

#include <bit>
#include <cmath>

#include "wiretap/error.hpp"

namespace wiretap::gf2q {

namespace {

unsigned degree(std::uint32_t p) { return p == 0 ? 0 : std::bit_width(p) - 1; }

std::uint32_t poly_mod(std::uint32_t a, std::uint32_t m) {
  const unsigned dm = degree(m);
  while (a != 0 && degree(a) >= dm) a ^= m << (degree(a) - dm);
  return a;
}

std::uint32_t clmul(std::uint32_t a, std::uint32_t b) {
  std::uint32_t r = 0;
  while (b != 0) {
    if (b & 1u) r ^= a;
    a <<= 1;
    b >>= 1;
  }
  return r;
}

void check_element(FieldElement e, const FieldSpec& field) {
  if (e.value >= field.order())
    throw Error(ErrorKind::out_of_range,
                "element " + std::to_string(e.value) + " outside GF(2^" +
                    std::to_string(field.q()) + ")");
}

}  // namespace

bool is_irreducible(std::uint32_t poly) {
  const unsigned d = degree(poly);
  if (d == 0) return false;
  for (std::uint32_t f = 2; degree(f) <= d / 2; ++f)
    if (poly_mod(poly, f) == 0) return false;
  return true;
}

FieldSpec FieldSpec::standard(unsigned q) {
  if (q < 1 || q > kMaxDegree)
    throw Error(ErrorKind::out_of_range, "q must lie in [1,16], got " + std::to_string(q));
  return FieldSpec(q, kReductionPolynomials[q]);
}

FieldSpec FieldSpec::with_polynomial(unsigned q, std::uint32_t poly) {
  if (q < 1 || q > kMaxDegree)
    throw Error(ErrorKind::out_of_range, "q must lie in [1,16], got " + std::to_string(q));
  if (degree(poly) != q || !is_irreducible(poly))
    throw Error(ErrorKind::configuration, "reduction polynomial is not irreducible of degree q");
  return FieldSpec(q, poly);
}

BitString::BitString(std::uint32_t bits, unsigned length) : bits_(bits), length_(length) {
  if (length > kMaxDegree || (length < 32 && (bits >> length) != 0))
    throw Error(ErrorKind::dimension, "bit string value does not fit its length");
}

BitString BitString::parse(std::string_view text) {
  if (text.size() > kMaxDegree) throw Error(ErrorKind::dimension, "bit string longer than 16");
  std::uint32_t bits = 0;
  for (char c : text) {
    if (c != '0' && c != '1') throw Error(ErrorKind::configuration, "bit string must be 0/1");
    bits = (bits << 1) | static_cast<std::uint32_t>(c == '1');
  }
  return BitString(bits, static_cast<unsigned>(text.size()));
}

std::string BitString::str() const {
  std::string s(length_, '0');
  for (unsigned i = 0; i < length_; ++i)
    if ((bits_ >> (length_ - 1 - i)) & 1u) s[i] = '1';
  return s;
}

BitString BitString::concat(const BitString& low) const {
  return BitString((bits_ << low.length_) | low.bits_, length_ + low.length_);
}

Seed::Seed(FieldElement element, const FieldSpec& field) : element_(element) {
  check_element(element, field);
  if (element.value == 0) throw Error(ErrorKind::invalid_seed, "seed must be nonzero");
}

Seed Seed::parse(std::string_view binary, const FieldSpec& field) {
  return Seed(parse_element(binary, field), field);
}

std::string Seed::str(const FieldSpec& field) const { return to_binary(element_, field); }

FieldElement field_mul(FieldElement a, FieldElement b, const FieldSpec& field) {
  return FieldElement{poly_mod(clmul(a.value, b.value), field.reduction_poly())};
}

FieldElement field_inv(FieldElement a, const FieldSpec& field) {
  check_element(a, field);
  if (a.value == 0) throw Error(ErrorKind::zero_element, "zero has no multiplicative inverse");
  // a^(2^q - 2) by square-and-multiply.
  std::uint32_t e = field.order() - 2u;
  FieldElement result = kOne;
  FieldElement base = a;
  while (e != 0) {
    if (e & 1u) result = field_mul(result, base, field);
    base = field_mul(base, base, field);
    e >>= 1;
  }
  return result;
}

BitString hash_f(FieldElement s, FieldElement v, unsigned k, const FieldSpec& field) {
  if (k < 1 || k > field.q())
    throw Error(ErrorKind::dimension, "hash output length k must lie in [1,q]");
  if (s.value == 0) throw Error(ErrorKind::invalid_seed, "seed must be nonzero");
  check_element(s, field);
  check_element(v, field);
  const auto product = field_mul(s, v, field);
  return BitString(product.value >> (field.q() - k), k);
}

BitString hash_f(const Seed& s, FieldElement v, unsigned k, const FieldSpec& field) {
  return hash_f(s.element(), v, k, field);
}

FieldElement encode_phi(FieldElement s, const BitString& m, const BitString& b,
                        const FieldSpec& field) {
  if (s.value == 0) throw Error(ErrorKind::invalid_seed, "seed must be nonzero");
  if (m.length() + b.length() != field.q() || m.length() == 0)
    throw Error(ErrorKind::dimension, "message and randomizer must concatenate to q bits");
  const FieldElement word{m.concat(b).bits()};
  return field_mul(field_inv(s, field), word, field);
}

FieldElement encode_phi(const Seed& s, const BitString& m, const BitString& b,
                        const FieldSpec& field) {
  return encode_phi(s.element(), m, b, field);
}

std::string to_binary(FieldElement e, const FieldSpec& field) {
  return BitString(e.value, field.q()).str();
}

FieldElement parse_element(std::string_view binary, const FieldSpec& field) {
  if (binary.size() != field.q())
    throw Error(ErrorKind::dimension, "expected a " + std::to_string(field.q()) +
                                          "-character binary string, got '" +
                                          std::string(binary) + "'");
  return FieldElement{BitString::parse(binary).bits()};
}

UniversalityReport two_universality_check(const FieldSpec& field, unsigned k,
                                          std::uint64_t budget) {
  if (k < 1 || k > field.q()) throw Error(ErrorKind::dimension, "k must lie in [1,q]");
  const std::uint64_t nonzero = field.order() - 1u;
  if (nonzero * nonzero > budget)
    throw Error(ErrorKind::infeasible_size, "exhaustive enumeration exceeds budget");

  const unsigned shift = field.q() - k;
  std::uint64_t worst = 0;
  for (std::uint32_t d = 1; d < field.order(); ++d) {
    std::uint64_t collisions = 0;
    for (std::uint32_t s = 1; s < field.order(); ++s)
      if ((field_mul({s}, {d}, field).value >> shift) == 0) ++collisions;
    if (collisions > worst) worst = collisions;
  }
  UniversalityReport report;
  report.max_collision_fraction = static_cast<double>(worst) / static_cast<double>(nonzero);
  report.bound = std::ldexp(1.0, -static_cast<int>(k)) * (1.0 + 1.0 / static_cast<double>(nonzero));
  return report;
}

}  // namespace wiretap::gf2q
