#include "wiretap/secrecy.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "wiretap/error.hpp"
#include "wiretap/parallel.hpp"

namespace wiretap {

WiretapCode::WiretapCode(std::shared_ptr<const ReliabilityCode> reliability, gf2q::Seed seed,
                         unsigned k)
    : reliability_(std::move(reliability)),
      field_(gf2q::FieldSpec::standard(reliability_ ? reliability_->q() : 1)),
      seed_(seed),
      k_(k) {
  if (!reliability_) throw Error(ErrorKind::configuration, "wiretap code needs a reliability code");
  if (k_ < 1 || k_ > field_.q())
    throw Error(ErrorKind::configuration, "message length k must lie in [1, q]");
  if (seed_.value() == 0 || seed_.value() > field_.mask())
    throw Error(ErrorKind::invalid_seed, "seed is not a nonzero element of GF(2^q)");
}

std::uint32_t inner_word(const WiretapCode& code, const gf2q::BitString& m, RngStream& rng) {
  if (m.length() != code.k())
    throw Error(ErrorKind::dimension, "message must have exactly k bits");
  const unsigned r = code.randomizer_bits();
  const gf2q::BitString b(rng.uniform_bits(r), r);
  return gf2q::encode_phi(code.seed(), m, b, code.field()).value;
}

Codeword encode(const WiretapCode& code, const gf2q::BitString& m, RngStream& rng) {
  return encode0(code.reliability(), inner_word(code, m, rng));
}

gf2q::BitString decode_inner(const WiretapCode& code, std::uint32_t v_hat) {
  return gf2q::hash_f(code.seed(), gf2q::FieldElement{v_hat}, code.k(), code.field());
}

gf2q::BitString decode(const WiretapCode& code, std::span<const double> y) {
  return decode_inner(code, decode0(code.reliability(), y));
}

PeReport estimate_pe_report(const WiretapCode& code, const AvcChannel& channel,
                            std::uint64_t trials, const RngStream& rng) {
  if (trials == 0) throw Error(ErrorKind::out_of_range, "at least one trial is required");
  const auto& rel = code.reliability();
  const std::uint64_t shards = (trials + kShardTrials - 1) / kShardTrials;
  std::vector<std::uint64_t> message_errors(shards, 0), inner_errors(shards, 0);
  parallel_for(shards, [&](std::size_t s) {
    RngStream stream = rng.derive("pe-shard-" + std::to_string(s));
    AvcChannel local = channel;
    local.advance(s * kShardTrials);
    const std::uint64_t count = std::min(kShardTrials, trials - s * kShardTrials);
    constexpr std::uint64_t kChunk = 4096;
    std::vector<std::uint32_t> sent_m, sent_v;
    std::vector<double> variances(rel.n());
    for (std::uint64_t done = 0; done < count; done += kChunk) {
      const auto len = static_cast<Eigen::Index>(std::min(kChunk, count - done));
      nn::Matrix y(rel.n(), len);
      sent_m.resize(static_cast<std::size_t>(len));
      sent_v.resize(static_cast<std::size_t>(len));
      for (Eigen::Index j = 0; j < len; ++j) {
        const auto m = stream.uniform_bits(code.k());
        const auto v = inner_word(code, gf2q::BitString(m, code.k()), stream);
        sent_m[static_cast<std::size_t>(j)] = m;
        sent_v[static_cast<std::size_t>(j)] = v;
        y.col(j) = rel.codebook().col(v);
        local.add_noise(std::span<double>(y.col(j).data(), rel.n()), variances, stream);
      }
      const auto decoded = decode0_batch(rel, y);
      for (std::size_t j = 0; j < decoded.size(); ++j) {
        if (decoded[j] == sent_v[j]) continue;
        ++inner_errors[s];
        if (decode_inner(code, decoded[j]).bits() != sent_m[j]) ++message_errors[s];
      }
    }
  });
  std::uint64_t me = 0, ie = 0;
  for (std::size_t s = 0; s < shards; ++s) {
    me += message_errors[s];
    ie += inner_errors[s];
  }
  return {wilson(me, trials), wilson(ie, trials)};
}

Proportion estimate_pe(const WiretapCode& code, const AvcChannel& channel, std::uint64_t trials,
                       const RngStream& rng) {
  return estimate_pe_report(code, channel, trials, rng).message;
}

Proportion estimate_pe(const WiretapCode& code, double snr_db, std::uint64_t trials,
                       const RngStream& rng) {
  return estimate_pe(code, AvcChannel::awgn(GaussianSpec::from_snr_db(snr_db)), trials, rng);
}

namespace {

struct TableRow {
  unsigned n;
  const char* k1;
  const char* k2;
};

constexpr std::array<TableRow, 15> kSeedTable = {{
    {2, "1", nullptr},
    {3, "11", "11"},
    {4, "010", "010"},
    {5, "1100", "1100"},
    {6, "00010", "00011"},
    {7, "001001", "001001"},
    {8, "0001101", "0001101"},
    {9, "10000000", "10000000"},
    {10, "100000000", "100000000"},
    {11, "1000000000", "1000000000"},
    {12, "10000000000", "10000000000"},
    {13, "100000000000", "100000000000"},
    {14, "1000000000000", "1000000000000"},
    {15, "10000000000000", "10000000000000"},
    {16, "10000000000000", "10000000000000"},
}};

}  // namespace

std::optional<gf2q::Seed> table_seed(unsigned n, unsigned k, const gf2q::FieldSpec& field) {
  for (const auto& row : kSeedTable) {
    if (row.n != n) continue;
    const char* text = k == 1 ? row.k1 : k == 2 ? row.k2 : nullptr;
    if (!text || std::string_view(text).size() != field.q()) return std::nullopt;
    return gf2q::Seed::parse(text, field);
  }
  return std::nullopt;
}

std::vector<gf2q::Seed> default_candidates(unsigned n, unsigned k, const gf2q::FieldSpec& field,
                                           RngStream& rng, std::size_t extra) {
  std::set<std::uint32_t> values;
  if (auto s = table_seed(n, k, field)) values.insert(s->value());
  const std::size_t nonzero = field.mask();
  const std::size_t target = std::min(nonzero, values.size() + extra);
  if (target == nonzero) {
    for (std::uint32_t v = 1; v <= field.mask(); ++v) values.insert(v);
  } else {
    std::size_t added = 0;
    while (added < extra) {
      const std::uint32_t v = 1 + rng.uniform_below(field.mask());
      if (values.insert(v).second) ++added;
    }
  }
  std::vector<gf2q::Seed> out;
  for (auto v : values) out.emplace_back(gf2q::FieldElement{v}, field);
  return out;
}

LeakageEstimate estimate_leakage(const WiretapCode& code, const AvcChannel& eve,
                                 const MineConfig& config, std::uint64_t rng_seed) {
  AvcChannel channel = eve;
  RngStream samples(rng_seed, "leakage-samples");
  JointSource source = [&](std::size_t, std::size_t count, RngStream&) {
    return sample_joint(code, channel, count, samples);
  };
  MineConfig c = config;
  c.seed = rng_seed;
  std::ostringstream label;
  label << "n=" << code.n() << ";q=" << code.q() << ";k=" << code.k()
        << ";seed=" << code.seed().str(code.field());
  return mine_estimate(source, c, label.str());
}

LeakageEstimate estimate_leakage(const WiretapCode& code, double eve_snr_db,
                                 const MineConfig& config, std::uint64_t rng_seed) {
  return estimate_leakage(code, AvcChannel::awgn(GaussianSpec::from_snr_db(eve_snr_db)), config,
                          rng_seed);
}

SeedSearchResult seed_search(std::shared_ptr<const ReliabilityCode> code, unsigned k,
                             double eve_snr_db, std::span<const gf2q::Seed> candidates,
                             const MineConfig& ranking, const MineConfig& full,
                             std::uint64_t rng_seed) {
  if (candidates.empty()) throw Error(ErrorKind::empty_set, "no seed candidates");
  std::vector<double> leak(candidates.size());
  if (candidates.size() > 1) {
    parallel_for(candidates.size(), [&](std::size_t i) {
      const WiretapCode wc(code, candidates[i], k);
      leak[i] = estimate_leakage(wc, eve_snr_db, ranking, rng_seed).reported_bits;
    });
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (leak[i] < leak[best] ||
        (leak[i] == leak[best] && candidates[i].value() < candidates[best].value()))
      best = i;
  }
  SeedSearchResult result{candidates[best], {}, {}};
  const WiretapCode winner(code, candidates[best], k);
  result.final_estimate = estimate_leakage(winner, eve_snr_db, full, rng_seed);
  if (candidates.size() == 1) leak[0] = result.final_estimate.reported_bits;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    result.table.push_back({candidates[i], leak[i]});
  return result;
}

void write_seed_table(const std::vector<SeedRecord>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out.precision(10);
  out << "n,q,k,seed_binary_string,leakage_bits,mine_profile\n";
  for (const auto& r : rows)
    out << r.n << "," << r.q << "," << r.k << "," << r.seed_binary << "," << r.leakage_bits
        << "," << r.mine_profile << "\n";
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

std::vector<SeedRecord> read_seed_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "n,q,k,seed_binary_string,leakage_bits,mine_profile")
    throw Error(ErrorKind::io, "unexpected seed table header in " + path.string());
  std::vector<SeedRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw Error(ErrorKind::io, "malformed seed table row: " + line);
    try {
      rows.push_back({static_cast<unsigned>(std::stoul(cells[0])),
                      static_cast<unsigned>(std::stoul(cells[1])),
                      static_cast<unsigned>(std::stoul(cells[2])), cells[3], std::stod(cells[4]),
                      cells[5]});
    } catch (const std::exception&) {
      throw Error(ErrorKind::io, "malformed seed table row: " + line);
    }
  }
  return rows;
}

}  // namespace wiretap
