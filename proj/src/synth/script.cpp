#include "htr/synth/script.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "htr/core/errors.hpp"
#include "htr/core/hash.hpp"
#include "htr/core/utf8.hpp"

namespace htr::synth {
namespace {

// membership groups of the default inventory
const std::u32string kSharedAll =
    U"ابتثجحخدذرزشسص"
    U"ضطظعغفقلمنهوىي";
const std::u32string kSharedBC = U"گپچژک";
const std::u32string kSharedAB = U"ك";
const std::u32string kSharedAC = U"ء";
const std::u32string kOnlyC = U"ٹڈڑںۂھڤ";
const std::u32string kOnlyA = U"إ";

constexpr std::uint64_t kChainStream = 0x434841494e53ULL;

std::uint64_t name_key(const std::string& s) { return fnv1a(s); }

/// Row-stochastic matrix over `n` states: `favored` random successors share `mass`.
std::vector<double> random_chain(std::size_t n, std::size_t favored, double mass, RngStream& rng) {
  std::vector<double> m(n * n);
  favored = std::min(favored, n);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = m.data() + i * n;
    const double rest = favored == n ? 0.0 : (1.0 - mass) / static_cast<double>(n - favored);
    std::fill(row, row + n, rest);
    const auto perm = rng_permutation(rng, n);
    std::vector<double> w(favored);
    for (auto& x : w) x = -std::log(1.0 - rng.uniform()) + 0.25;
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    const double share = favored == n ? 1.0 : mass;
    for (std::size_t k = 0; k < favored; ++k) row[perm[k]] = share * w[k] / total;
  }
  return m;
}

void normalize_rows(std::vector<double>& m, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double* row = m.data() + i * n;
    const double s = std::accumulate(row, row + n, 0.0);
    for (std::size_t j = 0; j < n; ++j) row[j] /= s;
  }
}

}  // namespace

void SyntheticScript::validate() const {
  const std::size_t n = glyphs.size();
  if (n == 0) throw ConfigError("script " + name + " has no glyphs");
  if (std::set<char32_t>(glyphs.begin(), glyphs.end()).size() != n) {
    throw ConfigError("script " + name + " lists a glyph twice");
  }
  if (initial.size() != n || bigram.size() != n * n) throw ConfigError("script " + name + " chain has wrong size");
  auto check_row = [&](const double* row, const char* what) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(row[j] >= 0.0)) throw ConfigError("script " + name + " has a negative " + what + " entry");
      s += row[j];
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("script " + name + " " + what + " row does not sum to 1");
  };
  check_row(initial.data(), "initial");
  for (std::size_t i = 0; i < n; ++i) check_row(bigram.data() + i * n, "bigram");
  if (min_len == 0 || min_len > max_len) throw ConfigError("script " + name + " has an empty length range");
}

std::u32string sample_text(const SyntheticScript& script, RngStream& rng) {
  const std::size_t n = script.size();
  const double raw = script.mean_len + script.std_len * rng.normal();
  const auto len = static_cast<std::size_t>(
      std::clamp(std::lround(raw), static_cast<long>(script.min_len), static_cast<long>(script.max_len)));
  auto draw = [&](const double* p) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += p[j];
      if (u < acc) return j;
    }
    return n - 1;
  };
  std::u32string out;
  std::size_t state = draw(script.initial.data());
  out.push_back(script.glyphs[state]);
  while (out.size() < len) {
    state = draw(script.bigram.data() + state * n);
    out.push_back(script.glyphs[state]);
  }
  return out;
}

std::u32string glyph_inventory() {
  std::u32string all = kSharedAll + kSharedBC + kSharedAB + kSharedAC + kOnlyC + kOnlyA;
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<SyntheticScript> default_scripts(const ScriptSuiteConfig& cfg) {
  if (cfg.specific_weight < 0.0 || cfg.specific_weight > 1.0) {
    throw ConfigError("specific_weight must lie in [0, 1]");
  }
  const std::u32string inventory = glyph_inventory();
  const std::size_t n = inventory.size();
  RngStream shared_rng = RngStream(cfg.seed, kChainStream).derive(0);
  const auto shared = random_chain(n, cfg.favored, cfg.favored_mass, shared_rng);

  const std::vector<std::pair<std::string, std::u32string>> members{
      {"script_a", kSharedAll + kSharedAB + kSharedAC + kOnlyA},
      {"script_b", kSharedAll + kSharedBC + kSharedAB},
      {"script_c", kSharedAll + kSharedBC + kSharedAC + kOnlyC},
  };
  std::vector<SyntheticScript> out;
  for (const auto& [name, set] : members) {
    SyntheticScript s;
    s.name = name;
    s.glyphs = set;
    std::sort(s.glyphs.begin(), s.glyphs.end());
    const std::size_t m = s.glyphs.size();
    std::vector<std::size_t> pos(m);
    for (std::size_t i = 0; i < m; ++i) {
      pos[i] = static_cast<std::size_t>(std::lower_bound(inventory.begin(), inventory.end(), s.glyphs[i]) -
                                        inventory.begin());
    }
    // shared chain restricted to this script's glyphs, renormalized
    std::vector<double> base(m * m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) base[i * m + j] = shared[pos[i] * n + pos[j]];
    }
    normalize_rows(base, m);
    RngStream own_rng = RngStream(cfg.seed, kChainStream).derive(name_key(name));
    const auto own = random_chain(m, cfg.favored, cfg.favored_mass, own_rng);
    s.bigram.resize(m * m);
    for (std::size_t k = 0; k < m * m; ++k) {
      s.bigram[k] = (1.0 - cfg.specific_weight) * base[k] + cfg.specific_weight * own[k];
    }
    normalize_rows(s.bigram, m);
    s.initial.assign(m, 1.0 / static_cast<double>(m));
    s.mean_len = cfg.mean_len;
    s.std_len = cfg.std_len;
    s.max_len = cfg.max_len;
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

OverlapReport overlap_report(const std::vector<SyntheticScript>& scripts) {
  if (scripts.size() < 2) throw ConfigError("overlap report needs at least two scripts");
  if (scripts.size() > 31) throw ConfigError("overlap report supports at most 31 scripts");
  OverlapReport r;
  std::map<char32_t, std::uint32_t> membership;
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    r.scripts.push_back(scripts[i].name);
    for (char32_t g : scripts[i].glyphs) membership[g] |= 1u << i;
  }
  for (const auto& [glyph, pattern] : membership) ++r.counts[pattern];
  return r;
}

std::string OverlapReport::format() const {
  std::ostringstream os;
  for (const auto& s : scripts) os << s << '\t';
  os << "glyphs\n";
  // most widely shared patterns first
  std::vector<std::pair<std::uint32_t, std::size_t>> rows(counts.begin(), counts.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::popcount(a.first) > std::popcount(b.first);
  });
  for (const auto& [pattern, n] : rows) {
    for (std::size_t i = 0; i < scripts.size(); ++i) os << ((pattern >> i) & 1u ? "x" : "-") << '\t';
    os << n << '\n';
  }
  return os.str();
}

}  // namespace htr::synth
