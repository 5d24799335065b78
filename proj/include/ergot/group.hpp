#pragma once

// Permutation groups: cycle notation, orbits, and a Schreier-Sims base and
// strong generating set for membership tests.

#include "ergot/core.hpp"

#include <cctype>
#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <vector>

namespace ergot {

/// Parses "(0 1 2)(3 4)" into a permutation of {0..n-1}. "()" and "" are the
/// identity. Commas are accepted as separators inside a cycle.
inline Permutation parse_cycles(const std::string& text, std::size_t n, std::string label = {}) {
  Permutation g = Permutation::identity(n, std::move(label));
  std::vector<bool> seen(n, false);
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::InvalidInput,
                "cycle notation '" + text + "' at offset " + std::to_string(pos) + ": " + why);
  };
  auto skip_ws = [&] {
    while (pos < text.size() && (std::isspace(static_cast<unsigned char>(text[pos])) || text[pos] == ','))
      ++pos;
  };
  skip_ws();
  while (pos < text.size()) {
    if (text[pos] != '(') fail("expected '('");
    ++pos;
    std::vector<std::size_t> cycle;
    for (;;) {
      skip_ws();
      if (pos >= text.size()) fail("unterminated cycle");
      if (text[pos] == ')') {
        ++pos;
        break;
      }
      if (!std::isdigit(static_cast<unsigned char>(text[pos]))) fail("expected a point index");
      std::size_t v = 0;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])))
        v = v * 10 + static_cast<std::size_t>(text[pos++] - '0');
      if (v >= n) fail("point " + std::to_string(v) + " out of range for " + std::to_string(n) + " points");
      if (seen[v]) fail("point " + std::to_string(v) + " repeated");
      seen[v] = true;
      cycle.push_back(v);
    }
    for (std::size_t k = 0; k < cycle.size(); ++k) g.image[cycle[k]] = cycle[(k + 1) % cycle.size()];
    skip_ws();
  }
  return g;
}

/// Canonical cycle notation: cycles start at their smallest point, ordered by
/// that point, fixed points omitted; identity prints as "()".
inline std::string format_cycles(const Permutation& g) {
  std::string out;
  std::vector<bool> seen(g.size(), false);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (seen[i] || g(i) == i) continue;
    out += "(";
    std::size_t j = i;
    bool first = true;
    while (!seen[j]) {
      seen[j] = true;
      if (!first) out += " ";
      out += std::to_string(j);
      first = false;
      j = g(j);
    }
    out += ")";
  }
  return out.empty() ? "()" : out;
}

/// Orbits of the group generated by `gens` on {0..n-1}. Orbits are sorted and
/// numbered by their smallest point.
inline std::vector<std::vector<std::size_t>> orbits_of(std::size_t n, const std::vector<Permutation>& gens) {
  std::vector<int> id(n, -1);
  std::vector<std::vector<std::size_t>> orbits;
  for (std::size_t s = 0; s < n; ++s) {
    if (id[s] >= 0) continue;
    const int oid = static_cast<int>(orbits.size());
    std::vector<std::size_t> orbit{s};
    id[s] = oid;
    for (std::size_t k = 0; k < orbit.size(); ++k) {
      for (const auto& g : gens) {
        const std::size_t y = g(orbit[k]);
        if (id[y] < 0) {
          id[y] = oid;
          orbit.push_back(y);
        }
      }
    }
    std::sort(orbit.begin(), orbit.end());
    orbits.push_back(std::move(orbit));
  }
  return orbits;
}

/// Base and strong generating set built with the incremental Schreier-Sims
/// algorithm.
class PermGroup {
 public:
  PermGroup(std::size_t degree, const std::vector<Permutation>& gens) : n_(degree) {
    for (const auto& g : gens) {
      if (g.size() != n_ || !g.is_bijection())
        throw Error(ErrorKind::InvalidInput, "generator '" + g.label + "' is not a permutation of " +
                                                 std::to_string(n_) + " points");
    }
    build(gens);
  }

  std::size_t degree() const { return n_; }

  bool contains(const Permutation& g) const {
    if (g.size() != n_) return false;
    auto [h, level] = strip(g, 0);
    return level == base_.size() && h.is_identity();
  }

  /// Group order as a product of basic orbit lengths (saturating).
  std::uint64_t order() const {
    unsigned __int128 acc = 1;
    for (const auto& tr : transversal_) {
      std::uint64_t len = 0;
      for (const auto& u : tr) len += u.has_value() ? 1 : 0;
      acc *= len;
      if (acc > UINT64_MAX) return UINT64_MAX;
    }
    return static_cast<std::uint64_t>(acc);
  }

  const std::vector<std::size_t>& base() const { return base_; }

 private:
  std::pair<Permutation, std::size_t> strip(const Permutation& g, std::size_t from) const {
    Permutation h = g;
    for (std::size_t i = from; i < base_.size(); ++i) {
      const std::size_t b = h(base_[i]);
      const auto& u = transversal_[i][b];
      if (!u) return {h, i};
      h = u->inverse().after(h);
    }
    return {h, base_.size()};
  }

  void rebuild_transversal(std::size_t i) {
    auto& tr = transversal_[i];
    tr.assign(n_, std::nullopt);
    tr[base_[i]] = Permutation::identity(n_);
    std::vector<std::size_t> queue{base_[i]};
    for (std::size_t k = 0; k < queue.size(); ++k) {
      const std::size_t b = queue[k];
      for (const auto& s : strong_[i]) {
        const std::size_t c = s(b);
        if (!tr[c]) {
          tr[c] = s.after(*tr[b]);
          queue.push_back(c);
        }
      }
    }
  }

  void push_level(std::size_t point) {
    base_.push_back(point);
    strong_.emplace_back();
    transversal_.emplace_back();
  }

  static std::size_t first_moved(const Permutation& g) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g(i) != i) return i;
    return g.size();
  }

  bool fixes_prefix(const Permutation& g, std::size_t len) const {
    for (std::size_t k = 0; k < len; ++k)
      if (g(base_[k]) != base_[k]) return false;
    return true;
  }

  void build(const std::vector<Permutation>& gens) {
    std::vector<Permutation> nontrivial;
    for (const auto& g : gens)
      if (!g.is_identity()) nontrivial.push_back(g);
    for (const auto& g : nontrivial)
      if (fixes_prefix(g, base_.size())) push_level(first_moved(g));
    for (std::size_t i = 0; i < base_.size(); ++i) {
      for (const auto& g : nontrivial)
        if (fixes_prefix(g, i)) strong_[i].push_back(g);
      rebuild_transversal(i);
    }

    std::size_t i = base_.size();
    while (i > 0) {
      const std::size_t lvl = i - 1;
      bool extended = false;
      for (std::size_t b = 0; b < n_ && !extended; ++b) {
        if (!transversal_[lvl][b]) continue;
        for (std::size_t si = 0; si < strong_[lvl].size() && !extended; ++si) {
          const Permutation& s = strong_[lvl][si];
          const Permutation schreier =
              transversal_[lvl][s(b)]->inverse().after(s.after(*transversal_[lvl][b]));
          auto [h, j] = strip(schreier, lvl + 1);
          if (h.is_identity()) continue;
          if (j == base_.size()) push_level(first_moved(h));
          for (std::size_t l = lvl + 1; l <= j; ++l) {
            strong_[l].push_back(h);
            rebuild_transversal(l);
          }
          i = j + 1;
          extended = true;
        }
      }
      if (!extended) --i;
    }
  }

  std::size_t n_;
  std::vector<std::size_t> base_;
  std::vector<std::vector<Permutation>> strong_;
  std::vector<std::vector<std::optional<Permutation>>> transversal_;
};

}  // namespace ergot
