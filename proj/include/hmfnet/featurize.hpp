#pragma once

// Hierarchical featurization: per-atom and per-bond feature rows, plus the
// three hashed fingerprints (circular, structural keys, path-based) that are
// concatenated into the 2112-wide global descriptor.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hmfnet/smiles.hpp"
#include "hmfnet/tensor.hpp"

namespace hmfnet {

struct WidthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- feature schemas ---------------------------------------------------------

// Atom rows: element one-hot (10, with B folded into the trailing
// "other" bin) + degree 0-5 + formal charge -2..+2 + aromatic flag +
// hydrogen-count 0-4 + in-ring flag. A = 28.
inline constexpr int kAtomFeatureDim = 28;
// Bond rows: order one-hot (single/double/triple/aromatic) + in-ring +
// conjugated. I = 6.
inline constexpr int kBondFeatureDim = 6;

inline constexpr int kMorganBits = 1024;
inline constexpr int kStructuralKeyBits = 64;
inline constexpr int kTopologicalBits = 1024;
inline constexpr int kFingerprintDim =
    kMorganBits + kStructuralKeyBits + kTopologicalBits;  // 2112

inline int element_feature_bin(Element e) {
  switch (e) {
  case Element::C:
    return 0;
  case Element::N:
    return 1;
  case Element::O:
    return 2;
  case Element::P:
    return 3;
  case Element::S:
    return 4;
  case Element::F:
    return 5;
  case Element::Cl:
    return 6;
  case Element::Br:
    return 7;
  case Element::I:
    return 8;
  case Element::B:
  case Element::Other:
    return 9;
  }
  return 9;
}

inline Tensor atom_features(const MolecularGraph &g) {
  Tensor out({static_cast<std::size_t>(g.num_atoms()),
              static_cast<std::size_t>(kAtomFeatureDim)},
             0.0);
  for (int i = 0; i < g.num_atoms(); ++i) {
    const Atom &a = g.atoms[i];
    double *row = &out.data[static_cast<std::size_t>(i) * kAtomFeatureDim];
    row[element_feature_bin(a.element)] = 1.0;
    int degree = std::min(a.degree, 5);
    row[10 + degree] = 1.0;
    int charge = std::clamp(a.formal_charge, -2, 2);
    row[16 + (charge + 2)] = 1.0;
    row[21] = a.aromatic ? 1.0 : 0.0;
    int hcount = std::min(a.total_h(), 4);
    row[22 + hcount] = 1.0;
    row[27] = a.in_ring ? 1.0 : 0.0;
  }
  return out;
}

inline Tensor bond_features(const MolecularGraph &g) {
  Tensor out({static_cast<std::size_t>(g.num_bonds()),
              static_cast<std::size_t>(kBondFeatureDim)},
             0.0);
  for (int i = 0; i < g.num_bonds(); ++i) {
    const Bond &b = g.bonds[i];
    double *row = &out.data[static_cast<std::size_t>(i) * kBondFeatureDim];
    row[static_cast<int>(b.order)] = 1.0;
    row[4] = b.in_ring ? 1.0 : 0.0;
    row[5] = b.conjugated ? 1.0 : 0.0;
  }
  return out;
}

// --- bit fingerprints ----------------------------------------------------------

class BitFingerprint {
public:
  explicit BitFingerprint(std::size_t width)
      : width_(width), words_((width + 63) / 64, 0) {}

  std::size_t width() const { return width_; }

  void set(std::size_t bit) {
    std::uint64_t mask = 1ULL << (bit % 64);
    std::uint64_t &word = words_[bit / 64];
    if (!(word & mask)) {
      word |= mask;
      ++popcount_;
    }
  }

  bool test(std::size_t bit) const {
    return (words_[bit / 64] >> (bit % 64)) & 1ULL;
  }

  std::size_t popcount() const { return popcount_; }

  bool operator==(const BitFingerprint &o) const {
    return width_ == o.width_ && words_ == o.words_;
  }

  // Byte i holds bits 8i..8i+7 (bit 8i at the low end); two hex digits per
  // byte, low byte first.
  std::string to_hex() const {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    std::size_t nbytes = (width_ + 7) / 8;
    for (std::size_t b = 0; b < nbytes; ++b) {
      unsigned byte =
          static_cast<unsigned>((words_[b / 8] >> ((b % 8) * 8)) & 0xff);
      out += digits[byte >> 4];
      out += digits[byte & 0xf];
    }
    return out;
  }

private:
  std::size_t width_;
  std::vector<std::uint64_t> words_;
  std::size_t popcount_ = 0;
};

// --- hashing -------------------------------------------------------------------

// 64-bit FNV-1a over canonical byte encodings; the basis and prime are the
// published constants, kept fixed so fingerprints are bit-exact across
// builds and platforms.
inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

class Fnv1a {
public:
  Fnv1a &byte(std::uint8_t b) {
    hash_ = (hash_ ^ b) * kFnvPrime;
    return *this;
  }
  Fnv1a &u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
      byte(static_cast<std::uint8_t>((v >> (i * 8)) & 0xff));
    return *this;
  }
  Fnv1a &i32(std::int32_t v) {
    return u64(static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)));
  }
  std::uint64_t value() const { return hash_; }

private:
  std::uint64_t hash_ = kFnvOffsetBasis;
};

inline int bond_order_code(BondOrder o) { return static_cast<int>(o) + 1; }

// --- circular (Morgan-style) fingerprint ----------------------------------------

// Iterative neighborhood hashing. Round 0 hashes the local atom invariant;
// each later round hashes the previous id together with the sorted list of
// (bond-order code, neighbor id) pairs. Every (round, id) environment sets
// bit id mod nbits; environments repeating the same id over the same atom
// set are dropped.
inline BitFingerprint morgan_fingerprint(const MolecularGraph &g,
                                         int radius = 2,
                                         std::size_t nbits = kMorganBits) {
  if (radius < 0)
    throw std::invalid_argument("morgan_fingerprint: radius must be >= 0");
  if (nbits == 0 || (nbits & (nbits - 1)) != 0)
    throw std::invalid_argument(
        "morgan_fingerprint: nbits must be a power of two");

  const int n = g.num_atoms();
  std::vector<std::uint64_t> ids(n);
  for (int i = 0; i < n; ++i) {
    const Atom &a = g.atoms[i];
    Fnv1a h;
    h.byte(0xA0)
        .i32(static_cast<int>(a.element))
        .i32(a.degree)
        .i32(a.formal_charge)
        .i32(a.total_h())
        .i32(a.aromatic ? 1 : 0);
    ids[i] = h.value();
  }

  // BFS balls give each environment's atom set.
  auto ball = [&](int center, int r) {
    std::set<int> seen{center};
    std::vector<int> frontier{center};
    for (int step = 0; step < r; ++step) {
      std::vector<int> next;
      for (int u : frontier)
        for (auto [v, bidx] : g.adjacency[u]) {
          (void)bidx;
          if (seen.insert(v).second)
            next.push_back(v);
        }
      frontier = std::move(next);
    }
    return std::vector<int>(seen.begin(), seen.end());
  };

  BitFingerprint fp(nbits);
  std::set<std::pair<std::uint64_t, std::vector<int>>> seen_envs;
  auto emit = [&](int atom, int round, std::uint64_t id) {
    auto env = std::make_pair(id, ball(atom, round));
    if (seen_envs.insert(env).second)
      fp.set(static_cast<std::size_t>(id % nbits));
  };

  for (int i = 0; i < n; ++i)
    emit(i, 0, ids[i]);

  for (int round = 1; round <= radius; ++round) {
    std::vector<std::uint64_t> next(n);
    for (int i = 0; i < n; ++i) {
      if (g.adjacency[i].empty()) {
        next[i] = ids[i];  // isolated atom: environment stops growing
        continue;
      }
      std::vector<std::pair<int, std::uint64_t>> nbrs;
      for (auto [v, bidx] : g.adjacency[i])
        nbrs.push_back({bond_order_code(g.bonds[bidx].order), ids[v]});
      std::sort(nbrs.begin(), nbrs.end());
      Fnv1a h;
      h.byte(0xA1).u64(ids[i]);
      for (auto &[code, nid] : nbrs)
        h.i32(code).u64(nid);
      next[i] = h.value();
    }
    ids = std::move(next);
    for (int i = 0; i < n; ++i)
      emit(i, round, ids[i]);
  }
  return fp;
}

// --- structural keys -------------------------------------------------------------

struct StructuralKey {
  int bit;
  std::string name;
  std::string description;
  std::function<bool(const MolecularGraph &)> predicate;
};

namespace keys_detail {

inline int count_element(const MolecularGraph &g, Element e) {
  int n = 0;
  for (const Atom &a : g.atoms)
    if (a.element == e)
      ++n;
  return n;
}

inline bool has_element(const MolecularGraph &g, Element e) {
  return count_element(g, e) > 0;
}

inline bool has_ring_of_size(const MolecularGraph &g, std::size_t size) {
  for (const auto &ring : g.rings)
    if (ring.size() == size)
      return true;
  return false;
}

inline bool has_ring_of_min_size(const MolecularGraph &g, std::size_t size) {
  for (const auto &ring : g.rings)
    if (ring.size() >= size)
      return true;
  return false;
}

inline bool aromatic_ring_count_at_least(const MolecularGraph &g, int k) {
  int n = 0;
  for (const auto &ring : g.rings) {
    bool all_aromatic = true;
    for (std::size_t i = 0; i < ring.size() && all_aromatic; ++i) {
      int a = ring[i], b = ring[(i + 1) % ring.size()];
      bool found = false;
      for (auto [nbr, bidx] : g.adjacency[a])
        if (nbr == b) {
          found = g.bonds[bidx].order == BondOrder::Aromatic;
          break;
        }
      all_aromatic = found;
    }
    if (all_aromatic)
      ++n;
  }
  return n >= k;
}

inline bool has_bond(const MolecularGraph &g, Element ea, Element eb,
                     BondOrder order) {
  for (const Bond &b : g.bonds) {
    if (b.order != order)
      continue;
    Element x = g.atoms[b.a].element, y = g.atoms[b.b].element;
    if ((x == ea && y == eb) || (x == eb && y == ea))
      return true;
  }
  return false;
}

inline bool has_element_in_ring(const MolecularGraph &g, Element e) {
  for (const Atom &a : g.atoms)
    if (a.element == e && a.in_ring)
      return true;
  return false;
}

inline bool has_aromatic_element(const MolecularGraph &g, Element e) {
  for (const Atom &a : g.atoms)
    if (a.element == e && a.aromatic)
      return true;
  return false;
}

inline int count_h_pattern(const MolecularGraph &g, Element e, int min_h) {
  int n = 0;
  for (const Atom &a : g.atoms)
    if (a.element == e && a.total_h() >= min_h)
      ++n;
  return n;
}

inline int count_degree_at_least(const MolecularGraph &g, int deg) {
  int n = 0;
  for (const Atom &a : g.atoms)
    if (a.degree >= deg)
      ++n;
  return n;
}

inline bool fused_rings(const MolecularGraph &g) {
  std::map<int, int> ring_membership;
  for (const auto &ring : g.rings)
    for (int a : ring)
      if (++ring_membership[a] >= 2)
        return true;
  return false;
}

// Carbon with a double-bonded O and a single bond to `other`.
inline bool carbonyl_with(const MolecularGraph &g, Element other) {
  for (int i = 0; i < g.num_atoms(); ++i) {
    if (g.atoms[i].element != Element::C)
      continue;
    bool has_carbonyl = false, has_other = false;
    for (auto [nbr, bidx] : g.adjacency[i]) {
      const Bond &b = g.bonds[bidx];
      if (g.atoms[nbr].element == Element::O && b.order == BondOrder::Double)
        has_carbonyl = true;
      if (g.atoms[nbr].element == other && b.order == BondOrder::Single)
        has_other = true;
    }
    if (has_carbonyl && has_other)
      return true;
  }
  return false;
}

inline bool nitro_like(const MolecularGraph &g) {
  for (int i = 0; i < g.num_atoms(); ++i) {
    if (g.atoms[i].element != Element::N)
      continue;
    int o_nbrs = 0;
    for (auto [nbr, bidx] : g.adjacency[i]) {
      (void)bidx;
      if (g.atoms[nbr].element == Element::O)
        ++o_nbrs;
    }
    if (o_nbrs >= 2)
      return true;
  }
  return false;
}

} // namespace keys_detail

// The 64-key table. Index order is frozen; share/structural_keys.json ships
// the same table for downstream consumers and is checked against this list
// in the test suite.
inline const std::vector<StructuralKey> &structural_key_table() {
  using namespace keys_detail;
  using G = const MolecularGraph &;
  static const std::vector<StructuralKey> table = [] {
    std::vector<StructuralKey> t;
    auto K = [&t](std::string name, std::string desc,
                  std::function<bool(G)> pred) {
      t.push_back({static_cast<int>(t.size()), std::move(name),
                   std::move(desc), std::move(pred)});
    };
    K("has_C", "contains carbon", [](G g) { return has_element(g, Element::C); });
    K("has_N", "contains nitrogen", [](G g) { return has_element(g, Element::N); });
    K("has_O", "contains oxygen", [](G g) { return has_element(g, Element::O); });
    K("has_S", "contains sulfur", [](G g) { return has_element(g, Element::S); });
    K("has_P", "contains phosphorus", [](G g) { return has_element(g, Element::P); });
    K("has_F", "contains fluorine", [](G g) { return has_element(g, Element::F); });
    K("has_Cl", "contains chlorine", [](G g) { return has_element(g, Element::Cl); });
    K("has_Br", "contains bromine", [](G g) { return has_element(g, Element::Br); });
    K("has_I", "contains iodine", [](G g) { return has_element(g, Element::I); });
    K("has_B", "contains boron", [](G g) { return has_element(g, Element::B); });
    K("halogen", "contains any halogen (F, Cl, Br, I)", [](G g) {
      return has_element(g, Element::F) || has_element(g, Element::Cl) ||
             has_element(g, Element::Br) || has_element(g, Element::I);
    });
    K("heteroatom", "contains a non-carbon heavy atom", [](G g) {
      for (const Atom &a : g.atoms)
        if (a.element != Element::C)
          return true;
      return false;
    });
    K("N_ge_2", "at least two nitrogens", [](G g) { return count_element(g, Element::N) >= 2; });
    K("O_ge_2", "at least two oxygens", [](G g) { return count_element(g, Element::O) >= 2; });
    K("O_ge_3", "at least three oxygens", [](G g) { return count_element(g, Element::O) >= 3; });
    K("S_ge_2", "at least two sulfurs", [](G g) { return count_element(g, Element::S) >= 2; });
    K("exotic_element", "contains an atom outside the organic subset", [](G g) {
      return has_element(g, Element::Other);
    });
    K("positive_charge", "an atom carries a positive formal charge", [](G g) {
      for (const Atom &a : g.atoms)
        if (a.formal_charge > 0)
          return true;
      return false;
    });
    K("negative_charge", "an atom carries a negative formal charge", [](G g) {
      for (const Atom &a : g.atoms)
        if (a.formal_charge < 0)
          return true;
      return false;
    });
    K("any_ring", "contains at least one ring", [](G g) { return !g.rings.empty(); });
    K("ring3", "contains a 3-membered ring", [](G g) { return has_ring_of_size(g, 3); });
    K("ring4", "contains a 4-membered ring", [](G g) { return has_ring_of_size(g, 4); });
    K("ring5", "contains a 5-membered ring", [](G g) { return has_ring_of_size(g, 5); });
    K("ring6", "contains a 6-membered ring", [](G g) { return has_ring_of_size(g, 6); });
    K("ring7p", "contains a ring of size 7 or larger", [](G g) { return has_ring_of_min_size(g, 7); });
    K("rings_ge_2", "at least two rings", [](G g) { return g.rings.size() >= 2; });
    K("rings_ge_3", "at least three rings", [](G g) { return g.rings.size() >= 3; });
    K("fused_rings", "two rings share an atom", [](G g) { return fused_rings(g); });
    K("aromatic_ring", "contains an aromatic ring", [](G g) { return aromatic_ring_count_at_least(g, 1); });
    K("aromatic_rings_ge_2", "at least two aromatic rings", [](G g) { return aromatic_ring_count_at_least(g, 2); });
    K("aromatic_N", "aromatic nitrogen present", [](G g) { return has_aromatic_element(g, Element::N); });
    K("aromatic_O", "aromatic oxygen present", [](G g) { return has_aromatic_element(g, Element::O); });
    K("aromatic_S", "aromatic sulfur present", [](G g) { return has_aromatic_element(g, Element::S); });
    K("N_in_ring", "nitrogen inside a ring", [](G g) { return has_element_in_ring(g, Element::N); });
    K("O_in_ring", "oxygen inside a ring", [](G g) { return has_element_in_ring(g, Element::O); });
    K("S_in_ring", "sulfur inside a ring", [](G g) { return has_element_in_ring(g, Element::S); });
    K("double_bond", "contains a double bond", [](G g) {
      for (const Bond &b : g.bonds)
        if (b.order == BondOrder::Double)
          return true;
      return false;
    });
    K("triple_bond", "contains a triple bond", [](G g) {
      for (const Bond &b : g.bonds)
        if (b.order == BondOrder::Triple)
          return true;
      return false;
    });
    K("C_dbl_O", "carbon double-bonded to oxygen", [](G g) {
      return has_bond(g, Element::C, Element::O, BondOrder::Double);
    });
    K("C_dbl_C", "carbon-carbon double bond", [](G g) {
      return has_bond(g, Element::C, Element::C, BondOrder::Double);
    });
    K("C_trp_N", "carbon-nitrogen triple bond", [](G g) {
      return has_bond(g, Element::C, Element::N, BondOrder::Triple);
    });
    K("C_trp_C", "carbon-carbon triple bond", [](G g) {
      return has_bond(g, Element::C, Element::C, BondOrder::Triple);
    });
    K("N_dbl_O", "nitrogen double-bonded to oxygen", [](G g) {
      return has_bond(g, Element::N, Element::O, BondOrder::Double);
    });
    K("S_dbl_O", "sulfur double-bonded to oxygen", [](G g) {
      return has_bond(g, Element::S, Element::O, BondOrder::Double);
    });
    K("C_sgl_N", "carbon-nitrogen single bond", [](G g) {
      return has_bond(g, Element::C, Element::N, BondOrder::Single);
    });
    K("C_sgl_O", "carbon-oxygen single bond", [](G g) {
      return has_bond(g, Element::C, Element::O, BondOrder::Single);
    });
    K("C_sgl_S", "carbon-sulfur single bond", [](G g) {
      return has_bond(g, Element::C, Element::S, BondOrder::Single);
    });
    K("N_N_bond", "nitrogen-nitrogen bond of any order", [](G g) {
      for (const Bond &b : g.bonds)
        if (g.atoms[b.a].element == Element::N &&
            g.atoms[b.b].element == Element::N)
          return true;
      return false;
    });
    K("hydroxyl", "oxygen bearing at least one hydrogen", [](G g) {
      return count_h_pattern(g, Element::O, 1) > 0;
    });
    K("NH", "nitrogen bearing at least one hydrogen", [](G g) {
      return count_h_pattern(g, Element::N, 1) > 0;
    });
    K("NH2", "nitrogen bearing at least two hydrogens", [](G g) {
      return count_h_pattern(g, Element::N, 2) > 0;
    });
    K("thiol", "sulfur bearing at least one hydrogen", [](G g) {
      return count_h_pattern(g, Element::S, 1) > 0;
    });
    K("carboxyl_like", "carbon with both a double-bonded and a single-bonded oxygen",
      [](G g) { return carbonyl_with(g, Element::O); });
    K("amide_like", "carbon with a double-bonded oxygen and a single-bonded nitrogen",
      [](G g) { return carbonyl_with(g, Element::N); });
    K("nitro_like", "nitrogen bonded to at least two oxygens", [](G g) { return nitro_like(g); });
    K("conjugated_bond", "contains a conjugated bond", [](G g) {
      for (const Bond &b : g.bonds)
        if (b.conjugated)
          return true;
      return false;
    });
    K("branch_deg3", "an atom with degree 3 or more", [](G g) {
      return count_degree_at_least(g, 3) >= 1;
    });
    K("branch_deg4", "an atom with degree 4 or more", [](G g) {
      return count_degree_at_least(g, 4) >= 1;
    });
    K("branches_ge_2", "at least two atoms with degree 3 or more", [](G g) {
      return count_degree_at_least(g, 3) >= 2;
    });
    K("methyl", "a CH3 group", [](G g) { return count_h_pattern(g, Element::C, 3) > 0; });
    K("methyl_ge_2", "at least two CH3 groups", [](G g) {
      return count_h_pattern(g, Element::C, 3) >= 2;
    });
    K("atoms_ge_5", "five or more heavy atoms", [](G g) { return g.num_atoms() >= 5; });
    K("atoms_ge_10", "ten or more heavy atoms", [](G g) { return g.num_atoms() >= 10; });
    K("atoms_ge_15", "fifteen or more heavy atoms", [](G g) { return g.num_atoms() >= 15; });
    return t;
  }();
  return table;
}

inline BitFingerprint structural_keys(const MolecularGraph &g) {
  const auto &table = structural_key_table();
  BitFingerprint fp(kStructuralKeyBits);
  for (const auto &key : table)
    if (key.predicate(g))
      fp.set(static_cast<std::size_t>(key.bit));
  return fp;
}

// --- topological (path) fingerprint ----------------------------------------------

// Hashes every simple path of 1..max_len bonds. A path is encoded as the
// alternating (element, bond-order) code sequence and read in whichever
// direction compares lexicographically smaller, so both traversals of a
// path land on the same bit.
inline BitFingerprint topological_fingerprint(const MolecularGraph &g,
                                              int max_len = 7,
                                              std::size_t nbits =
                                                  kTopologicalBits) {
  if (max_len < 1)
    throw std::invalid_argument("topological_fingerprint: max_len must be >= 1");
  if (nbits == 0 || (nbits & (nbits - 1)) != 0)
    throw std::invalid_argument(
        "topological_fingerprint: nbits must be a power of two");

  BitFingerprint fp(nbits);

  auto path_codes = [&](const std::vector<int> &atoms,
                        const std::vector<int> &bonds) {
    std::vector<int> fwd, rev;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      fwd.push_back(static_cast<int>(g.atoms[atoms[i]].element));
      if (i < bonds.size())
        fwd.push_back(bond_order_code(g.bonds[bonds[i]].order));
    }
    for (std::size_t i = atoms.size(); i-- > 0;) {
      rev.push_back(static_cast<int>(g.atoms[atoms[i]].element));
      if (i > 0)
        rev.push_back(bond_order_code(g.bonds[bonds[i - 1]].order));
    }
    return fwd <= rev ? fwd : rev;
  };

  std::vector<int> atoms, bonds;
  std::vector<char> visited(g.num_atoms(), 0);

  std::function<void(int)> dfs = [&](int current) {
    if (!bonds.empty()) {
      auto codes = path_codes(atoms, bonds);
      Fnv1a h;
      h.byte(0xA2);
      for (int c : codes)
        h.i32(c);
      fp.set(static_cast<std::size_t>(h.value() % nbits));
    }
    if (static_cast<int>(bonds.size()) >= max_len)
      return;
    for (auto [nbr, bidx] : g.adjacency[current]) {
      if (visited[nbr])
        continue;
      visited[nbr] = 1;
      atoms.push_back(nbr);
      bonds.push_back(bidx);
      dfs(nbr);
      bonds.pop_back();
      atoms.pop_back();
      visited[nbr] = 0;
    }
  };

  for (int start = 0; start < g.num_atoms(); ++start) {
    visited.assign(g.num_atoms(), 0);
    visited[start] = 1;
    atoms = {start};
    bonds.clear();
    dfs(start);
  }
  return fp;
}

// --- concatenated global fingerprint ---------------------------------------------

inline Tensor concat_fingerprints(const BitFingerprint &morgan,
                                  const BitFingerprint &keys,
                                  const BitFingerprint &topo) {
  if (morgan.width() != kMorganBits || keys.width() != kStructuralKeyBits ||
      topo.width() != kTopologicalBits)
    throw WidthMismatch("concat_fingerprints: expected widths 1024/64/1024");
  Tensor out({static_cast<std::size_t>(kFingerprintDim)}, 0.0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < morgan.width(); ++i)
    out.data[off + i] = morgan.test(i) ? 1.0 : 0.0;
  off += morgan.width();
  for (std::size_t i = 0; i < keys.width(); ++i)
    out.data[off + i] = keys.test(i) ? 1.0 : 0.0;
  off += keys.width();
  for (std::size_t i = 0; i < topo.width(); ++i)
    out.data[off + i] = topo.test(i) ? 1.0 : 0.0;
  return out;
}

inline Tensor molecule_fingerprint(const MolecularGraph &g) {
  return concat_fingerprints(morgan_fingerprint(g), structural_keys(g),
                             topological_fingerprint(g));
}

} // namespace hmfnet
