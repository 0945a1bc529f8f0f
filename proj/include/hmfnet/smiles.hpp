#pragma once

// SMILES subset parser and tokenizer. Supported grammar: organic subset
// atoms (B C N O P S F Cl Br I), bracket atoms, branches, ring closures
// 1-9 and %nn, bond symbols - = # :, aromatic lowercase b c n o p s.
// Stereo markers (/ \ @) are accepted and ignored; '.' is rejected.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <stack>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hmfnet {

struct SmilesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnbalancedParenthesis : SmilesError {
  using SmilesError::SmilesError;
};
struct UnclosedRingBond : SmilesError {
  using SmilesError::SmilesError;
};
struct UnknownElement : SmilesError {
  using SmilesError::SmilesError;
};
struct ValenceExceeded : SmilesError {
  using SmilesError::SmilesError;
};
struct MultiFragmentUnsupported : SmilesError {
  using SmilesError::SmilesError;
};
struct InvalidSmiles : SmilesError {
  using SmilesError::SmilesError;
};
struct EmptyInput : SmilesError {
  using SmilesError::SmilesError;
};

enum class Element : int { B = 0, C, N, O, P, S, F, Cl, Br, I, Other };

enum class BondOrder : int { Single = 0, Double, Triple, Aromatic };

inline double bond_order_value(BondOrder o) {
  switch (o) {
  case BondOrder::Single:
    return 1.0;
  case BondOrder::Double:
    return 2.0;
  case BondOrder::Triple:
    return 3.0;
  case BondOrder::Aromatic:
    return 1.5;
  }
  return 1.0;
}

struct Atom {
  Element element = Element::Other;
  std::string symbol;              // element symbol as written (no charge/H)
  bool aromatic = false;
  int formal_charge = 0;           // clamped to [-2, +2]
  std::optional<int> explicit_h;   // bracket H count, if given
  int implicit_h = 0;              // derived from the valence table
  int degree = 0;                  // heavy-atom bond count
  bool in_ring = false;
  bool bracket = false;

  int total_h() const { return explicit_h.value_or(0) + implicit_h; }
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
  bool in_ring = false;
  bool conjugated = false;

  int other(int atom) const { return atom == a ? b : a; }
};

struct MolecularGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::vector<std::vector<int>> rings;  // minimal cycle basis, atom cycles
  std::string source;
  // adjacency[i] = list of (neighbor atom, bond index)
  std::vector<std::vector<std::pair<int, int>>> adjacency;

  int num_atoms() const { return static_cast<int>(atoms.size()); }
  int num_bonds() const { return static_cast<int>(bonds.size()); }
};

namespace detail {

inline Element element_from_symbol(const std::string &s) {
  static const std::unordered_map<std::string, Element> table = {
      {"B", Element::B},   {"C", Element::C},  {"N", Element::N},
      {"O", Element::O},   {"P", Element::P},  {"S", Element::S},
      {"F", Element::F},   {"Cl", Element::Cl}, {"Br", Element::Br},
      {"I", Element::I},
  };
  auto it = table.find(s);
  return it == table.end() ? Element::Other : it->second;
}

// Allowed valence states. Charge shifts every state by the charge sign
// (so N+ allows 4, O- allows 1).
inline std::vector<int> allowed_valences(Element e, int charge) {
  std::vector<int> base;
  switch (e) {
  case Element::B:
    base = {3};
    break;
  case Element::C:
    base = {4};
    break;
  case Element::N:
    base = {3};
    break;
  case Element::O:
    base = {2};
    break;
  case Element::P:
    base = {3, 5};
    break;
  case Element::S:
    base = {2, 4, 6};
    break;
  case Element::F:
  case Element::Cl:
  case Element::Br:
  case Element::I:
    base = {1};
    break;
  case Element::Other:
    return {};
  }
  for (int &v : base)
    v = std::max(0, v + charge);
  return base;
}

// Bond-order sum used for valence bookkeeping. Aromatic bonds count 1
// each; non-bracket aromatic C/N/B/P get +1 for the shared pi electron,
// aromatic O/S contribute a lone pair instead and get no increment.
inline int valence_bond_sum(const MolecularGraph &g, int atom_idx) {
  const Atom &atom = g.atoms[atom_idx];
  double sum = 0.0;
  bool any_aromatic = false;
  for (auto [nbr, bidx] : g.adjacency[atom_idx]) {
    (void)nbr;
    BondOrder o = g.bonds[bidx].order;
    if (o == BondOrder::Aromatic) {
      any_aromatic = true;
      sum += 1.0;
    } else {
      sum += bond_order_value(o);
    }
  }
  int total = static_cast<int>(sum + 0.5);
  if (any_aromatic && !atom.bracket &&
      (atom.element == Element::C || atom.element == Element::N ||
       atom.element == Element::B || atom.element == Element::P)) {
    total += 1;
  }
  return total;
}

struct PendingRing {
  int atom = -1;
  std::optional<BondOrder> order;
};

inline bool is_organic_start(char c) {
  return c == 'B' || c == 'C' || c == 'N' || c == 'O' || c == 'P' ||
         c == 'S' || c == 'F' || c == 'I';
}

inline bool is_aromatic_organic(char c) {
  return c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's';
}

} // namespace detail

// --- ring perception -------------------------------------------------------

// Minimal cycle basis via Horton's candidate-cycle construction: generate
// shortest-path cycles through every (vertex, edge) pair, then greedily pick
// an independent set over GF(2) ordered by cycle length. Exact at the
// molecule sizes this toolkit targets.
inline std::vector<std::vector<int>> ring_perception(const MolecularGraph &g) {
  const int n = g.num_atoms();
  const int m = g.num_bonds();
  if (n == 0 || m == 0)
    return {};
  int cyclomatic = m - n + 1;
  if (cyclomatic <= 0)
    return {};

  // BFS from every vertex: dist + parent trees.
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
  std::vector<std::vector<int>> parent(n, std::vector<int>(n, -1));
  for (int s = 0; s < n; ++s) {
    std::vector<int> queue{s};
    dist[s][s] = 0;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      int u = queue[qi];
      for (auto [v, bidx] : g.adjacency[u]) {
        (void)bidx;
        if (dist[s][v] < 0) {
          dist[s][v] = dist[s][u] + 1;
          parent[s][v] = u;
          queue.push_back(v);
        }
      }
    }
  }

  auto tree_path = [&](int s, int t) {
    std::vector<int> path;  // t back to s, inclusive
    for (int cur = t; cur != -1; cur = parent[s][cur])
      path.push_back(cur);
    return path;  // path.back() == s
  };

  std::map<std::pair<int, int>, int> bond_index;
  for (int i = 0; i < m; ++i) {
    auto key = std::minmax(g.bonds[i].a, g.bonds[i].b);
    bond_index[{key.first, key.second}] = i;
  }

  struct Candidate {
    std::vector<int> atoms;        // ordered cycle
    std::vector<std::uint64_t> edges;  // bond-incidence bitset
    int length = 0;
  };
  const int words = (m + 63) / 64;
  auto edge_bitset = [&](const std::vector<int> &cycle_atoms) {
    std::vector<std::uint64_t> bits(words, 0);
    for (std::size_t i = 0; i < cycle_atoms.size(); ++i) {
      int a = cycle_atoms[i];
      int b = cycle_atoms[(i + 1) % cycle_atoms.size()];
      auto key = std::minmax(a, b);
      int bi = bond_index.at({key.first, key.second});
      bits[bi / 64] |= (1ULL << (bi % 64));
    }
    return bits;
  };

  std::vector<Candidate> candidates;
  std::vector<std::vector<std::uint64_t>> seen;
  for (int v = 0; v < n; ++v) {
    for (const Bond &e : g.bonds) {
      int x = e.a, y = e.b;
      if (dist[v][x] < 0 || dist[v][y] < 0)
        continue;
      std::vector<int> px = tree_path(v, x);  // x..v
      std::vector<int> py = tree_path(v, y);  // y..v
      // Paths must be vertex-disjoint apart from v itself.
      std::vector<char> on_px(n, 0);
      for (int a : px)
        on_px[a] = 1;
      bool disjoint = true;
      for (std::size_t i = 0; i + 1 < py.size(); ++i)
        if (on_px[py[i]]) {
          disjoint = false;
          break;
        }
      if (!disjoint)
        continue;
      // Cycle: v .. x, edge, y .. v
      std::vector<int> cycle(px.rbegin(), px.rend());  // v..x
      for (std::size_t i = 0; i + 1 < py.size(); ++i)
        cycle.push_back(py[i]);  // y..(child of v)
      if (cycle.size() < 3)
        continue;
      Candidate c;
      c.atoms = cycle;
      c.edges = edge_bitset(cycle);
      c.length = static_cast<int>(cycle.size());
      bool dup = false;
      for (const auto &s : seen)
        if (s == c.edges) {
          dup = true;
          break;
        }
      if (!dup) {
        seen.push_back(c.edges);
        candidates.push_back(std::move(c));
      }
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate &a, const Candidate &b) {
                     if (a.length != b.length)
                       return a.length < b.length;
                     return a.atoms < b.atoms;
                   });

  // Greedy GF(2) independence with on-the-fly Gaussian elimination.
  std::vector<std::vector<std::uint64_t>> reduced;  // row-echelon pivots
  std::vector<int> pivot_bit;
  std::vector<std::vector<int>> basis;
  for (const Candidate &c : candidates) {
    std::vector<std::uint64_t> row = c.edges;
    for (std::size_t r = 0; r < reduced.size(); ++r) {
      int pb = pivot_bit[r];
      if (row[pb / 64] & (1ULL << (pb % 64)))
        for (int w = 0; w < words; ++w)
          row[w] ^= reduced[r][w];
    }
    int pb = -1;
    for (int w = 0; w < words && pb < 0; ++w)
      if (row[w])
        for (int b = 0; b < 64; ++b)
          if (row[w] & (1ULL << b)) {
            pb = w * 64 + b;
            break;
          }
    if (pb < 0)
      continue;  // dependent
    reduced.push_back(row);
    pivot_bit.push_back(pb);
    basis.push_back(c.atoms);
    if (static_cast<int>(basis.size()) == cyclomatic)
      break;
  }

  std::stable_sort(basis.begin(), basis.end(),
                   [](const std::vector<int> &a, const std::vector<int> &b) {
                     if (a.size() != b.size())
                       return a.size() < b.size();
                     return a < b;
                   });
  return basis;
}

// --- parser ----------------------------------------------------------------

namespace detail {

struct Parser {
  const std::string &text;
  std::size_t pos = 0;

  explicit Parser(const std::string &t) : text(t) {}

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  char take() { return text[pos++]; }

  MolecularGraph run() {
    MolecularGraph g;
    g.source = text;

    std::stack<int> branch_stack;
    std::unordered_map<int, PendingRing> open_rings;
    int prev_atom = -1;
    std::optional<BondOrder> pending_bond;
    bool pending_from_symbol = false;

    auto add_bond = [&](int a, int b, std::optional<BondOrder> order) {
      if (a == b)
        throw InvalidSmiles("self bond in '" + text + "'");
      for (auto [nbr, bidx] : g.adjacency[a]) {
        (void)bidx;
        if (nbr == b)
          throw InvalidSmiles("duplicate bond between atoms in '" + text + "'");
      }
      BondOrder o;
      if (order) {
        o = *order;
      } else if (g.atoms[a].aromatic && g.atoms[b].aromatic) {
        o = BondOrder::Aromatic;
      } else {
        o = BondOrder::Single;
      }
      if (o == BondOrder::Aromatic &&
          !(g.atoms[a].aromatic && g.atoms[b].aromatic))
        throw InvalidSmiles("aromatic bond between non-aromatic atoms in '" +
                            text + "'");
      Bond bond;
      bond.a = a;
      bond.b = b;
      bond.order = o;
      int idx = g.num_bonds();
      g.bonds.push_back(bond);
      g.adjacency[a].push_back({b, idx});
      g.adjacency[b].push_back({a, idx});
    };

    auto attach_atom = [&](int idx) {
      if (prev_atom >= 0) {
        add_bond(prev_atom, idx, pending_bond);
      } else if (pending_bond) {
        throw InvalidSmiles("bond symbol before first atom in '" + text + "'");
      }
      pending_bond.reset();
      pending_from_symbol = false;
      prev_atom = idx;
    };

    auto handle_ring_digit = [&](int digit) {
      if (prev_atom < 0)
        throw InvalidSmiles("ring closure before any atom in '" + text + "'");
      auto it = open_rings.find(digit);
      if (it == open_rings.end()) {
        open_rings[digit] = PendingRing{prev_atom, pending_bond};
        pending_bond.reset();
        pending_from_symbol = false;
        return;
      }
      PendingRing open = it->second;
      open_rings.erase(it);
      std::optional<BondOrder> order = pending_bond;
      if (!order)
        order = open.order;
      else if (open.order && *open.order != *order)
        throw InvalidSmiles("conflicting ring-closure bond orders in '" +
                            text + "'");
      add_bond(open.atom, prev_atom, order);
      pending_bond.reset();
      pending_from_symbol = false;
    };

    while (!done()) {
      char c = peek();
      if (static_cast<unsigned char>(c) > 0x7f)
        throw InvalidSmiles("non-ASCII character in SMILES input");
      if (c == '.')
        throw MultiFragmentUnsupported(
            "multi-fragment SMILES unsupported: '" + text + "'");
      if (c == '(') {
        take();
        if (prev_atom < 0)
          throw UnbalancedParenthesis("branch before first atom in '" + text +
                                      "'");
        branch_stack.push(prev_atom);
        continue;
      }
      if (c == ')') {
        take();
        if (branch_stack.empty())
          throw UnbalancedParenthesis("unexpected ')' in '" + text + "'");
        prev_atom = branch_stack.top();
        branch_stack.pop();
        continue;
      }
      if (c == '-') {
        take();
        pending_bond = BondOrder::Single;
        pending_from_symbol = true;
        continue;
      }
      if (c == '=') {
        take();
        pending_bond = BondOrder::Double;
        pending_from_symbol = true;
        continue;
      }
      if (c == '#') {
        take();
        pending_bond = BondOrder::Triple;
        pending_from_symbol = true;
        continue;
      }
      if (c == ':') {
        take();
        pending_bond = BondOrder::Aromatic;
        pending_from_symbol = true;
        continue;
      }
      if (c == '/' || c == '\\') {
        // Stereo bond markers are accepted and read as plain single bonds.
        take();
        pending_bond = BondOrder::Single;
        pending_from_symbol = true;
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c))) {
        take();
        handle_ring_digit(c - '0');
        continue;
      }
      if (c == '%') {
        take();
        if (pos + 1 >= text.size() + 0 ||
            !std::isdigit(static_cast<unsigned char>(text[pos])) ||
            pos + 1 >= text.size() ||
            !std::isdigit(static_cast<unsigned char>(text[pos + 1])))
          throw InvalidSmiles("'%' ring closure needs two digits in '" + text +
                              "'");
        int d1 = take() - '0';
        int d2 = take() - '0';
        handle_ring_digit(d1 * 10 + d2);
        continue;
      }
      if (c == '[') {
        int idx = parse_bracket_atom(g);
        attach_atom(idx);
        continue;
      }
      if (is_organic_start(c) || is_aromatic_organic(c)) {
        int idx = parse_organic_atom(g);
        attach_atom(idx);
        continue;
      }
      throw UnknownElement(std::string("unexpected character '") + c +
                           "' in '" + text + "'");
    }

    (void)pending_from_symbol;
    if (pending_bond)
      throw InvalidSmiles("dangling bond symbol at end of '" + text + "'");
    if (!branch_stack.empty())
      throw UnbalancedParenthesis("unclosed '(' in '" + text + "'");
    if (!open_rings.empty())
      throw UnclosedRingBond("unclosed ring bond in '" + text + "'");
    if (g.atoms.empty())
      throw InvalidSmiles("no atoms in SMILES input");

    finalize(g);
    return g;
  }

  int parse_organic_atom(MolecularGraph &g) {
    char c = take();
    Atom atom;
    if (is_aromatic_organic(c)) {
      atom.aromatic = true;
      atom.symbol = std::string(1, static_cast<char>(std::toupper(c)));
    } else {
      atom.symbol = std::string(1, c);
      // Two-letter organic-subset elements.
      if ((c == 'C' || c == 'B') && !done()) {
        char nxt = peek();
        if (c == 'C' && nxt == 'l') {
          take();
          atom.symbol = "Cl";
        } else if (c == 'B' && nxt == 'r') {
          take();
          atom.symbol = "Br";
        }
      }
    }
    atom.element = element_from_symbol(atom.symbol);
    if (atom.element == Element::Other)
      throw UnknownElement("unknown element '" + atom.symbol + "' in '" +
                           text + "'");
    int idx = g.num_atoms();
    g.atoms.push_back(atom);
    g.adjacency.emplace_back();
    return idx;
  }

  int parse_bracket_atom(MolecularGraph &g) {
    take();  // '['
    Atom atom;
    atom.bracket = true;

    // Optional isotope digits (accepted, ignored).
    while (!done() && std::isdigit(static_cast<unsigned char>(peek())))
      take();
    if (done())
      throw InvalidSmiles("unterminated bracket atom in '" + text + "'");

    char c = take();
    if (std::islower(static_cast<unsigned char>(c))) {
      if (!is_aromatic_organic(c))
        throw UnknownElement(std::string("unknown aromatic element '") + c +
                             "' in '" + text + "'");
      atom.aromatic = true;
      atom.symbol = std::string(1, static_cast<char>(std::toupper(c)));
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      atom.symbol = std::string(1, c);
      if (!done() && std::islower(static_cast<unsigned char>(peek()))) {
        // Lower-case continuation is part of a two-letter symbol unless it
        // is the hydrogen-count 'h'.. which SMILES writes upper-case, so
        // any lowercase letter except a lone 'b'.. keep it simple: consume
        // one lowercase continuation letter.
        atom.symbol += take();
      }
    } else {
      throw UnknownElement(std::string("bad bracket atom start '") + c +
                           "' in '" + text + "'");
    }
    atom.element = element_from_symbol(atom.symbol);

    int explicit_h = 0;
    bool saw_h = false;
    while (!done() && peek() != ']') {
      char t = take();
      if (t == '@') {
        continue;  // chirality ignored
      }
      if (t == 'H') {
        saw_h = true;
        explicit_h = 1;
        if (!done() && std::isdigit(static_cast<unsigned char>(peek())))
          explicit_h = take() - '0';
        continue;
      }
      if (t == '+' || t == '-') {
        int sign = (t == '+') ? 1 : -1;
        int magnitude = 1;
        if (!done() && std::isdigit(static_cast<unsigned char>(peek()))) {
          magnitude = take() - '0';
        } else {
          while (!done() && peek() == t) {
            take();
            ++magnitude;
          }
        }
        atom.formal_charge = sign * magnitude;
        continue;
      }
      if (t == ':') {  // atom class, ignored
        while (!done() && std::isdigit(static_cast<unsigned char>(peek())))
          take();
        continue;
      }
      throw InvalidSmiles(std::string("unexpected '") + t +
                          "' in bracket atom of '" + text + "'");
    }
    if (done())
      throw InvalidSmiles("unterminated bracket atom in '" + text + "'");
    take();  // ']'

    atom.formal_charge = std::clamp(atom.formal_charge, -2, 2);
    if (saw_h)
      atom.explicit_h = explicit_h;
    else
      atom.explicit_h = 0;

    int idx = g.num_atoms();
    g.atoms.push_back(atom);
    g.adjacency.emplace_back();
    return idx;
  }

  void finalize(MolecularGraph &g) {
    for (int i = 0; i < g.num_atoms(); ++i)
      g.atoms[i].degree = static_cast<int>(g.adjacency[i].size());

    g.rings = ring_perception(g);
    for (const auto &cycle : g.rings) {
      for (std::size_t i = 0; i < cycle.size(); ++i) {
        int a = cycle[i];
        int b = cycle[(i + 1) % cycle.size()];
        g.atoms[a].in_ring = true;
        g.atoms[b].in_ring = true;
        for (auto [nbr, bidx] : g.adjacency[a])
          if (nbr == b)
            g.bonds[bidx].in_ring = true;
      }
    }

    for (const Atom &atom : g.atoms)
      if (atom.aromatic && !atom.in_ring)
        throw InvalidSmiles("aromatic atom outside a ring in '" + text + "'");
    for (const Bond &bond : g.bonds)
      if (bond.order == BondOrder::Aromatic && !bond.in_ring)
        throw InvalidSmiles("aromatic bond outside a ring in '" + text + "'");

    // Implicit hydrogens + valence check.
    for (int i = 0; i < g.num_atoms(); ++i) {
      Atom &atom = g.atoms[i];
      int bond_sum = valence_bond_sum(g, i);
      auto allowed = allowed_valences(atom.element, atom.formal_charge);
      if (atom.bracket) {
        atom.implicit_h = 0;  // bracket H counts are explicit and final
        if (!allowed.empty()) {
          int total = bond_sum + atom.explicit_h.value_or(0);
          int max_allowed = *std::max_element(allowed.begin(), allowed.end());
          if (total > max_allowed)
            throw ValenceExceeded(
                "valence " + std::to_string(total) + " exceeds maximum for " +
                atom.symbol + " in '" + text + "'");
        }
        continue;
      }
      if (allowed.empty()) {
        atom.implicit_h = 0;
        continue;
      }
      int chosen = -1;
      for (int v : allowed)
        if (v >= bond_sum) {
          chosen = v;
          break;
        }
      if (chosen < 0)
        throw ValenceExceeded("bond-order sum " + std::to_string(bond_sum) +
                              " exceeds valence of " + atom.symbol + " in '" +
                              text + "'");
      atom.implicit_h = chosen - bond_sum;
    }

    // Conjugation: aromatic bonds, and single/multiple bonds sitting in an
    // alternating pattern.
    auto has_multiple = [&](int atom_idx, int excluding_bond) {
      for (auto [nbr, bidx] : g.adjacency[atom_idx]) {
        (void)nbr;
        if (bidx == excluding_bond)
          continue;
        BondOrder o = g.bonds[bidx].order;
        if (o != BondOrder::Single)
          return true;
      }
      return false;
    };
    for (int bi = 0; bi < g.num_bonds(); ++bi) {
      Bond &bond = g.bonds[bi];
      if (bond.order == BondOrder::Aromatic) {
        bond.conjugated = true;
        continue;
      }
      if (bond.order == BondOrder::Single) {
        bond.conjugated = has_multiple(bond.a, bi) && has_multiple(bond.b, bi);
        continue;
      }
      // double/triple: conjugated when a neighboring single bond leads to
      // another multiple bond.
      bool conj = false;
      for (int endpoint : {bond.a, bond.b}) {
        for (auto [nbr, bidx] : g.adjacency[endpoint]) {
          if (bidx == bi || g.bonds[bidx].order != BondOrder::Single)
            continue;
          if (has_multiple(nbr, bidx)) {
            conj = true;
            break;
          }
        }
        if (conj)
          break;
      }
      bond.conjugated = conj;
    }
  }
};

} // namespace detail

inline MolecularGraph parse_smiles(const std::string &text) {
  if (text.empty())
    throw InvalidSmiles("empty SMILES input");
  detail::Parser parser(text);
  return parser.run();
}

// --- tokenizer --------------------------------------------------------------

struct TokenVocab {
  static constexpr int kUnkId = 0;

  std::vector<std::string> tokens;  // index 0 is the UNK sentinel
  std::unordered_map<std::string, int> index;

  TokenVocab() {
    tokens.push_back("<unk>");
    index["<unk>"] = 0;
  }

  int size() const { return static_cast<int>(tokens.size()); }

  int id(const std::string &tok) const {
    auto it = index.find(tok);
    return it == index.end() ? kUnkId : it->second;
  }

  void add(const std::string &tok) {
    if (!index.count(tok)) {
      index[tok] = size();
      tokens.push_back(tok);
    }
  }
};

struct TokenSequence {
  std::vector<int> ids;
  std::vector<std::string> raw;
  bool truncated = false;
  int unk_count = 0;

  std::size_t length() const { return ids.size(); }

  std::string joined() const {
    std::string out;
    for (const auto &t : raw)
      out += t;
    return out;
  }
};

// Lexer shared between the parser and the tokenizer: brackets and two-letter
// elements become single tokens, everything else is one character.
inline std::vector<std::string> lex_smiles(const std::string &text) {
  if (text.empty())
    throw EmptyInput("empty SMILES input");
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '[') {
      std::size_t j = text.find(']', i);
      if (j == std::string::npos)
        throw InvalidSmiles("unterminated bracket atom in '" + text + "'");
      out.push_back(text.substr(i, j - i + 1));
      i = j + 1;
      continue;
    }
    if (c == 'C' && i + 1 < text.size() && text[i + 1] == 'l') {
      out.push_back("Cl");
      i += 2;
      continue;
    }
    if (c == 'B' && i + 1 < text.size() && text[i + 1] == 'r') {
      out.push_back("Br");
      i += 2;
      continue;
    }
    if (c == '%' && i + 2 < text.size() &&
        std::isdigit(static_cast<unsigned char>(text[i + 1])) &&
        std::isdigit(static_cast<unsigned char>(text[i + 2]))) {
      out.push_back(text.substr(i, 3));
      i += 3;
      continue;
    }
    out.push_back(std::string(1, c));
    ++i;
  }
  return out;
}

inline TokenSequence tokenize_smiles(const std::string &text,
                                     const TokenVocab &vocab,
                                     std::size_t max_len = 64) {
  auto raw = lex_smiles(text);
  TokenSequence seq;
  if (raw.size() > max_len) {
    seq.truncated = true;
    raw.resize(max_len);
  }
  seq.raw = raw;
  for (const auto &tok : raw) {
    int id = vocab.id(tok);
    if (id == TokenVocab::kUnkId)
      ++seq.unk_count;
    seq.ids.push_back(id);
  }
  return seq;
}

// Builds a vocabulary from a corpus: unique tokens, sorted lexicographically,
// ids starting at 1 (0 is UNK).
inline TokenVocab build_token_vocab(const std::vector<std::string> &corpus) {
  std::vector<std::string> uniq;
  for (const auto &smiles : corpus)
    for (auto &tok : lex_smiles(smiles))
      uniq.push_back(std::move(tok));
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  TokenVocab vocab;
  for (const auto &tok : uniq)
    vocab.add(tok);
  return vocab;
}

} // namespace hmfnet
