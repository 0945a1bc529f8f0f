#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "corpus.hpp"
#include "hmfnet/smiles.hpp"

using namespace hmfnet;

TEST_CASE("ethanol parses with the expected skeleton") {
  auto g = parse_smiles("CCO");
  REQUIRE(g.num_atoms() == 3);
  REQUIRE(g.num_bonds() == 2);
  CHECK(g.atoms[0].element == Element::C);
  CHECK(g.atoms[1].element == Element::C);
  CHECK(g.atoms[2].element == Element::O);
  for (const Bond &b : g.bonds)
    CHECK(b.order == BondOrder::Single);
  CHECK(g.atoms[0].implicit_h == 3);
  CHECK(g.atoms[1].implicit_h == 2);
  CHECK(g.atoms[2].implicit_h == 1);
  CHECK(g.rings.empty());
}

TEST_CASE("benzene parses as one aromatic six-ring") {
  auto g = parse_smiles("c1ccccc1");
  REQUIRE(g.num_atoms() == 6);
  REQUIRE(g.num_bonds() == 6);
  for (const Atom &a : g.atoms) {
    CHECK(a.element == Element::C);
    CHECK(a.aromatic);
    CHECK(a.in_ring);
    CHECK(a.implicit_h == 1);
  }
  for (const Bond &b : g.bonds) {
    CHECK(b.order == BondOrder::Aromatic);
    CHECK(b.in_ring);
  }
  REQUIRE(g.rings.size() == 1);
  CHECK(g.rings[0].size() == 6);
}

TEST_CASE("parse errors carry the right types") {
  CHECK_THROWS_AS(parse_smiles("C("), UnbalancedParenthesis);
  CHECK_THROWS_AS(parse_smiles("CC)C"), UnbalancedParenthesis);
  CHECK_THROWS_AS(parse_smiles("C1CC"), UnclosedRingBond);
  CHECK_THROWS_AS(parse_smiles("CxC"), UnknownElement);
  CHECK_THROWS_AS(parse_smiles("C(C)(C)(C)(C)C"), ValenceExceeded);
  CHECK_THROWS_AS(parse_smiles("CC.CC"), MultiFragmentUnsupported);
  CHECK_THROWS_AS(parse_smiles(""), InvalidSmiles);
  CHECK_THROWS_AS(parse_smiles("C\xc3\xa9"), InvalidSmiles);
}

TEST_CASE("bracket atoms: hydrogens, charges, chirality markers") {
  auto g = parse_smiles("[NH4+]");
  REQUIRE(g.num_atoms() == 1);
  CHECK(g.atoms[0].element == Element::N);
  CHECK(g.atoms[0].formal_charge == 1);
  CHECK(g.atoms[0].explicit_h == 4);
  CHECK(g.atoms[0].implicit_h == 0);

  auto o = parse_smiles("[O-]");
  CHECK(o.atoms[0].formal_charge == -1);

  // Charge clamps at +-2.
  auto fe = parse_smiles("[Fe+3]");
  CHECK(fe.atoms[0].formal_charge == 2);
  CHECK(fe.atoms[0].element == Element::Other);

  // Chirality and stereo bonds are accepted and ignored.
  CHECK_NOTHROW(parse_smiles("C[C@@H](N)O"));
  CHECK_NOTHROW(parse_smiles("C/C=C/C"));

  CHECK_THROWS_AS(parse_smiles("[NH5+]"), ValenceExceeded);
}

TEST_CASE("charge-shifted valence") {
  // N+ allows four bonds without brackets on the neighbors.
  auto g = parse_smiles("C[N+](C)(C)C");
  REQUIRE(g.num_atoms() == 5);
  CHECK(g.atoms[1].degree == 4);
  CHECK(g.atoms[1].explicit_h == 0);
}

TEST_CASE("sulfur picks the lowest fitting valence") {
  auto s1 = parse_smiles("CS");
  CHECK(s1.atoms[1].implicit_h == 1);
  auto s2 = parse_smiles("CSC");
  CHECK(s2.atoms[1].implicit_h == 0);
  auto s6 = parse_smiles("CS(=O)(=O)C");  // sulfone: S valence 6
  CHECK(s6.atoms[1].implicit_h == 0);
  auto s4 = parse_smiles("CS(=O)C");  // sulfoxide: S valence 4
  CHECK(s4.atoms[1].implicit_h == 0);
}

TEST_CASE("ring closures with %nn and digit reuse") {
  auto a = parse_smiles("C%12CCCCC%12");
  CHECK(a.rings.size() == 1);
  auto b = parse_smiles("C1CC1C1CC1");  // digit reused after closing
  CHECK(b.rings.size() == 2);
}

TEST_CASE("ring perception returns a minimal cycle basis") {
  SECTION("acyclic") { CHECK(parse_smiles("CCO").rings.empty()); }
  SECTION("benzene") {
    auto g = parse_smiles("c1ccccc1");
    REQUIRE(g.rings.size() == 1);
    CHECK(g.rings[0].size() == 6);
  }
  SECTION("bicyclic basis matches the brute-force oracle") {
    auto g = parse_smiles("C1CC2CCC12");
    REQUIRE(g.rings.size() == 2);

    // Oracle: enumerate every simple cycle, then exhaustively search for
    // the lightest GF(2)-independent set of the cyclomatic dimension.
    const int n = g.num_atoms();
    std::set<std::set<std::pair<int, int>>> all_cycles;
    std::vector<int> path;
    std::function<void(int, int)> dfs = [&](int start, int u) {
      for (auto [v, bidx] : g.adjacency[u]) {
        (void)bidx;
        if (v == start && path.size() >= 3) {
          std::set<std::pair<int, int>> edges;
          for (std::size_t i = 0; i < path.size(); ++i) {
            int x = path[i], y = path[(i + 1) % path.size()];
            edges.insert({std::min(x, y), std::max(x, y)});
          }
          all_cycles.insert(edges);
        } else if (v > start &&
                   std::find(path.begin(), path.end(), v) == path.end()) {
          path.push_back(v);
          dfs(start, v);
          path.pop_back();
        }
      }
    };
    for (int s = 0; s < n; ++s) {
      path = {s};
      dfs(s, s);
    }
    std::vector<std::set<std::pair<int, int>>> cycles(all_cycles.begin(),
                                                      all_cycles.end());
    int dim = g.num_bonds() - n + 1;
    REQUIRE(dim == 2);

    auto sym_diff = [](std::set<std::pair<int, int>> a,
                       const std::set<std::pair<int, int>> &b) {
      for (auto &e : b) {
        if (a.count(e))
          a.erase(e);
        else
          a.insert(e);
      }
      return a;
    };
    std::size_t best = SIZE_MAX;
    for (std::size_t i = 0; i < cycles.size(); ++i)
      for (std::size_t j = i + 1; j < cycles.size(); ++j) {
        if (sym_diff(cycles[i], cycles[j]).empty())
          continue;  // dependent
        best = std::min(best, cycles[i].size() + cycles[j].size());
      }
    std::size_t got = g.rings[0].size() + g.rings[1].size();
    CHECK(got == best);
  }
}

TEST_CASE("every in-ring bond is covered by the ring list") {
  for (const auto &entry : testutil::corpus()) {
    auto g = parse_smiles(entry.renderings[0]);
    std::set<std::pair<int, int>> ring_edges;
    for (const auto &ring : g.rings)
      for (std::size_t i = 0; i < ring.size(); ++i) {
        int a = ring[i], b = ring[(i + 1) % ring.size()];
        ring_edges.insert({std::min(a, b), std::max(a, b)});
      }
    for (const Bond &b : g.bonds) {
      auto key = std::make_pair(std::min(b.a, b.b), std::max(b.a, b.b));
      CHECK(b.in_ring == (ring_edges.count(key) > 0));
    }
  }
}

TEST_CASE("tokenizer splits per the lexer rules") {
  TokenVocab vocab;
  auto t1 = tokenize_smiles("C(=O)O", vocab);
  CHECK(t1.raw == std::vector<std::string>{"C", "(", "=", "O", ")", "O"});
  auto t2 = tokenize_smiles("CCl", vocab);
  CHECK(t2.raw == std::vector<std::string>{"C", "Cl"});
  auto t3 = tokenize_smiles("[NH4+]", vocab);
  CHECK(t3.raw == std::vector<std::string>{"[NH4+]"});
  CHECK_THROWS_AS(tokenize_smiles("", vocab), EmptyInput);
}

TEST_CASE("tokenizer round-trips every corpus rendering") {
  std::vector<std::string> all;
  for (const auto &entry : testutil::corpus())
    for (const auto &r : entry.renderings)
      all.push_back(r);
  TokenVocab vocab = build_token_vocab(all);
  for (const auto &smiles : all) {
    auto seq = tokenize_smiles(smiles, vocab, 256);
    CHECK(seq.joined() == smiles);
    CHECK(seq.unk_count == 0);
  }
}

TEST_CASE("unknown tokens map to the reserved UNK id") {
  TokenVocab vocab = build_token_vocab({"CCO"});
  auto seq = tokenize_smiles("CCN", vocab);
  CHECK(seq.ids[0] != TokenVocab::kUnkId);
  CHECK(seq.ids[2] == TokenVocab::kUnkId);
  CHECK(seq.unk_count == 1);
}

TEST_CASE("truncation is recorded") {
  TokenVocab vocab = build_token_vocab({"CCCCCCCC"});
  auto seq = tokenize_smiles("CCCCCCCC", vocab, 4);
  CHECK(seq.truncated);
  CHECK(seq.length() == 4);
}

TEST_CASE("renderings of one molecule are isomorphic") {
  for (const auto &entry : testutil::corpus()) {
    auto g0 = parse_smiles(entry.renderings[0]);
    auto base_multiset = testutil::element_degree_multiset(g0);
    auto base_hist = testutil::wl_color_histogram(g0);
    for (int r = 1; r < 3; ++r) {
      INFO(entry.name << " rendering " << r);
      auto g = parse_smiles(entry.renderings[r]);
      CHECK(testutil::element_degree_multiset(g) == base_multiset);
      CHECK(testutil::wl_color_histogram(g) == base_hist);
    }
  }
}

TEST_CASE("valence safety across the corpus") {
  for (const auto &entry : testutil::corpus()) {
    for (const auto &smiles : entry.renderings) {
      auto g = parse_smiles(smiles);
      for (int i = 0; i < g.num_atoms(); ++i) {
        const Atom &a = g.atoms[i];
        auto allowed =
            detail::allowed_valences(a.element, a.formal_charge);
        if (allowed.empty())
          continue;
        int total = detail::valence_bond_sum(g, i) + a.implicit_h +
                    a.explicit_h.value_or(0);
        INFO(entry.name << " '" << smiles << "' atom " << i);
        CHECK(std::find(allowed.begin(), allowed.end(), total) !=
              allowed.end());
      }
    }
  }
}

TEST_CASE("aromatic atoms only appear inside rings") {
  CHECK_THROWS_AS(parse_smiles("cc"), InvalidSmiles);
  CHECK_THROWS_AS(parse_smiles("Cc1ccccc1c"), SmilesError);
}
