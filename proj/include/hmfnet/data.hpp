#pragma once

// Dataset ingestion (CSV with `smiles,labels` header, semicolon-separated
// descriptor strings), deterministic stratified splits, label statistics,
// and a synthetic desk-scale generator with a Zipf label profile.

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hmfnet/loss.hpp"
#include "hmfnet/rng.hpp"
#include "hmfnet/smiles.hpp"
#include "hmfnet/tensor.hpp"

namespace hmfnet {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingHeader : DataError {
  using DataError::DataError;
};
struct EmptyDataset : DataError {
  using DataError::DataError;
};
struct AllRowsInvalid : DataError {
  using DataError::DataError;
};
struct BadFractions : DataError {
  using DataError::DataError;
};
struct BadParams : DataError {
  using DataError::DataError;
};

struct LabeledDataset {
  std::vector<std::string> smiles;
  std::vector<std::vector<int>> label_ids;  // sorted per molecule
  std::vector<std::string> vocab;           // lexicographically sorted
  Tensor labels;                            // N x M multi-hot
  int skipped_rows = 0;

  std::size_t size() const { return smiles.size(); }
  int num_labels() const { return static_cast<int>(vocab.size()); }

  void rebuild_matrix() {
    labels = Tensor({smiles.size(), vocab.size()}, 0.0);
    for (std::size_t i = 0; i < smiles.size(); ++i)
      for (int j : label_ids[i])
        labels.at(i, static_cast<std::size_t>(j)) = 1.0;
  }
};

namespace data_detail {

inline std::string strip(const std::string &s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos)
    return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::string unquote(const std::string &s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
    return s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split_labels(const std::string &field) {
  std::vector<std::string> out;
  std::stringstream ss(field);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = strip(item);
    if (!item.empty())
      out.push_back(item);
  }
  return out;
}

} // namespace data_detail

inline LabeledDataset load_csv_stream(std::istream &in) {
  std::string header;
  if (!std::getline(in, header))
    throw MissingHeader("empty input: expected `smiles,labels` header");
  header = data_detail::strip(header);
  if (header != "smiles,labels")
    throw MissingHeader("expected header `smiles,labels`, got `" + header +
                        "`");

  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  int skipped = 0;
  std::string line;
  int parsed_any = 0, seen_any = 0;
  while (std::getline(in, line)) {
    line = data_detail::strip(line);
    if (line.empty())
      continue;
    ++seen_any;
    auto comma = line.find(',');
    std::string smiles = data_detail::unquote(
        data_detail::strip(comma == std::string::npos ? line
                                                      : line.substr(0, comma)));
    std::string label_field =
        comma == std::string::npos
            ? ""
            : data_detail::unquote(data_detail::strip(line.substr(comma + 1)));
    try {
      parse_smiles(smiles);
    } catch (const SmilesError &) {
      ++skipped;
      continue;
    }
    ++parsed_any;
    rows.push_back({smiles, data_detail::split_labels(label_field)});
  }
  if (seen_any == 0)
    throw EmptyDataset("no data rows after the header");
  if (parsed_any == 0)
    throw AllRowsInvalid("every row failed SMILES parsing");

  // Vocabulary: unique labels, sorted lexicographically.
  std::set<std::string> label_set;
  for (const auto &[smiles, labels] : rows)
    for (const auto &l : labels)
      label_set.insert(l);
  LabeledDataset ds;
  ds.vocab.assign(label_set.begin(), label_set.end());
  ds.skipped_rows = skipped;
  std::map<std::string, int> index;
  for (std::size_t j = 0; j < ds.vocab.size(); ++j)
    index[ds.vocab[j]] = static_cast<int>(j);

  // Dedup exact (smiles, label set) pairs, keeping first occurrence.
  std::set<std::pair<std::string, std::vector<int>>> seen;
  for (const auto &[smiles, labels] : rows) {
    std::vector<int> ids;
    for (const auto &l : labels)
      ids.push_back(index[l]);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (!seen.insert({smiles, ids}).second)
      continue;
    ds.smiles.push_back(smiles);
    ds.label_ids.push_back(std::move(ids));
  }
  ds.rebuild_matrix();
  return ds;
}

inline LabeledDataset load_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot open " + path);
  return load_csv_stream(in);
}

inline void save_csv(const LabeledDataset &ds, std::ostream &out) {
  out << "smiles,labels\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.smiles[i] << ",";
    for (std::size_t k = 0; k < ds.label_ids[i].size(); ++k) {
      if (k)
        out << ";";
      out << ds.vocab[ds.label_ids[i][k]];
    }
    out << "\n";
  }
}

inline void save_csv(const LabeledDataset &ds, const std::string &path) {
  std::ofstream out(path);
  if (!out)
    throw DataError("cannot write " + path);
  save_csv(ds, out);
}

inline LabeledDataset subset(const LabeledDataset &ds,
                             const std::vector<std::size_t> &indices) {
  LabeledDataset out;
  out.vocab = ds.vocab;
  for (std::size_t i : indices) {
    out.smiles.push_back(ds.smiles[i]);
    out.label_ids.push_back(ds.label_ids[i]);
  }
  out.rebuild_matrix();
  return out;
}

struct SplitResult {
  LabeledDataset train, val, test;
  std::vector<std::size_t> train_idx, val_idx, test_idx;
};

// Deterministic shuffle, then a best-effort stratification pass: walking
// labels from rarest to most common, any label with two or more instances
// gets one of them pinned into the training split before the remaining rows
// are dealt out by the fractions.
inline SplitResult split(const LabeledDataset &ds,
                         std::array<double, 3> fractions, std::uint64_t seed) {
  double total = fractions[0] + fractions[1] + fractions[2];
  if (std::fabs(total - 1.0) > 1e-9 || fractions[0] < 0 || fractions[1] < 0 ||
      fractions[2] < 0)
    throw BadFractions("split fractions must be nonnegative and sum to 1");

  std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i)
    order[i] = i;
  Xoshiro256 rng(seed);
  shuffle(order, rng);

  std::size_t n_train = static_cast<std::size_t>(fractions[0] * n + 0.5);
  std::size_t n_val = static_cast<std::size_t>(fractions[1] * n + 0.5);
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);

  // Label frequencies, rarest first (ties by label id).
  std::size_t m = static_cast<std::size_t>(ds.num_labels());
  std::vector<long> counts(m, 0);
  for (const auto &ids : ds.label_ids)
    for (int j : ids)
      ++counts[j];
  std::vector<int> label_order(m);
  for (std::size_t j = 0; j < m; ++j)
    label_order[j] = static_cast<int>(j);
  std::stable_sort(label_order.begin(), label_order.end(),
                   [&](int a, int b) { return counts[a] < counts[b]; });

  std::vector<int> assignment(n, -1);  // 0 train, 1 val, 2 test
  std::size_t assigned_train = 0;
  for (int j : label_order) {
    if (counts[j] < 2)
      continue;
    if (assigned_train >= n_train)
      break;
    bool covered = false;
    for (std::size_t i = 0; i < n && !covered; ++i)
      covered = assignment[i] == 0 &&
                std::find(ds.label_ids[i].begin(), ds.label_ids[i].end(), j) !=
                    ds.label_ids[i].end();
    if (covered)
      continue;
    for (std::size_t pos = 0; pos < n; ++pos) {
      std::size_t i = order[pos];
      if (assignment[i] != -1)
        continue;
      if (std::find(ds.label_ids[i].begin(), ds.label_ids[i].end(), j) !=
          ds.label_ids[i].end()) {
        assignment[i] = 0;
        ++assigned_train;
        break;
      }
    }
  }

  for (std::size_t pos = 0; pos < n; ++pos) {
    std::size_t i = order[pos];
    if (assignment[i] != -1)
      continue;
    if (assigned_train < n_train) {
      assignment[i] = 0;
      ++assigned_train;
    } else {
      // fill val next, then test
      std::size_t assigned_val = 0;
      for (std::size_t q = 0; q < n; ++q)
        if (assignment[q] == 1)
          ++assigned_val;
      assignment[i] = assigned_val < n_val ? 1 : 2;
    }
  }

  SplitResult result;
  for (std::size_t pos = 0; pos < n; ++pos) {
    std::size_t i = order[pos];
    if (assignment[i] == 0)
      result.train_idx.push_back(i);
    else if (assignment[i] == 1)
      result.val_idx.push_back(i);
    else
      result.test_idx.push_back(i);
  }
  result.train = subset(ds, result.train_idx);
  result.val = subset(ds, result.val_idx);
  result.test = subset(ds, result.test_idx);
  return result;
}

struct LabelStats {
  std::vector<std::pair<std::string, long>> counts;  // sorted descending
  Tensor co_occurrence;                              // M x M raw counts
  long total_assignments = 0;
  double long_tail_ratio = 0.0;  // top-1 count / median count
};

inline LabelStats label_stats(const LabeledDataset &ds) {
  if (ds.size() == 0)
    throw EmptyDataset("label_stats: empty dataset");
  std::size_t m = static_cast<std::size_t>(ds.num_labels());
  std::vector<long> counts(m, 0);
  for (const auto &ids : ds.label_ids)
    for (int j : ids)
      ++counts[j];
  LabelStats stats;
  for (std::size_t j = 0; j < m; ++j) {
    stats.counts.push_back({ds.vocab[j], counts[j]});
    stats.total_assignments += counts[j];
  }
  std::stable_sort(stats.counts.begin(), stats.counts.end(),
                   [](const auto &a, const auto &b) {
                     return a.second > b.second;
                   });
  stats.co_occurrence = cil::co_occurrence_matrix(ds.labels);
  if (!stats.counts.empty()) {
    std::vector<long> sorted(counts);
    std::sort(sorted.begin(), sorted.end());
    long median = sorted[sorted.size() / 2];
    stats.long_tail_ratio =
        median > 0 ? static_cast<double>(stats.counts.front().second) / median
                   : 0.0;
  }
  return stats;
}

// --- synthetic generator --------------------------------------------------------

// Structural label rules. Each rule has a SMILES fragment the generator can
// graft onto a carbon chain as a branch, and a predicate that detects the
// feature on the parsed graph. Rules are mutually exclusive on clean
// single-feature molecules, so realized label frequencies track the draw
// distribution.
namespace synth_detail {

struct Rule {
  std::string name;
  std::vector<std::string> fragments;
  std::function<bool(const MolecularGraph &)> predicate;
};

inline bool has_single_bonded_oxygen(const MolecularGraph &g) {
  for (int i = 0; i < g.num_atoms(); ++i) {
    if (g.atoms[i].element != Element::O || g.atoms[i].aromatic)
      continue;
    bool all_single = !g.adjacency[i].empty();
    for (auto [nbr, bidx] : g.adjacency[i]) {
      (void)nbr;
      if (g.bonds[bidx].order != BondOrder::Single)
        all_single = false;
    }
    if (all_single)
      return true;
  }
  return false;
}

inline bool has_plain_element(const MolecularGraph &g, Element e) {
  for (const Atom &a : g.atoms)
    if (a.element == e && !a.aromatic)
      return true;
  return false;
}

inline bool has_bond_kind(const MolecularGraph &g, Element ea, Element eb,
                          BondOrder o) {
  for (const Bond &b : g.bonds) {
    if (b.order != o)
      continue;
    Element x = g.atoms[b.a].element, y = g.atoms[b.b].element;
    if ((x == ea && y == eb) || (x == eb && y == ea))
      return true;
  }
  return false;
}

inline bool has_aromatic_ring(const MolecularGraph &g) {
  for (const Atom &a : g.atoms)
    if (a.aromatic)
      return true;
  return false;
}

inline bool has_plain_ring_of_size(const MolecularGraph &g, std::size_t k) {
  for (const auto &ring : g.rings) {
    if (ring.size() != k)
      continue;
    bool aromatic = false;
    for (int a : ring)
      if (g.atoms[a].aromatic)
        aromatic = true;
    if (!aromatic)
      return true;
  }
  return false;
}

inline const std::vector<Rule> &rules() {
  static const std::vector<Rule> table = {
      {"ether", {"O", "OC", "OCC"}, has_single_bonded_oxygen},
      {"amine",
       {"N", "NC", "NCC"},
       [](const MolecularGraph &g) { return has_plain_element(g, Element::N); }},
      {"sulfide",
       {"S", "SC", "SCC"},
       [](const MolecularGraph &g) { return has_plain_element(g, Element::S); }},
      {"fluoro",
       {"F", "CF", "CCF"},
       [](const MolecularGraph &g) { return has_plain_element(g, Element::F); }},
      {"chloro",
       {"Cl", "CCl", "CCCl"},
       [](const MolecularGraph &g) { return has_plain_element(g, Element::Cl); }},
      {"bromo",
       {"Br", "CBr", "CCBr"},
       [](const MolecularGraph &g) { return has_plain_element(g, Element::Br); }},
      {"iodo",
       {"I", "CI", "CCI"},
       [](const MolecularGraph &g) { return has_plain_element(g, Element::I); }},
      {"aromatic", {"c1ccccc1", "Cc1ccccc1", "c1ccc(C)cc1"},
       has_aromatic_ring},
      {"carbonyl",
       {"C=O", "C(=O)C", "C(=O)CC"},
       [](const MolecularGraph &g) {
         return has_bond_kind(g, Element::C, Element::O, BondOrder::Double);
       }},
      {"alkyne",
       {"C#C", "C#CC", "CC#C"},
       [](const MolecularGraph &g) {
         return has_bond_kind(g, Element::C, Element::C, BondOrder::Triple);
       }},
      {"alkene",
       {"C=C", "C=CC", "CC=C"},
       [](const MolecularGraph &g) {
         return has_bond_kind(g, Element::C, Element::C, BondOrder::Double);
       }},
      {"ring5",
       {"C1CCCC1", "CC1CCCC1"},
       [](const MolecularGraph &g) { return has_plain_ring_of_size(g, 5); }},
      {"ring6",
       {"C1CCCCC1", "CC1CCCCC1"},
       [](const MolecularGraph &g) { return has_plain_ring_of_size(g, 6); }},
      {"ring3",
       {"C1CC1", "CC1CC1"},
       [](const MolecularGraph &g) { return has_plain_ring_of_size(g, 3); }},
      {"phospho",
       {"P", "PC", "CP"},
       [](const MolecularGraph &g) { return has_plain_element(g, Element::P); }},
  };
  return table;
}

} // namespace synth_detail

inline constexpr int kMaxSyntheticLabels = 15;
inline constexpr double kSyntheticZipfExponent = 1.0;
inline constexpr double kSyntheticSecondaryProb = 0.35;

// Zipf draw probabilities over the rule indices.
inline std::vector<double> synthetic_zipf_probs(int n_labels) {
  std::vector<double> q(n_labels);
  double norm = 0.0;
  for (int k = 0; k < n_labels; ++k) {
    q[k] = 1.0 / std::pow(static_cast<double>(k + 1), kSyntheticZipfExponent);
    norm += q[k];
  }
  for (double &v : q)
    v /= norm;
  return q;
}

// Marginal probability that a molecule carries rule k's label:
// primary draw, or secondary draw when the secondary branch fires.
inline std::vector<std::pair<std::string, double>>
synthetic_label_probs(int n_labels) {
  auto q = synthetic_zipf_probs(n_labels);
  const auto &rules = synth_detail::rules();
  std::vector<std::pair<std::string, double>> out;
  for (int k = 0; k < n_labels; ++k) {
    double p = 1.0 - (1.0 - q[k]) * (1.0 - kSyntheticSecondaryProb * q[k]);
    out.push_back({rules[k].name, p});
  }
  return out;
}

// Deterministic desk-scale dataset: carbon chains with grafted structural
// fragments; the primary fragment index follows the Zipf profile, a second
// fragment is added with fixed probability, and labels are read back off
// the parsed graph with the rule predicates.
inline LabeledDataset synthetic_dataset(int n_molecules, int n_labels,
                                        std::uint64_t seed) {
  if (n_labels < 2 || n_molecules < n_labels)
    throw BadParams("synthetic_dataset: need n_molecules >= n_labels >= 2");
  if (n_labels > kMaxSyntheticLabels)
    throw BadParams("synthetic_dataset: at most " +
                    std::to_string(kMaxSyntheticLabels) +
                    " structural label rules are available");

  const auto &rules = synth_detail::rules();
  auto q = synthetic_zipf_probs(n_labels);
  Xoshiro256 rng(seed);

  auto draw_rule = [&]() {
    double u = rng.uniform();
    double acc = 0.0;
    for (int k = 0; k < n_labels; ++k) {
      acc += q[k];
      if (u < acc)
        return k;
    }
    return n_labels - 1;
  };

  LabeledDataset ds;
  std::vector<std::string> rule_names;
  for (int k = 0; k < n_labels; ++k)
    rule_names.push_back(rules[k].name);
  ds.vocab = rule_names;
  std::sort(ds.vocab.begin(), ds.vocab.end());
  std::map<std::string, int> vocab_index;
  for (std::size_t j = 0; j < ds.vocab.size(); ++j)
    vocab_index[ds.vocab[j]] = static_cast<int>(j);

  std::set<std::pair<std::string, std::vector<int>>> dedup;
  while (static_cast<int>(ds.smiles.size()) < n_molecules) {
    int primary = draw_rule();
    bool two = rng.uniform() < kSyntheticSecondaryProb;
    int secondary = two ? draw_rule() : -1;

    // Carbon backbone with fragments grafted as branches. The template
    // space is kept much larger than any requested dataset so that the
    // uniqueness pass cannot noticeably distort the label profile.
    int backbone = 2 + static_cast<int>(rng.below(6));  // 2..7 carbons
    std::vector<std::string> slots(backbone, "");
    std::vector<int> used(backbone, 0);
    auto capacity = [&](int i) {
      return (i == 0 || i == backbone - 1) ? 3 : 2;
    };
    auto pick_slot = [&]() {
      int at = static_cast<int>(rng.below(slots.size()));
      while (used[at] >= capacity(at))
        at = (at + 1) % backbone;
      ++used[at];
      return at;
    };
    auto graft = [&](int rule) {
      const auto &frags = rules[rule].fragments;
      std::string frag = frags[rng.below(frags.size())];
      slots[pick_slot()] += "(" + frag + ")";
    };
    // Two inert alkyl decorations inject enough entropy that the
    // uniqueness pass almost never rejects a draw.
    for (int d = 0; d < 2; ++d) {
      std::uint64_t alkyl = rng.below(4);  // 0 none, else C..CCC branch
      if (alkyl > 0)
        slots[pick_slot()] += "(" + std::string(alkyl, 'C') + ")";
    }
    graft(primary);
    if (secondary >= 0 && secondary != primary)
      graft(secondary);

    std::string smiles;
    for (int i = 0; i < backbone; ++i)
      smiles += "C" + slots[i];

    MolecularGraph g = parse_smiles(smiles);  // generator contract: valid
    std::vector<int> ids;
    for (int k = 0; k < n_labels; ++k)
      if (rules[k].predicate(g))
        ids.push_back(vocab_index[rules[k].name]);
    std::sort(ids.begin(), ids.end());
    if (!dedup.insert({smiles, ids}).second)
      continue;  // keep molecules unique
    ds.smiles.push_back(smiles);
    ds.label_ids.push_back(std::move(ids));
  }
  ds.rebuild_matrix();
  return ds;
}

} // namespace hmfnet
