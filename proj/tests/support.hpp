#pragma once

// Random instance generators and brute-force reference implementations
// shared by the unit tests and the acceptance runner. Nothing here calls the
// code under test for the quantity it checks.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rstcoref/autograd.hpp"
#include "rstcoref/corpus.hpp"
#include "rstcoref/discourse.hpp"
#include "rstcoref/evalmetrics.hpp"

namespace testing {

using namespace rstcoref;

/// A document of n_edus EDUs, each 1-3 words, with a random RST tree over them.
struct TreeInstance {
  Document doc;
  RstTree tree;
  std::vector<int> edu_first_token;  // per EDU, text order
};

inline int build_random(RstTree& tree, int parent, int a, int b, const std::vector<int>& edu_char,
                        std::mt19937_64& rng) {
  RstNode node;
  node.char_start = edu_char[static_cast<std::size_t>(a)];
  node.char_end = edu_char[static_cast<std::size_t>(b)];
  if (b - a == 1) {
    node.kind = NodeKind::kEdu;
    return add_node(tree, parent, node);
  }
  node.kind = NodeKind::kRelation;
  std::uniform_int_distribution<int> pick(0, 3);
  const int choice = pick(rng);
  std::vector<int> cuts;
  if (choice == 3 && b - a >= 3) {
    node.nuclearity = Nuclearity::kMultiN;
    node.label = "List";
    const int k = std::uniform_int_distribution<int>(2, std::min(4, b - a))(rng);
    std::vector<int> inner(static_cast<std::size_t>(b - a - 1));
    std::iota(inner.begin(), inner.end(), a + 1);
    std::shuffle(inner.begin(), inner.end(), rng);
    cuts.assign(inner.begin(), inner.begin() + (k - 1));
    std::sort(cuts.begin(), cuts.end());
  } else {
    node.nuclearity = choice == 0 ? Nuclearity::kNS : choice == 1 ? Nuclearity::kSN : Nuclearity::kNN;
    node.label = choice == 2 ? "Sequence" : "Elaboration";
    cuts.push_back(std::uniform_int_distribution<int>(a + 1, b - 1)(rng));
  }
  const int id = add_node(tree, parent, node);
  int lo = a;
  cuts.push_back(b);
  for (int c : cuts) {
    build_random(tree, id, lo, c, edu_char, rng);
    lo = c;
  }
  return id;
}

inline TreeInstance random_tree_instance(std::mt19937_64& rng, int max_edus) {
  TreeInstance inst;
  const int n_edus = std::uniform_int_distribution<int>(1, max_edus)(rng);
  std::string text;
  std::vector<int> edu_char;
  int word = 0;
  for (int e = 0; e < n_edus; ++e) {
    edu_char.push_back(static_cast<int>(text.size()));
    inst.edu_first_token.push_back(word);
    const int words = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int w = 0; w < words; ++w) {
      text += "w" + std::to_string(word++) + " ";
    }
  }
  edu_char.push_back(static_cast<int>(text.size()));
  inst.doc = make_document("rand", text, {}, nullptr, nullptr);
  build_random(inst.tree, -1, 0, n_edus, edu_char, rng);
  return inst;
}

// ---------------------------------------------------------------------------
// Distance oracles. They walk the tree directly instead of using an EduTable.

/// Leaves in text order by recursive descent.
inline void collect_leaves(const RstTree& t, int id, std::vector<int>& out) {
  const RstNode& n = t.node(id);
  if (n.is_edu()) {
    out.push_back(id);
    return;
  }
  for (int c : n.children) collect_leaves(t, c, out);
}

/// Index (in text order) of the leaf whose character range holds `char_pos`,
/// found by linear scan.
inline int leaf_index_at(const RstTree& t, const std::vector<int>& leaves, int char_pos) {
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const RstNode& n = t.node(leaves[k]);
    if (n.char_start <= char_pos && char_pos < n.char_end) return static_cast<int>(k);
  }
  return -1;
}

/// Nuclear status of a node from its parent's relation and its child position.
inline bool oracle_nuclear(const RstTree& t, int id) {
  const int parent = t.node(id).parent;
  if (parent < 0) return true;
  const RstNode& p = t.node(parent);
  const auto pos = std::find(p.children.begin(), p.children.end(), id) - p.children.begin();
  switch (p.nuclearity) {
    case Nuclearity::kNS: return pos == 0;
    case Nuclearity::kSN: return pos == 1;
    default: return true;
  }
}

struct OracleDistances {
  int lin;
  int rh;
  int lca;
};

inline OracleDistances oracle_distances(const RstTree& t, const Document& doc, const MentionSpan& j,
                                        const MentionSpan& i) {
  std::vector<int> leaves;
  collect_leaves(t, t.root, leaves);
  const int uj = leaf_index_at(t, leaves, doc.tokens[static_cast<std::size_t>(j.start)].char_start);
  const int ui = leaf_index_at(t, leaves, doc.tokens[static_cast<std::size_t>(i.start)].char_start);
  OracleDistances d{ui - uj, 0, 0};
  for (int k = uj + 1; k <= ui; ++k) d.rh += oracle_nuclear(t, leaves[static_cast<std::size_t>(k)]);
  std::set<int> ancestors;
  for (int n = leaves[static_cast<std::size_t>(uj)]; n >= 0; n = t.node(n).parent) ancestors.insert(n);
  for (int n = leaves[static_cast<std::size_t>(ui)]; !ancestors.count(n); n = t.node(n).parent) ++d.lca;
  return d;
}

// ---------------------------------------------------------------------------
// Pruning and decoding oracles

/// Full stable sort by descending score; keeps the first k indices.
inline std::vector<int> oracle_top_k(const std::vector<double>& scores, int k) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  idx.resize(static_cast<std::size_t>(std::min<int>(k, static_cast<int>(idx.size()))));
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Per mention i, the K best j < i under a full stable sort, in increasing j.
inline std::vector<std::vector<int>> oracle_antecedents(const Eigen::MatrixXd& coarse, int k) {
  std::vector<std::vector<int>> out;
  for (Eigen::Index i = 0; i < coarse.rows(); ++i) {
    std::vector<int> js(static_cast<std::size_t>(i));
    std::iota(js.begin(), js.end(), 0);
    std::stable_sort(js.begin(), js.end(), [&](int a, int b) { return coarse(i, a) > coarse(i, b); });
    if (static_cast<int>(js.size()) > k) js.resize(static_cast<std::size_t>(k));
    std::sort(js.begin(), js.end());
    out.push_back(std::move(js));
  }
  return out;
}

/// Scores drawn from a handful of values so ties are common.
inline std::vector<double> tied_scores(std::mt19937_64& rng, int n) {
  std::vector<double> s(static_cast<std::size_t>(n));
  std::uniform_int_distribution<int> level(-3, 3);
  for (auto& x : s) x = 0.5 * level(rng);
  return s;
}

inline Eigen::MatrixXd tied_matrix(std::mt19937_64& rng, int n) {
  Eigen::MatrixXd m(n, n);
  std::uniform_int_distribution<int> level(-3, 3);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = 0.25 * level(rng);
  return m;
}

/// Connected components (size >= 2) of the graph with an edge i - a[i], by BFS.
inline std::set<std::set<int>> oracle_components(const std::vector<int>& antecedent) {
  const int n = static_cast<int>(antecedent.size());
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (antecedent[i] >= 0) {
      adj[i].push_back(antecedent[i]);
      adj[antecedent[i]].push_back(i);
    }
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::set<std::set<int>> out;
  for (int s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::set<int> comp;
    std::queue<int> q;
    q.push(s);
    seen[s] = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      comp.insert(u);
      for (int v : adj[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          q.push(v);
        }
      }
    }
    if (comp.size() >= 2) out.insert(comp);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Paragraph merge

/// n paragraphs of one EDU each, and their single-node trees.
struct ParagraphChain {
  Document doc;
  std::vector<RstTree> trees;
};

inline ParagraphChain single_edu_paragraphs(int n) {
  ParagraphChain out;
  std::string text;
  std::vector<int> starts;
  for (int p = 0; p < n; ++p) {
    starts.push_back(static_cast<int>(text.size()));
    text += "p" + std::to_string(p) + " word\n";
  }
  starts.push_back(static_cast<int>(text.size()));
  out.doc = make_document("chain", text, {}, nullptr, nullptr);
  for (int p = 0; p < n; ++p) {
    RstTree t;
    RstNode edu;
    edu.char_start = starts[static_cast<std::size_t>(p)];
    edu.char_end = starts[static_cast<std::size_t>(p) + 1];
    add_node(t, -1, edu);
    out.trees.push_back(std::move(t));
  }
  return out;
}

/// Empty when the merged tree of n single-EDU paragraphs has the
/// right-branching shape: n-1 multinuclear Joint nodes, every leaf nuclear,
/// leaf k < n-1 at depth k+1 and the last leaf at depth n-1. The LCA
/// distance between the leaves of paragraphs j < i is then depth(i) - j.
inline std::string merge_law_violation(int n) {
  const ParagraphChain chain = single_edu_paragraphs(n);
  const RstTree merged = merge_paragraph_trees(chain.trees);
  const int joints = merged.count_relations("Joint");
  if (joints != n - 1) return "expected " + std::to_string(n - 1) + " Joint nodes, got " + std::to_string(joints);
  for (const RstNode& node : merged.nodes) {
    if (!node.is_edu() && node.nuclearity != Nuclearity::kMultiN) return "Joint node is not multinuclear";
  }
  std::vector<int> leaves;
  collect_leaves(merged, merged.root, leaves);
  if (static_cast<int>(leaves.size()) != n) return "leaf count";
  auto depth = [&](int id) {
    int d = 0;
    for (int x = merged.node(id).parent; x >= 0; x = merged.node(x).parent) ++d;
    return d;
  };
  for (int k = 0; k < n; ++k) {
    if (!oracle_nuclear(merged, leaves[static_cast<std::size_t>(k)])) return "leaf " + std::to_string(k) + " is a satellite";
    const int want = n == 1 ? 0 : (k < n - 1 ? k + 1 : n - 1);
    if (depth(leaves[static_cast<std::size_t>(k)]) != want) return "leaf " + std::to_string(k) + " at wrong depth";
  }
  const EduTable table = build_edu_table(merged, chain.doc);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      const MentionSpan mj{chain.doc.paragraphs[static_cast<std::size_t>(j)].first_token,
                           chain.doc.paragraphs[static_cast<std::size_t>(j)].first_token};
      const MentionSpan mi{chain.doc.paragraphs[static_cast<std::size_t>(i)].first_token,
                           chain.doc.paragraphs[static_cast<std::size_t>(i)].first_token};
      const int want = (i < n - 1 ? i + 1 : n - 1) - j;
      if (d_lca(table, mj, mi) != want) {
        return "d_lca(" + std::to_string(j) + ", " + std::to_string(i) + ") = " + std::to_string(d_lca(table, mj, mi)) +
               ", expected " + std::to_string(want);
      }
      if (d_rh(table, mj, mi) != i - j) return "d_rh over an all-nuclear chain";
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// LEA

/// Random document clustering over mentions [k, k+1), k < n_mentions; each
/// mention is kept with probability 3/4 and put into one of a few entities.
inline std::vector<Entity> random_entities(std::mt19937_64& rng, int n_mentions) {
  const int n_entities = std::uniform_int_distribution<int>(1, std::max(1, n_mentions / 2 + 1))(rng);
  std::vector<Entity> out(static_cast<std::size_t>(n_entities));
  for (int m = 0; m < n_mentions; ++m) {
    if (std::uniform_int_distribution<int>(0, 3)(rng) == 0) continue;
    out[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, n_entities - 1)(rng))].push_back({m, m + 1});
  }
  std::erase_if(out, [](const Entity& e) { return e.empty(); });
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

/// Sums of |e| * (resolved links / links(e)) and of |e|, over entities with at
/// least two mentions, by listing every link of e and looking it up in `other`.
inline std::pair<Rational, Rational> oracle_lea_side(const std::vector<Entity>& entities,
                                                     const std::vector<Entity>& other) {
  std::map<CharMention, std::size_t> owner;
  for (std::size_t k = 0; k < other.size(); ++k) {
    for (const auto& m : other[k]) owner[m] = k;
  }
  Rational num = 0, den = 0;
  for (const Entity& e : entities) {
    if (e.size() < 2) continue;
    long total = 0, resolved = 0;
    for (std::size_t a = 0; a < e.size(); ++a) {
      for (std::size_t b = a + 1; b < e.size(); ++b) {
        ++total;
        auto ia = owner.find(e[a]);
        auto ib = owner.find(e[b]);
        if (ia != owner.end() && ib != owner.end() && ia->second == ib->second) ++resolved;
      }
    }
    num += Rational(static_cast<long>(e.size()) * resolved, total);
    den += static_cast<long>(e.size());
  }
  return {num, den};
}

struct OracleLea {
  Rational recall = 0, precision = 0, f1 = 0;
};

inline OracleLea oracle_lea(const ClusterFile& key, const ClusterFile& response) {
  Rational rn = 0, rd = 0, pn = 0, pd = 0;
  for (const auto& [id, k] : key.documents) {
    const auto& r = response.documents.at(id);
    auto [a, b] = oracle_lea_side(k, r);
    auto [c, d] = oracle_lea_side(r, k);
    rn += a;
    rd += b;
    pn += c;
    pd += d;
  }
  OracleLea o;
  if (rd != 0) o.recall = rn / rd;
  if (pd != 0) o.precision = pn / pd;
  if (o.recall + o.precision != 0) o.f1 = 2 * o.recall * o.precision / (o.recall + o.precision);
  return o;
}

// ---------------------------------------------------------------------------
// Finite differences

/// Largest relative error between the tape gradient of `loss` and central
/// differences, over every entry of every parameter. `loss` rebuilds the
/// graph on the given tape from the current parameter values.
inline double gradient_check(const std::vector<ad::Parameter*>& params,
                             const std::function<ad::Var(ad::Tape&)>& loss, double h = 1e-5) {
  for (auto* p : params) p->zero_grad();
  {
    ad::Tape tape;
    tape.backward(loss(tape));
  }
  auto value = [&] {
    ad::Tape tape;
    return loss(tape).scalar();
  };
  double worst = 0.0;
  for (auto* p : params) {
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      const double saved = p->value.data()[k];
      p->value.data()[k] = saved + h;
      const double up = value();
      p->value.data()[k] = saved - h;
      const double down = value();
      p->value.data()[k] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p->grad.data()[k];
      const double err = std::abs(analytic - numeric) / std::max(1e-6, std::abs(analytic) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

inline ad::Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  ad::Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path = std::filesystem::temp_directory_path() / ("rstcoref-" + tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace testing
