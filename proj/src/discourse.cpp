#include "rstcoref/discourse.hpp"
#include "rstcoref/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace rstcoref {

using nlohmann::json;

std::string to_string(Nuclearity nuc) {
  switch (nuc) {
    case Nuclearity::kNN: return "NN";
    case Nuclearity::kNS: return "NS";
    case Nuclearity::kSN: return "SN";
    case Nuclearity::kMultiN: return "multiN";
    case Nuclearity::kNone: break;
  }
  return "";
}

Nuclearity nuclearity_from_string(const std::string& s) {
  if (s == "NN") return Nuclearity::kNN;
  if (s == "NS") return Nuclearity::kNS;
  if (s == "SN") return Nuclearity::kSN;
  if (s == "multiN") return Nuclearity::kMultiN;
  if (s.empty()) return Nuclearity::kNone;
  throw std::invalid_argument("unknown nuclearity '" + s + "'");
}

bool RstTree::is_nucleus(int child) const {
  const int p = node(child).parent;
  if (p < 0) return true;
  const RstNode& parent = node(p);
  switch (parent.nuclearity) {
    case Nuclearity::kNS: return parent.children.front() == child;
    case Nuclearity::kSN: return parent.children.back() == child;
    case Nuclearity::kNN:
    case Nuclearity::kMultiN: return true;
    case Nuclearity::kNone: break;
  }
  return false;
}

std::vector<int> RstTree::leaves() const {
  std::vector<int> out;
  if (root < 0) return out;
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const RstNode& n = node(id);
    if (n.is_edu()) {
      out.push_back(id);
    } else {
      for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back(*it);
    }
  }
  return out;
}

int RstTree::count_relations(const std::string& label) const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [&](const RstNode& n) {
    return !n.is_edu() && n.label == label;
  }));
}

int add_node(RstTree& tree, int parent, RstNode node) {
  const int id = static_cast<int>(tree.nodes.size());
  node.id = id;
  node.parent = parent;
  node.children.clear();
  tree.nodes.push_back(std::move(node));
  if (parent < 0) {
    tree.root = id;
  } else {
    tree.nodes.at(static_cast<std::size_t>(parent)).children.push_back(id);
  }
  return id;
}

void validate_tree(const RstTree& tree) {
  if (tree.root < 0 || tree.nodes.empty()) throw StructureError("empty tree", -1);
  auto fail = [](const RstNode& n, const std::string& msg) {
    throw StructureError("node " + std::to_string(n.id) + ": " + msg, n.id);
  };
  for (const RstNode& n : tree.nodes) {
    if (n.char_start > n.char_end) fail(n, "inverted span");
    if (n.is_edu()) {
      if (!n.children.empty()) fail(n, "EDU with children");
      continue;
    }
    const std::size_t arity = n.children.size();
    switch (n.nuclearity) {
      case Nuclearity::kNS:
      case Nuclearity::kSN:
      case Nuclearity::kNN:
        if (arity != 2) fail(n, to_string(n.nuclearity) + " relation needs exactly 2 children");
        break;
      case Nuclearity::kMultiN:
        if (arity < 2) fail(n, "multinuclear relation needs at least 2 children");
        break;
      case Nuclearity::kNone:
        fail(n, "relation without nuclearity");
    }
    for (std::size_t k = 0; k < arity; ++k) {
      const RstNode& c = tree.node(n.children[k]);
      if (c.parent != n.id) fail(c, "parent link mismatch");
      if (k > 0 && c.char_start != tree.node(n.children[k - 1]).char_end) {
        fail(n, "children not contiguous at child " + std::to_string(k));
      }
    }
    if (tree.node(n.children.front()).char_start != n.char_start ||
        tree.node(n.children.back()).char_end != n.char_end) {
      fail(n, "span differs from the union of its children");
    }
  }
}

namespace {

int parse_node(const json& j, RstTree& tree, int parent) {
  RstNode node;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "edu") {
    node.kind = NodeKind::kEdu;
    node.text = j.value("text", std::string{});
  } else if (kind == "rel") {
    node.kind = NodeKind::kRelation;
    node.nuclearity = nuclearity_from_string(j.value("nuc", std::string{}));
  } else {
    throw StructureError("unknown node kind '" + kind + "'", static_cast<int>(tree.nodes.size()));
  }
  node.label = j.value("label", std::string{});
  node.char_start = j.at("span").at(0).get<int>();
  node.char_end = j.at("span").at(1).get<int>();
  const int id = add_node(tree, parent, std::move(node));
  if (j.contains("children")) {
    for (const auto& c : j.at("children")) parse_node(c, tree, id);
  }
  return id;
}

json node_to_json(const RstTree& tree, int id) {
  const RstNode& n = tree.node(id);
  json j;
  j["kind"] = n.is_edu() ? "edu" : "rel";
  j["label"] = n.label;
  j["span"] = {n.char_start, n.char_end};
  if (n.is_edu()) {
    j["text"] = n.text;
  } else {
    j["nuc"] = to_string(n.nuclearity);
    json children = json::array();
    for (int c : n.children) children.push_back(node_to_json(tree, c));
    j["children"] = std::move(children);
  }
  return j;
}

}  // namespace

RstDocument parse_rst_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed RST JSON at byte ") + std::to_string(e.byte), e.byte);
  }
  RstDocument doc;
  try {
    doc.id = j.value("id", std::string{});
    for (const auto& t : j.at("paragraph_trees")) {
      RstTree tree;
      parse_node(t, tree, -1);
      validate_tree(tree);
      doc.paragraph_trees.push_back(std::move(tree));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("RST schema error: ") + e.what(), -1);
  }
  return doc;
}

RstDocument load_rst(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  RstDocument doc = parse_rst_json(buf.str());
  if (doc.id.empty()) doc.id = path.stem().string();
  return doc;
}

std::string serialize_rst(const RstDocument& doc) {
  json j;
  j["id"] = doc.id;
  json trees = json::array();
  for (const auto& t : doc.paragraph_trees) trees.push_back(node_to_json(t, t.root));
  j["paragraph_trees"] = std::move(trees);
  return j.dump();
}

std::map<std::string, RstDocument> load_rst_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json" &&
        entry.path().filename() != "manifest.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, RstDocument> out;
  for (const auto& f : files) {
    RstDocument doc = load_rst(f);
    const std::string id = doc.id;
    if (!out.emplace(id, std::move(doc)).second) {
      throw std::runtime_error("duplicate RST document id '" + id + "' in " + f.string());
    }
  }
  return out;
}

void save_rst(const RstDocument& doc, const std::filesystem::path& path) {
  write_text_atomic(path, serialize_rst(doc) + "\n");
}

RstTree merge_paragraph_trees(const std::vector<RstTree>& trees) {
  if (trees.empty()) throw std::invalid_argument("merge_paragraph_trees: no trees");
  if (trees.size() == 1) return trees.front();

  RstTree merged;
  std::vector<int> roots;
  for (const RstTree& t : trees) {
    const int offset = static_cast<int>(merged.nodes.size());
    for (RstNode n : t.nodes) {
      n.id += offset;
      if (n.parent >= 0) n.parent += offset;
      for (int& c : n.children) c += offset;
      merged.nodes.push_back(std::move(n));
    }
    roots.push_back(t.root + offset);
  }
  int right = roots.back();
  for (auto it = roots.rbegin() + 1; it != roots.rend(); ++it) {
    RstNode joint;
    joint.id = static_cast<int>(merged.nodes.size());
    joint.kind = NodeKind::kRelation;
    joint.label = "Joint";
    joint.nuclearity = Nuclearity::kMultiN;
    joint.children = {*it, right};
    joint.char_start = merged.nodes[static_cast<std::size_t>(*it)].char_start;
    joint.char_end = merged.nodes[static_cast<std::size_t>(right)].char_end;
    merged.nodes[static_cast<std::size_t>(*it)].parent = joint.id;
    merged.nodes[static_cast<std::size_t>(right)].parent = joint.id;
    right = joint.id;
    merged.nodes.push_back(std::move(joint));
  }
  merged.root = right;
  return merged;
}

EduTable build_edu_table(const RstTree& tree, const Document& doc) {
  EduTable table;
  const std::size_t n_nodes = tree.nodes.size();
  table.node_parent.assign(n_nodes, -1);
  table.node_depth.assign(n_nodes, 0);

  // Parent links and depths from the root down.
  std::vector<int> stack{tree.root};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    for (int c : tree.node(id).children) {
      table.node_parent[static_cast<std::size_t>(c)] = id;
      table.node_depth[static_cast<std::size_t>(c)] = table.node_depth[static_cast<std::size_t>(id)] + 1;
      stack.push_back(c);
    }
  }

  const std::vector<int> leaves = tree.leaves();
  for (int leaf : leaves) {
    table.edus.push_back({leaf, 0, -1});
    table.is_nuclear.push_back(tree.is_nucleus(leaf));
    table.depth.push_back(table.node_depth[static_cast<std::size_t>(leaf)]);
  }

  table.edu_of_token.assign(static_cast<std::size_t>(doc.n_tokens()), -1);
  std::vector<int> outside;
  for (int t = 0; t < doc.n_tokens(); ++t) {
    const Token& tok = doc.tokens[static_cast<std::size_t>(t)];
    // Last EDU whose start is <= the token start.
    auto it = std::upper_bound(leaves.begin(), leaves.end(), tok.char_start,
                               [&](int pos, int leaf) { return pos < tree.node(leaf).char_start; });
    if (it == leaves.begin()) {
      outside.push_back(t);
      continue;
    }
    --it;
    const RstNode& edu = tree.node(*it);
    if (tok.char_start >= edu.char_end) {
      outside.push_back(t);
      continue;
    }
    const int e = static_cast<int>(it - leaves.begin());
    if (tok.char_end > edu.char_end) {
      table.warnings.push_back("EDU " + std::to_string(e) + " (node " + std::to_string(edu.id) +
                               ") ends inside token " + std::to_string(t) +
                               "; boundary snapped to the token end");
    }
    table.edu_of_token[static_cast<std::size_t>(t)] = e;
    EduEntry& entry = table.edus[static_cast<std::size_t>(e)];
    if (entry.last_token < entry.first_token) entry.first_token = t;
    entry.last_token = t;
  }
  if (!outside.empty()) {
    std::string list;
    for (std::size_t k = 0; k < outside.size() && k < 10; ++k) {
      list += (k ? ", " : "") + std::to_string(outside[k]);
    }
    throw AlignmentError("document " + doc.id + ": " + std::to_string(outside.size()) +
                         " token(s) outside every EDU (first: " + list + ")");
  }
  for (int e = 0; e < table.size(); ++e) {
    const EduEntry& entry = table.edus[static_cast<std::size_t>(e)];
    if (entry.last_token < entry.first_token) {
      table.warnings.push_back("EDU " + std::to_string(e) + " (node " +
                               std::to_string(entry.node_id) + ") covers no token");
    }
  }
  return table;
}

int edu_of_span(const EduTable& table, const MentionSpan& span) {
  return table.edu_of_token.at(static_cast<std::size_t>(span.start));
}

namespace {

std::pair<int, int> ordered_edus(const EduTable& table, const MentionSpan& span_j,
                                 const MentionSpan& span_i) {
  if (!(span_j < span_i)) {
    throw std::invalid_argument("antecedent span must precede the anaphor span");
  }
  return {edu_of_span(table, span_j), edu_of_span(table, span_i)};
}

}  // namespace

int d_lin(const EduTable& table, const MentionSpan& span_j, const MentionSpan& span_i) {
  auto [uj, ui] = ordered_edus(table, span_j, span_i);
  return ui - uj;
}

int d_rh(const EduTable& table, const MentionSpan& span_j, const MentionSpan& span_i,
         RhInterval interval) {
  auto [uj, ui] = ordered_edus(table, span_j, span_i);
  const int last = interval == RhInterval::kHalfOpen ? ui : ui - 1;
  int count = 0;
  for (int e = uj + 1; e <= last; ++e) count += table.is_nuclear[static_cast<std::size_t>(e)];
  return count;
}

int d_lca(const EduTable& table, const MentionSpan& span_j, const MentionSpan& span_i) {
  auto [uj, ui] = ordered_edus(table, span_j, span_i);
  int a = table.edus[static_cast<std::size_t>(uj)].node_id;
  int b = table.edus[static_cast<std::size_t>(ui)].node_id;
  const int start_depth = table.node_depth[static_cast<std::size_t>(b)];
  auto up = [&](int& n) { n = table.node_parent[static_cast<std::size_t>(n)]; };
  auto depth = [&](int n) { return table.node_depth[static_cast<std::size_t>(n)]; };
  while (depth(a) > depth(b)) up(a);
  while (depth(b) > depth(a)) up(b);
  while (a != b) {
    up(a);
    up(b);
  }
  return start_depth - depth(a);
}

}  // namespace rstcoref
