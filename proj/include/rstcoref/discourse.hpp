#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rstcoref/corpus.hpp"

namespace rstcoref {

class StructureError : public std::runtime_error {
 public:
  StructureError(const std::string& what, int node_id)
      : std::runtime_error(what), node_id_(node_id) {}
  int node_id() const { return node_id_; }

 private:
  int node_id_;
};

enum class NodeKind { kEdu, kRelation };

/// Nuclearity of a relation node. kNN is a binary multinuclear relation,
/// kMultiN allows two or more nuclei.
enum class Nuclearity { kNone, kNN, kNS, kSN, kMultiN };

std::string to_string(Nuclearity nuc);
Nuclearity nuclearity_from_string(const std::string& s);

struct RstNode {
  int id = 0;  // index into RstTree::nodes
  NodeKind kind = NodeKind::kEdu;
  std::string label;
  Nuclearity nuclearity = Nuclearity::kNone;
  std::vector<int> children;
  int parent = -1;
  int char_start = 0;
  int char_end = 0;
  std::string text;  // EDUs only

  bool is_edu() const { return kind == NodeKind::kEdu; }
};

/// Constituency discourse tree stored as a flat node arena.
struct RstTree {
  std::vector<RstNode> nodes;
  int root = -1;

  const RstNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
  /// Whether the edge from `child`'s parent marks it as a nucleus. The root is nuclear.
  bool is_nucleus(int child) const;
  /// EDU node ids in text order.
  std::vector<int> leaves() const;
  int count_relations(const std::string& label) const;
};

/// Appends `child` to `parent` (or makes it the root when parent < 0).
/// Returns the new node id. Used by loaders and generators.
int add_node(RstTree& tree, int parent, RstNode node);

/// Checks arity, nuclearity and span contiguity. Throws StructureError
/// naming the first offending node.
void validate_tree(const RstTree& tree);

struct RstDocument {
  std::string id;
  std::vector<RstTree> paragraph_trees;
};

RstDocument parse_rst_json(const std::string& json_text);
RstDocument load_rst(const std::filesystem::path& path);
std::string serialize_rst(const RstDocument& doc);
/// Every *.json file in `dir` (manifest.json excepted), keyed by document id.
std::map<std::string, RstDocument> load_rst_dir(const std::filesystem::path& dir);
void save_rst(const RstDocument& doc, const std::filesystem::path& path);

/// Right-branching fold: Joint(t1, Joint(t2, ... Joint(t_{n-1}, t_n))).
/// Every Joint is multinuclear; a single tree is returned unchanged.
RstTree merge_paragraph_trees(const std::vector<RstTree>& trees);

struct EduEntry {
  int node_id = 0;
  int first_token = 0;
  int last_token = -1;  // last < first for an EDU covering no token
};

/// Text-ordered EDU index of a document tree.
struct EduTable {
  std::vector<EduEntry> edus;
  std::vector<bool> is_nuclear;   // per EDU
  std::vector<int> depth;         // per EDU, edges to root
  std::vector<int> node_parent;   // per tree node
  std::vector<int> node_depth;    // per tree node
  std::vector<int> edu_of_token;  // per document token
  std::vector<std::string> warnings;

  int size() const { return static_cast<int>(edus.size()); }
};

/// Maps EDU character spans onto document tokens. A token straddling an EDU
/// boundary is assigned to the EDU holding its first character, with a
/// warning. Throws AlignmentError when tokens fall outside every EDU.
EduTable build_edu_table(const RstTree& tree, const Document& doc);

/// EDU containing span.start.
int edu_of_span(const EduTable& table, const MentionSpan& span);

/// kHalfOpen counts (u_j, u_i], kOpen counts (u_j, u_i) and so leaves out
/// the anaphor's own EDU.
enum class RhInterval { kHalfOpen, kOpen };

/// EDU index difference between the anaphor `span_i` and antecedent `span_j`.
int d_lin(const EduTable& table, const MentionSpan& span_j, const MentionSpan& span_i);
/// Nuclear EDUs e with idx(u_j) < idx(e) <= idx(u_i).
int d_rh(const EduTable& table, const MentionSpan& span_j, const MentionSpan& span_i,
         RhInterval interval = RhInterval::kHalfOpen);
/// Edges from u_i up to the lowest node covering u_j and u_i.
int d_lca(const EduTable& table, const MentionSpan& span_j, const MentionSpan& span_i);

}  // namespace rstcoref
