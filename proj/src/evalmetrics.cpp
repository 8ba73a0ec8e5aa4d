#include "rstcoref/evalmetrics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

namespace rstcoref {

using nlohmann::json;

namespace {

Rational links(std::size_t n) { return Rational(n * (n - 1) / 2); }

void check_disjoint(const std::string& id, const std::vector<Entity>& entities, const char* side) {
  std::set<CharMention> seen;
  for (const auto& e : entities) {
    for (const auto& m : e) {
      if (!seen.insert(m).second) {
        throw std::invalid_argument(std::string(side) + " document " + id + ": mention [" +
                                    std::to_string(m.first) + "," + std::to_string(m.second) +
                                    ") appears in more than one entity");
      }
    }
  }
}

void check_same_ids(const ClusterFile& key, const ClusterFile& response) {
  std::vector<std::string> only_key;
  std::vector<std::string> only_response;
  for (const auto& [id, _] : key.documents) {
    if (!response.documents.count(id)) only_key.push_back(id);
  }
  for (const auto& [id, _] : response.documents) {
    if (!key.documents.count(id)) only_response.push_back(id);
  }
  if (only_key.empty() && only_response.empty()) return;
  std::string msg = "document id sets differ;";
  auto list = [&](const char* what, const std::vector<std::string>& ids) {
    if (ids.empty()) return;
    msg += std::string(" ") + what + ":";
    for (const auto& id : ids) msg += " " + id;
  };
  list("only in key", only_key);
  list("only in response", only_response);
  throw DocumentSetMismatch(msg);
}

LeaScore finalize(const LeaTerms& t) {
  LeaScore s;
  s.terms = t;
  if (t.recall_denominator == 0) {
    s.warnings.push_back("key has no entity of size >= 2; recall defined as 0");
  } else {
    s.recall = t.recall_numerator / t.recall_denominator;
  }
  if (t.precision_denominator == 0) {
    s.warnings.push_back("response has no entity of size >= 2; precision defined as 0");
  } else {
    s.precision = t.precision_numerator / t.precision_denominator;
  }
  if (s.recall + s.precision > 0) s.f1 = 2 * s.recall * s.precision / (s.recall + s.precision);
  return s;
}

// One side of LEA: importance-weighted resolution of `entities` against `other`.
void side_terms(const std::vector<Entity>& entities, const std::vector<Entity>& other,
                Rational& numerator, Rational& denominator) {
  std::map<CharMention, std::size_t> owner;
  for (std::size_t r = 0; r < other.size(); ++r) {
    for (const auto& m : other[r]) owner[m] = r;
  }
  for (const auto& e : entities) {
    if (e.size() < 2) continue;
    std::map<std::size_t, std::size_t> overlap;
    for (const auto& m : e) {
      auto it = owner.find(m);
      if (it != owner.end()) ++overlap[it->second];
    }
    Rational resolved = 0;
    for (const auto& [_, n] : overlap) resolved += links(n);
    numerator += Rational(e.size()) * resolved / links(e.size());
    denominator += Rational(e.size());
  }
}

void side_terms_by_pairs(const std::vector<Entity>& entities, const std::vector<Entity>& other,
                         Rational& numerator, Rational& denominator) {
  auto same_entity = [&](const CharMention& a, const CharMention& b) {
    for (const auto& r : other) {
      const bool has_a = std::find(r.begin(), r.end(), a) != r.end();
      const bool has_b = std::find(r.begin(), r.end(), b) != r.end();
      if (has_a && has_b) return true;
    }
    return false;
  };
  for (const auto& e : entities) {
    if (e.size() < 2) continue;
    long total = 0;
    long resolved = 0;
    for (std::size_t a = 0; a < e.size(); ++a) {
      for (std::size_t b = a + 1; b < e.size(); ++b) {
        ++total;
        if (same_entity(e[a], e[b])) ++resolved;
      }
    }
    numerator += Rational(static_cast<long>(e.size())) * Rational(resolved) / Rational(total);
    denominator += Rational(static_cast<long>(e.size()));
  }
}

}  // namespace

LeaTerms& LeaTerms::operator+=(const LeaTerms& other) {
  recall_numerator += other.recall_numerator;
  recall_denominator += other.recall_denominator;
  precision_numerator += other.precision_numerator;
  precision_denominator += other.precision_denominator;
  return *this;
}

LeaTerms lea_terms(const std::vector<Entity>& key, const std::vector<Entity>& response) {
  LeaTerms t;
  side_terms(key, response, t.recall_numerator, t.recall_denominator);
  side_terms(response, key, t.precision_numerator, t.precision_denominator);
  return t;
}

LeaScore lea(const ClusterFile& key, const ClusterFile& response) {
  check_same_ids(key, response);
  LeaTerms total;
  for (const auto& [id, key_entities] : key.documents) {
    const auto& response_entities = response.documents.at(id);
    check_disjoint(id, key_entities, "key");
    check_disjoint(id, response_entities, "response");
    total += lea_terms(key_entities, response_entities);
  }
  return finalize(total);
}

LeaScore lea_oracle(const ClusterFile& key, const ClusterFile& response) {
  check_same_ids(key, response);
  LeaTerms total;
  for (const auto& [id, key_entities] : key.documents) {
    const auto& response_entities = response.documents.at(id);
    check_disjoint(id, key_entities, "key");
    check_disjoint(id, response_entities, "response");
    side_terms_by_pairs(key_entities, response_entities, total.recall_numerator,
                        total.recall_denominator);
    side_terms_by_pairs(response_entities, key_entities, total.precision_numerator,
                        total.precision_denominator);
  }
  return finalize(total);
}

ClusterFile parse_cluster_json(const std::string& json_text, ClusterFile into) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed cluster JSON at byte " + std::to_string(e.byte));
  }
  const std::string id = j.at("id").get<std::string>();
  const char* field = j.contains("clusters") ? "clusters" : "entities";
  auto& entities = into.documents[id];
  entities.clear();
  if (j.contains(field)) {
    for (const auto& c : j.at(field)) {
      Entity e;
      for (const auto& m : c) e.emplace_back(m.at(0).get<int>(), m.at(1).get<int>());
      entities.push_back(std::move(e));
    }
  }
  return into;
}

ClusterFile load_cluster_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json" &&
        entry.path().filename() != "manifest.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  ClusterFile out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    out = parse_cluster_json(buf.str(), std::move(out));
  }
  return out;
}

std::string lea_to_json(const LeaScore& s) {
  json j;
  j["recall"] = s.recall_value();
  j["precision"] = s.precision_value();
  j["f1"] = s.f1_value();
  j["recall_exact"] = s.recall.str();
  j["precision_exact"] = s.precision.str();
  j["f1_exact"] = s.f1.str();
  j["warnings"] = s.warnings;
  return j.dump(2);
}

std::string lea_to_table(const LeaScore& s) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "metric  recall  precision  f1\n"
     << "LEA     " << s.recall_value() << "  " << s.precision_value() << "     " << s.f1_value()
     << '\n';
  for (const auto& w : s.warnings) os << "warning: " << w << '\n';
  return os.str();
}

}  // namespace rstcoref
