#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace rstcoref {

using Rational = boost::multiprecision::cpp_rational;

/// Character-offset mention [start, end).
using CharMention = std::pair<int, int>;
using Entity = std::vector<CharMention>;

/// Document id -> entities.
struct ClusterFile {
  std::map<std::string, std::vector<Entity>> documents;
};

class DocumentSetMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Importance-weighted sums before division. Recall is
/// recall_numerator / recall_denominator, precision likewise.
struct LeaTerms {
  Rational recall_numerator = 0;
  Rational recall_denominator = 0;
  Rational precision_numerator = 0;
  Rational precision_denominator = 0;

  LeaTerms& operator+=(const LeaTerms& other);
};

struct LeaScore {
  LeaTerms terms;
  Rational recall = 0;
  Rational precision = 0;
  Rational f1 = 0;
  std::vector<std::string> warnings;

  double recall_value() const { return recall.convert_to<double>(); }
  double precision_value() const { return precision.convert_to<double>(); }
  double f1_value() const { return f1.convert_to<double>(); }
};

/// Closed-form LEA terms for one document; entities of size < 2 are ignored.
LeaTerms lea_terms(const std::vector<Entity>& key, const std::vector<Entity>& response);

/// Micro-aggregated LEA over all documents. Throws DocumentSetMismatch when
/// the id sets differ and std::invalid_argument when a document lists the
/// same mention in two entities.
LeaScore lea(const ClusterFile& key, const ClusterFile& response);

/// Same quantity computed by enumerating every mention pair as a link and
/// testing membership. Used as a reference implementation.
LeaScore lea_oracle(const ClusterFile& key, const ClusterFile& response);

/// Reads a directory of JSON files holding "id" plus either "entities"
/// (corpus format) or "clusters" (prediction format).
ClusterFile load_cluster_dir(const std::filesystem::path& dir);
ClusterFile parse_cluster_json(const std::string& json_text, ClusterFile into = {});

std::string lea_to_json(const LeaScore& score);
std::string lea_to_table(const LeaScore& score);

}  // namespace rstcoref
