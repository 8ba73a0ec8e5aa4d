#include "rstcoref/encoder.hpp"

#include <cctype>
#include <cmath>
#include <cstring>

#include "binary_io.hpp"

namespace rstcoref {

void EmbeddingStore::add(StoreEntry entry) {
  auto it = index_.find(entry.id);
  if (it != index_.end()) {
    entries_[it->second] = std::move(entry);
    return;
  }
  index_[entry.id] = entries_.size();
  entries_.push_back(std::move(entry));
}

const StoreEntry* EmbeddingStore::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

void write_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  detail::Writer w;
  w.bytes(EmbeddingStore::kMagic, 4);
  w.u32(EmbeddingStore::kVersion);
  w.u32(static_cast<std::uint32_t>(store.d_lm()));
  for (const StoreEntry& e : store.entries()) {
    w.str(e.id);
    w.u32(static_cast<std::uint32_t>(e.paragraphs.size()));
    for (const EmbeddedParagraph& p : e.paragraphs) {
      if (p.vectors.cols() != store.d_lm() || p.vectors.rows() != static_cast<Eigen::Index>(p.alignment.size())) {
        throw StoreFormatError("paragraph of " + e.id + " has inconsistent shape");
      }
      w.u32(static_cast<std::uint32_t>(p.alignment.size()));
      for (std::int32_t a : p.alignment) w.i32(a);
      w.bytes(p.vectors.data(), static_cast<std::size_t>(p.vectors.size()) * sizeof(float));
    }
  }
  detail::write_file_atomic(path.string(), w.buffer());
}

EmbeddingStore read_store(const std::filesystem::path& path) {
  const auto data = detail::read_file(path.string());
  detail::Reader<StoreFormatError> r(data.data(), data.size());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, EmbeddingStore::kMagic, 4) != 0) throw StoreFormatError("bad magic, not an embedding store");
  const std::uint32_t version = r.u32();
  if (version != EmbeddingStore::kVersion) {
    throw StoreFormatError("unsupported embedding store version " + std::to_string(version));
  }
  const std::uint32_t d_lm = r.u32();
  if (d_lm == 0) throw StoreFormatError("d_lm is zero");
  EmbeddingStore store(static_cast<int>(d_lm));
  while (!r.done()) {
    StoreEntry e;
    e.id = r.str();
    const std::uint32_t n_par = r.u32();
    for (std::uint32_t p = 0; p < n_par; ++p) {
      EmbeddedParagraph para;
      const std::uint32_t n_sub = r.u32();
      if (static_cast<std::uint64_t>(n_sub) * (4 + 4ull * d_lm) > r.remaining()) {
        throw StoreFormatError("truncated paragraph in " + e.id);
      }
      para.alignment.resize(n_sub);
      for (auto& a : para.alignment) a = r.i32();
      para.vectors.resize(n_sub, d_lm);
      r.bytes(para.vectors.data(), static_cast<std::size_t>(n_sub) * d_lm * sizeof(float));
      e.paragraphs.push_back(std::move(para));
    }
    store.add(std::move(e));
  }
  return store;
}

StoreCheckReport check_store(const EmbeddingStore& store, const std::vector<Document>* docs) {
  StoreCheckReport report;
  for (const StoreEntry& e : store.entries()) {
    ++report.documents;
    for (std::size_t p = 0; p < e.paragraphs.size(); ++p) {
      const auto& para = e.paragraphs[p];
      ++report.paragraphs;
      report.subtokens += static_cast<long>(para.alignment.size());
      if (!para.vectors.allFinite()) {
        report.errors.push_back(e.id + " paragraph " + std::to_string(p) + ": non-finite values");
      }
      for (std::int32_t a : para.alignment) {
        if (a < -1) {
          report.errors.push_back(e.id + " paragraph " + std::to_string(p) + ": alignment index " +
                                  std::to_string(a) + " below -1");
          break;
        }
      }
    }
  }
  if (docs) {
    for (const Document& doc : *docs) {
      const StoreEntry* e = store.find(doc.id);
      if (!e) {
        report.errors.push_back(doc.id + ": missing from store");
        continue;
      }
      if (e->paragraphs.size() != doc.paragraphs.size()) {
        report.errors.push_back(doc.id + ": " + std::to_string(e->paragraphs.size()) +
                                " paragraphs in store, " + std::to_string(doc.paragraphs.size()) +
                                " in document");
      }
      std::vector<int> hits(static_cast<std::size_t>(doc.n_tokens()), 0);
      const bool same_shape = e->paragraphs.size() == doc.paragraphs.size();
      for (std::size_t p = 0; p < e->paragraphs.size(); ++p) {
        for (std::int32_t a : e->paragraphs[p].alignment) {
          if (a >= doc.n_tokens()) {
            report.errors.push_back(doc.id + ": alignment index " + std::to_string(a) + " out of range");
            break;
          }
          if (a < 0) continue;
          if (same_shape && (a < doc.paragraphs[p].first_token || a > doc.paragraphs[p].last_token)) {
            report.errors.push_back(doc.id + " paragraph " + std::to_string(p) + ": token " + std::to_string(a) +
                                    " lies outside the paragraph");
            break;
          }
          ++hits[static_cast<std::size_t>(a)];
        }
      }
      for (int t = 0; t < doc.n_tokens(); ++t) {
        if (hits[static_cast<std::size_t>(t)] == 0) {
          report.errors.push_back(doc.id + ": token " + std::to_string(t) + " has no subtoken");
          break;
        }
      }
    }
  }
  return report;
}

FloatMatrix average_subtokens(const StoreEntry& entry, const Document& doc, int d_lm) {
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(doc.n_tokens(), d_lm);
  std::vector<int> counts(static_cast<std::size_t>(doc.n_tokens()), 0);
  for (const auto& para : entry.paragraphs) {
    if (para.vectors.cols() != d_lm) throw StoreFormatError(entry.id + ": embedding width mismatch");
    for (std::size_t s = 0; s < para.alignment.size(); ++s) {
      const int t = para.alignment[s];
      if (t < 0) continue;
      if (t >= doc.n_tokens()) throw AlignmentError(entry.id + ": subtoken aligned past the last token");
      sums.row(t) += para.vectors.row(static_cast<Eigen::Index>(s)).cast<double>();
      ++counts[static_cast<std::size_t>(t)];
    }
  }
  FloatMatrix out(doc.n_tokens(), d_lm);
  for (int t = 0; t < doc.n_tokens(); ++t) {
    if (counts[static_cast<std::size_t>(t)] == 0) {
      throw AlignmentError(entry.id + ": token " + std::to_string(t) + " has no aligned subtoken");
    }
    out.row(t) = (sums.row(t) / counts[static_cast<std::size_t>(t)]).cast<float>();
  }
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

StoreEntry synthetic_embeddings(const Document& doc, int d_lm, std::uint64_t seed) {
  if (d_lm < 8) throw ConfigError("synthetic embeddings need d_lm >= 8");
  StoreEntry entry;
  entry.id = doc.id;
  std::uint64_t seed_state = seed;
  const std::uint64_t seed_mix = splitmix64(seed_state);
  std::map<std::string, Eigen::RowVectorXf> cache;
  for (const auto& p : doc.paragraphs) {
    EmbeddedParagraph para;
    const int n = p.last_token - p.first_token + 1;
    para.vectors.resize(n, d_lm);
    for (int t = p.first_token; t <= p.last_token; ++t) {
      std::string key = doc.tokens[static_cast<std::size_t>(t)].text;
      for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      auto it = cache.find(key);
      if (it == cache.end()) {
        std::uint64_t state = fnv1a(key) ^ seed_mix;
        Eigen::VectorXd v(d_lm);
        for (int k = 0; k < d_lm; ++k) {
          v(k) = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 * 2.0 - 1.0;
        }
        v.normalize();
        it = cache.emplace(key, v.transpose().cast<float>()).first;
      }
      para.alignment.push_back(t);
      para.vectors.row(t - p.first_token) = it->second;
    }
    entry.paragraphs.push_back(std::move(para));
  }
  return entry;
}

// ---------------------------------------------------------------------------

std::vector<ad::Parameter*> EncoderParams::all() {
  return {&fw_input, &fw_hidden, &fw_bias, &bw_input, &bw_hidden, &bw_bias, &attention};
}

EncoderParams init_encoder(int d_lm, int d_c, std::mt19937_64& rng) {
  if (d_c < 2 || d_c % 2 != 0) throw ConfigError("d_c must be a positive even number");
  const int h = d_c / 2;
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  std::uniform_real_distribution<double> u(-bound, bound);
  auto rand = [&](int r, int c) {
    ad::Matrix m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
    return m;
  };
  auto bias = [&] {
    ad::Matrix b = rand(1, 4 * h);
    b.middleCols(h, h).array() += 1.0;  // forget gate
    return b;
  };
  EncoderParams p;
  p.fw_input = {"encoder.fw.input", rand(d_lm, 4 * h)};
  p.fw_hidden = {"encoder.fw.hidden", rand(h, 4 * h)};
  p.fw_bias = {"encoder.fw.bias", bias()};
  p.bw_input = {"encoder.bw.input", rand(d_lm, 4 * h)};
  p.bw_hidden = {"encoder.bw.hidden", rand(h, 4 * h)};
  p.bw_bias = {"encoder.bw.bias", bias()};
  p.attention = {"encoder.attention", rand(d_c, 1)};
  return p;
}

EncoderVars bind_encoder(ad::Tape& tape, EncoderParams& p, bool trainable) {
  if (!trainable) return bind_encoder(tape, static_cast<const EncoderParams&>(p));
  return {tape.parameter(p.fw_input), tape.parameter(p.fw_hidden), tape.parameter(p.fw_bias),
          tape.parameter(p.bw_input), tape.parameter(p.bw_hidden), tape.parameter(p.bw_bias),
          tape.parameter(p.attention)};
}

EncoderVars bind_encoder(ad::Tape& tape, const EncoderParams& p) {
  return {tape.constant(p.fw_input.value), tape.constant(p.fw_hidden.value),
          tape.constant(p.fw_bias.value),  tape.constant(p.bw_input.value),
          tape.constant(p.bw_hidden.value), tape.constant(p.bw_bias.value),
          tape.constant(p.attention.value)};
}

namespace {

std::vector<ad::Var> lstm_direction(ad::Var inputs, ad::Var w_in, ad::Var w_hidden, ad::Var bias,
                                    bool reverse) {
  ad::Tape& tape = *inputs.tape();
  const Eigen::Index h = w_hidden.rows();
  const auto n = static_cast<int>(inputs.rows());
  const ad::Var projected = ad::add_row(ad::matmul(inputs, w_in), bias);
  ad::Var hidden = tape.constant(ad::Matrix::Zero(1, h));
  ad::Var cell = tape.constant(ad::Matrix::Zero(1, h));
  std::vector<ad::Var> outputs(static_cast<std::size_t>(n));
  for (int step = 0; step < n; ++step) {
    const int t = reverse ? n - 1 - step : step;
    const ad::Var z = ad::add(ad::slice_rows(projected, t, 1), ad::matmul(hidden, w_hidden));
    const ad::Var in_gate = ad::sigmoid(ad::slice_cols(z, 0, h));
    const ad::Var forget_gate = ad::sigmoid(ad::slice_cols(z, h, h));
    const ad::Var candidate = ad::tanh(ad::slice_cols(z, 2 * h, h));
    const ad::Var out_gate = ad::sigmoid(ad::slice_cols(z, 3 * h, h));
    cell = ad::add(ad::hadamard(forget_gate, cell), ad::hadamard(in_gate, candidate));
    hidden = ad::hadamard(out_gate, ad::tanh(cell));
    outputs[static_cast<std::size_t>(t)] = hidden;
  }
  return outputs;
}

}  // namespace

ad::Var compress(const EncoderVars& vars, ad::Var tokens, const std::vector<ParagraphBounds>& paragraphs) {
  std::vector<ad::Var> blocks;
  for (const ParagraphBounds& p : paragraphs) {
    const ad::Var x = ad::slice_rows(tokens, p.first_token, p.last_token - p.first_token + 1);
    const auto fw = lstm_direction(x, vars.fw_input, vars.fw_hidden, vars.fw_bias, false);
    const auto bw = lstm_direction(x, vars.bw_input, vars.bw_hidden, vars.bw_bias, true);
    blocks.push_back(ad::concat_cols({ad::concat_rows(fw), ad::concat_rows(bw)}));
  }
  if (blocks.empty()) return tokens.tape()->constant(ad::Matrix::Zero(0, 2 * vars.fw_hidden.rows()));
  const ad::Var out = blocks.size() == 1 ? blocks.front() : ad::concat_rows(blocks);
  ad::check_finite(out.value(), "compressor output");
  return out;
}

ad::Var span_representations(const EncoderVars& vars, ad::Var compressed,
                             const std::vector<MentionSpan>& spans) {
  std::vector<ad::SpanRange> ranges;
  ranges.reserve(spans.size());
  for (const auto& s : spans) ranges.push_back({s.start, s.end});
  const ad::Var logits = ad::matmul(compressed, vars.attention);
  return ad::span_attention(compressed, logits, ranges);
}

}  // namespace rstcoref
