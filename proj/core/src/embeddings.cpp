#include "ser/embeddings.h"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ser/binary_io.h"
#include "ser/error.h"
#include "ser/random.h"

namespace ser {

EmbeddingStore::EmbeddingStore(std::size_t declared_dim) : dim_(declared_dim) {
  if (dim_ == 0) throw Error("embedding dimension must be positive");
}

void EmbeddingStore::add(EmbeddingSequence seq) {
  if (seq.dim != dim_) {
    throw Error("embedding '" + seq.id + "' has width " + std::to_string(seq.dim) + ", expected " +
                std::to_string(dim_));
  }
  if (seq.steps == 0) throw Error("embedding '" + seq.id + "' is empty");
  if (seq.values.size() != seq.steps * seq.dim) throw Error("embedding '" + seq.id + "' has inconsistent size");
  const std::string id = seq.id;
  if (!seqs_.emplace(id, std::move(seq)).second) throw Error("duplicate embedding id '" + id + "'");
}

const EmbeddingSequence& EmbeddingStore::at(const std::string& id) const {
  auto it = seqs_.find(id);
  if (it == seqs_.end()) throw Error("no embedding for '" + id + "'");
  return it->second;
}

std::size_t embedding_dim_of(const std::filesystem::path& path) try {
  if (path.extension() == ".jsonl") {
    std::istringstream in(io::read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto obj = nlohmann::json::parse(line);
      const auto& rows = obj.at("vectors");
      if (rows.empty()) throw Error("embedding file '" + path.string() + "' starts with an empty sequence");
      return rows.at(0).size();
    }
    throw Error("embedding file '" + path.string() + "' is empty");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  io::MatrixRecord rec;
  if (!io::read_matrix_record(in, rec)) throw Error("embedding file '" + path.string() + "' is empty");
  return rec.cols;
} catch (const nlohmann::json::exception& e) {
  throw Error("malformed embedding file '" + path.string() + "': " + e.what());
}

EmbeddingStore load_embeddings(const std::filesystem::path& path, std::size_t expected_dim) try {
  EmbeddingStore store(expected_dim);
  if (path.extension() == ".jsonl") {
    std::istringstream in(io::read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto obj = nlohmann::json::parse(line);
      EmbeddingSequence seq;
      seq.id = obj.at("id").get<std::string>();
      const auto& rows = obj.at("vectors");
      seq.steps = rows.size();
      seq.dim = seq.steps ? rows.at(0).size() : expected_dim;
      for (const auto& row : rows) {
        if (row.size() != seq.dim) throw Error("embedding '" + seq.id + "' has ragged rows");
        for (const auto& v : row) seq.values.push_back(v.get<float>());
      }
      store.add(std::move(seq));
    }
    return store;
  }
  for (auto& rec : io::read_matrix_file(path)) {
    store.add(EmbeddingSequence{rec.id, rec.rows, rec.cols, std::move(rec.values)});
  }
  return store;
} catch (const nlohmann::json::exception& e) {
  throw Error("malformed embedding file '" + path.string() + "': " + e.what());
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingStore& store) {
  std::vector<io::MatrixRecord> records;
  records.reserve(store.size());
  for (const auto& [id, seq] : store.sequences()) {
    records.push_back({id, static_cast<std::uint32_t>(seq.steps), static_cast<std::uint32_t>(seq.dim), seq.values});
  }
  io::write_matrix_file(path, records);
}

namespace {

std::vector<double> token_vector(const std::string& token, std::size_t dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, token));
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

// Fixed random operators of the context mixer, all derived from the seed.
struct ContextMixer {
  std::size_t dim;
  std::vector<double> householder;  // unit vector v of I - 2 v v^T
  std::vector<double> additive;     // dim x dim, neighbour contribution
  std::vector<double> gate_self;    // dim x dim
  std::vector<double> gate_other;   // dim x dim

  ContextMixer(std::size_t d, std::uint64_t seed) : dim(d) {
    Rng rng(derive_seed(seed, "context-mixer"));
    householder.resize(dim);
    double norm = 0.0;
    for (auto& x : householder) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : householder) x /= norm;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    auto fill = [&](std::vector<double>& m, double s) {
      m.resize(dim * dim);
      for (auto& x : m) x = s * scale * rng.normal();
    };
    fill(additive, 0.2);
    fill(gate_self, 1.0);
    fill(gate_other, 1.0);
  }

  std::vector<double> matvec(const std::vector<double>& m, const std::vector<double>& x) const {
    std::vector<double> y(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < dim; ++j) acc += m[i * dim + j] * x[j];
      y[i] = acc;
    }
    return y;
  }

  std::vector<double> reflect(const std::vector<double>& x) const {
    double dot = 0.0;
    for (std::size_t i = 0; i < dim; ++i) dot += householder[i] * x[i];
    std::vector<double> y(x);
    for (std::size_t i = 0; i < dim; ++i) y[i] -= 2.0 * dot * householder[i];
    return y;
  }
};

EmbeddingSequence make_sequence(std::string id, std::size_t steps, std::size_t dim) {
  EmbeddingSequence seq;
  seq.id = std::move(id);
  seq.steps = steps;
  seq.dim = dim;
  seq.values.resize(steps * dim);
  return seq;
}

}  // namespace

bool is_negation_cue(const std::string& token) {
  return token == "not" || token == "no" || token == "never" || token == "n't";
}

EmbeddingSequence pseudo_static_embeddings(const std::vector<std::string>& tokens, std::size_t dim,
                                           std::uint64_t seed, std::string id) {
  if (tokens.empty()) throw Error("cannot embed an empty token list");
  if (dim == 0) throw Error("embedding dimension must be positive");
  auto seq = make_sequence(std::move(id), tokens.size(), dim);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto v = token_vector(tokens[t], dim, seed);
    for (std::size_t d = 0; d < dim; ++d) seq.values[t * dim + d] = static_cast<float>(v[d]);
  }
  return seq;
}

EmbeddingSequence pseudo_contextual_embeddings(const std::vector<std::string>& tokens, std::size_t dim,
                                               std::uint64_t seed, std::string id) {
  if (tokens.empty()) throw Error("cannot embed an empty token list");
  if (dim == 0) throw Error("embedding dimension must be positive");
  const ContextMixer mixer(dim, seed);
  const std::size_t n = tokens.size();

  std::vector<std::vector<double>> stat(n), gate_self(n), gate_other(n), add(n);
  for (std::size_t t = 0; t < n; ++t) {
    stat[t] = token_vector(tokens[t], dim, seed);
    gate_self[t] = mixer.matvec(mixer.gate_self, stat[t]);
    gate_other[t] = mixer.matvec(mixer.gate_other, stat[t]);
    add[t] = mixer.matvec(mixer.additive, stat[t]);
    for (auto& x : gate_self[t]) x = std::tanh(x);
    for (auto& x : gate_other[t]) x = std::tanh(x);
  }

  const double gate_scale = 0.3 / std::sqrt(static_cast<double>(dim));
  auto seq = make_sequence(std::move(id), n, dim);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> out = mixer.reflect(stat[t]);
    std::vector<double> context(dim, 0.0);
    bool negated = false;
    for (std::size_t k = 1; k <= kContextRadius; ++k) {
      const double w = 1.0 / static_cast<double>(k);
      for (std::size_t j : {t - k, t + k}) {
        if (j >= n) continue;  // also catches t - k underflow
        negated = negated || is_negation_cue(tokens[j]);
        for (std::size_t d = 0; d < dim; ++d) {
          context[d] += w * (add[j][d] + gate_scale * gate_self[t][d] * gate_other[j][d]);
        }
      }
    }
    const double polarity = negated ? -1.0 : 1.0;
    for (std::size_t d = 0; d < dim; ++d) out[d] = polarity * out[d] + context[d];
    for (std::size_t d = 0; d < dim; ++d) seq.values[t * dim + d] = static_cast<float>(out[d]);
  }
  return seq;
}

}  // namespace ser
