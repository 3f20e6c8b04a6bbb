#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ser {

/// One utterance's word vectors, row-major steps x dim.
struct EmbeddingSequence {
  std::string id;
  std::size_t steps = 0;
  std::size_t dim = 0;
  std::vector<float> values;

  const float* row(std::size_t t) const { return values.data() + t * dim; }
};

class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t declared_dim);

  std::size_t declared_dim() const { return dim_; }
  std::size_t size() const { return seqs_.size(); }
  /// Throws ser::Error on width mismatch, empty sequence, or duplicate id.
  void add(EmbeddingSequence seq);
  const EmbeddingSequence& at(const std::string& id) const;
  bool contains(const std::string& id) const { return seqs_.count(id) != 0; }
  const std::map<std::string, EmbeddingSequence>& sequences() const { return seqs_; }

 private:
  std::size_t dim_;
  std::map<std::string, EmbeddingSequence> seqs_;
};

/// Binary matrix records, or one JSON object per line ({"id", "vectors"})
/// when the file extension is .jsonl.
EmbeddingStore load_embeddings(const std::filesystem::path& path, std::size_t expected_dim);
/// Width of the first sequence in an embedding file.
std::size_t embedding_dim_of(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const EmbeddingStore& store);

/// Context-free stand-in for static word vectors: each token maps to a
/// hash-seeded unit vector.
EmbeddingSequence pseudo_static_embeddings(const std::vector<std::string>& tokens, std::size_t dim,
                                           std::uint64_t seed, std::string id = {});

/// Context-dependent stand-in: each output row is a fixed function of the
/// static vectors within two positions on either side. With no neighbours
/// it reduces to a Householder reflection of the static vector. A negation
/// cue inside the window inverts the polarity of the token's own term.
EmbeddingSequence pseudo_contextual_embeddings(const std::vector<std::string>& tokens, std::size_t dim,
                                               std::uint64_t seed, std::string id = {});

/// Context radius used by pseudo_contextual_embeddings.
inline constexpr std::size_t kContextRadius = 2;

/// Tokens treated as negation cues by the contextual stand-in.
bool is_negation_cue(const std::string& token);

}  // namespace ser
