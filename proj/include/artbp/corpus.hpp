#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "artbp/core.hpp"

namespace artbp {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using TokenSequence = std::vector<std::uint32_t>;

/// Byte-level character corpus. The vocabulary is the sorted set of distinct
/// bytes of the training split; bytes unseen in training map to unk_id(),
/// one past the last vocabulary id.
struct CharCorpus {
  std::vector<unsigned char> vocabulary;
  TokenSequence train, valid, test;
  /// SHA-256 (hex) of each source file, in the order they were read.
  std::vector<std::string> source_hashes;

  std::uint32_t unk_id() const noexcept { return static_cast<std::uint32_t>(vocabulary.size()); }
  /// Output size a model needs: the vocabulary plus the unknown symbol.
  std::size_t model_vocab() const noexcept { return vocabulary.size() + 1; }

  TokenSequence encode(std::string_view text) const;
  /// The unknown id decodes to the smallest byte outside the vocabulary, so
  /// re-encoding a decoded split reproduces it.
  std::string decode(const TokenSequence& tokens) const;
};

/// Relative sizes of train / valid / test. Split sizes are
/// floor(N * w_train / W), floor(N * w_valid / W) and the remainder.
struct SplitRatios {
  double train = 0.9;
  double valid = 0.05;
  double test = 0.05;
};

/// One file split by ratios. Throws CorpusError on an unreadable or empty
/// file, an empty training split, or a single-symbol vocabulary.
CharCorpus ingest(const std::filesystem::path& path, bool lowercase,
                  SplitRatios ratios = {});

/// Three pre-split files.
CharCorpus ingest_splits(const std::filesystem::path& train, const std::filesystem::path& valid,
                         const std::filesystem::path& test, bool lowercase);

/// Builds a corpus from in-memory text (same rules as ingest, no hashes).
CharCorpus corpus_from_text(std::string_view text, bool lowercase, SplitRatios ratios = {});

/// Next-character prediction: input token t, target token t + 1; the last
/// position has no target and is dropped.
std::vector<Observation> next_char_observations(const TokenSequence& tokens);

/// B contiguous, order-preserving lanes of floor(N / B) tokens each; the
/// tail that does not fill a lane is dropped.
std::vector<TokenSequence> make_lanes(const TokenSequence& tokens, std::size_t lanes);

std::string sha256_hex(std::string_view bytes);

}  // namespace artbp
