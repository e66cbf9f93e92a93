#include "artbp/corpus.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

namespace artbp {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read corpus file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty()) throw CorpusError("corpus file " + path.string() + " is empty");
  return bytes;
}

void lower_in_place(std::string& s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

std::vector<unsigned char> vocabulary_of(std::string_view text) {
  std::array<bool, 256> seen{};
  for (char c : text) seen[static_cast<unsigned char>(c)] = true;
  std::vector<unsigned char> vocab;
  for (std::size_t b = 0; b < seen.size(); ++b) {
    if (seen[b]) vocab.push_back(static_cast<unsigned char>(b));
  }
  if (vocab.size() < 2) {
    throw CorpusError("training text needs at least two distinct characters");
  }
  return vocab;
}

CharCorpus build(std::string_view train, std::string_view valid, std::string_view test) {
  if (train.empty()) throw CorpusError("training split is empty");
  CharCorpus c;
  c.vocabulary = vocabulary_of(train);
  c.train = c.encode(train);
  c.valid = c.encode(valid);
  c.test = c.encode(test);
  return c;
}

CharCorpus split_and_build(std::string text, bool lowercase, SplitRatios r) {
  if (text.empty()) throw CorpusError("corpus is empty");
  if (!(r.train > 0.0) || r.valid < 0.0 || r.test < 0.0) {
    throw CorpusError("split ratios must be non-negative with a positive training share");
  }
  if (lowercase) lower_in_place(text);
  const double total = r.train + r.valid + r.test;
  const auto n = static_cast<double>(text.size());
  const auto n_train = static_cast<std::size_t>(std::floor(n * r.train / total));
  const auto n_valid = static_cast<std::size_t>(std::floor(n * r.valid / total));
  const std::string_view all(text);
  return build(all.substr(0, n_train), all.substr(n_train, n_valid),
               all.substr(n_train + n_valid));
}

}  // namespace

TokenSequence CharCorpus::encode(std::string_view text) const {
  std::array<std::uint32_t, 256> ids;
  ids.fill(unk_id());
  for (std::size_t k = 0; k < vocabulary.size(); ++k) {
    ids[vocabulary[k]] = static_cast<std::uint32_t>(k);
  }
  TokenSequence out;
  out.reserve(text.size());
  for (char ch : text) out.push_back(ids[static_cast<unsigned char>(ch)]);
  return out;
}

std::string CharCorpus::decode(const TokenSequence& tokens) const {
  unsigned char unk_byte = 0;
  while (std::binary_search(vocabulary.begin(), vocabulary.end(), unk_byte) && unk_byte < 255) {
    ++unk_byte;
  }
  std::string out;
  out.reserve(tokens.size());
  for (std::uint32_t id : tokens) {
    out.push_back(static_cast<char>(id < vocabulary.size() ? vocabulary[id] : unk_byte));
  }
  return out;
}

CharCorpus ingest(const std::filesystem::path& path, bool lowercase, SplitRatios ratios) {
  std::string text = read_file(path);
  const std::string hash = sha256_hex(text);
  CharCorpus c = split_and_build(std::move(text), lowercase, ratios);
  c.source_hashes = {hash};
  return c;
}

CharCorpus ingest_splits(const std::filesystem::path& train, const std::filesystem::path& valid,
                         const std::filesystem::path& test, bool lowercase) {
  std::array<std::string, 3> parts{read_file(train), read_file(valid), read_file(test)};
  std::vector<std::string> hashes;
  for (auto& p : parts) {
    hashes.push_back(sha256_hex(p));
    if (lowercase) lower_in_place(p);
  }
  CharCorpus c = build(parts[0], parts[1], parts[2]);
  c.source_hashes = std::move(hashes);
  return c;
}

CharCorpus corpus_from_text(std::string_view text, bool lowercase, SplitRatios ratios) {
  return split_and_build(std::string(text), lowercase, ratios);
}

std::vector<Observation> next_char_observations(const TokenSequence& tokens) {
  std::vector<Observation> obs;
  if (tokens.size() < 2) return obs;
  obs.reserve(tokens.size() - 1);
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    obs.push_back({Token{tokens[t]}, Token{tokens[t + 1]}});
  }
  return obs;
}

std::vector<TokenSequence> make_lanes(const TokenSequence& tokens, std::size_t lanes) {
  if (lanes == 0) throw std::invalid_argument("need at least one lane");
  if (tokens.size() < lanes) {
    throw std::invalid_argument("cannot split " + std::to_string(tokens.size()) +
                                " tokens into " + std::to_string(lanes) + " lanes");
  }
  const std::size_t width = tokens.size() / lanes;
  std::vector<TokenSequence> out;
  out.reserve(lanes);
  for (std::size_t l = 0; l < lanes; ++l) {
    const auto first = tokens.begin() + static_cast<std::ptrdiff_t>(l * width);
    out.emplace_back(first, first + static_cast<std::ptrdiff_t>(width));
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream os;
  os << std::hex;
  for (unsigned int i = 0; i < len; ++i) {
    os.width(2);
    os.fill('0');
    os << static_cast<int>(digest[i]);
  }
  return os.str();
}

}  // namespace artbp
