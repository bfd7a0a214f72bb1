#include "recgpt/matcher.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <numeric>

#include "recgpt/error.hpp"
#include "recgpt/hashing.hpp"

namespace recgpt::matcher {

namespace {

static_assert(std::endian::native == std::endian::little, "index files are little-endian");

template <class T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <class T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw Error(ErrorCode::kIo, "truncated index file");
  return value;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto size = read_pod<std::uint32_t>(in);
  std::string s(size, '\0');
  in.read(s.data(), size);
  if (!in) throw Error(ErrorCode::kIo, "truncated index file");
  return s;
}

}  // namespace

TrigramEmbedder::TrigramEmbedder(Eigen::Index dimension) : dimension_(dimension) {
  if (dimension_ <= 0) throw Error(ErrorCode::kInvalidParams, "embedding dimension must be positive");
}

std::string TrigramEmbedder::id() const { return "trigram-hash-" + std::to_string(dimension_); }

EmbeddingVector TrigramEmbedder::embed(std::string_view text) const {
  std::string lowered = trim(text);
  if (lowered.empty()) throw Error(ErrorCode::kEmptyText, "cannot embed blank text");
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

  Vector<double> counts = Vector<double>::Zero(dimension_);
  const auto bucket = [this](std::string_view gram) {
    return static_cast<Eigen::Index>(stable_hash64(gram) % static_cast<std::uint64_t>(dimension_));
  };
  if (lowered.size() < 3) {
    counts[bucket(lowered)] += 1.0;
  } else {
    for (std::size_t i = 0; i + 3 <= lowered.size(); ++i) {
      counts[bucket(std::string_view(lowered).substr(i, 3))] += 1.0;
    }
  }
  return (counts / counts.norm()).cast<float>();
}

template <class Scalar>
BasicItemIndex<Scalar>::BasicItemIndex(std::vector<std::string> item_ids,
                                       RowMatrix<Scalar> matrix, std::string embedder_id)
    : item_ids_(std::move(item_ids)), matrix_(std::move(matrix)),
      embedder_id_(std::move(embedder_id)) {
  if (static_cast<Eigen::Index>(item_ids_.size()) != matrix_.rows()) {
    throw Error(ErrorCode::kInvalidParams, "index row count does not match item ids");
  }
}

template <class Scalar>
std::vector<Match> BasicItemIndex<Scalar>::top(const Eigen::Ref<const Vector<Scalar>>& query,
                                               std::size_t m) const {
  if (m == 0) throw Error(ErrorCode::kInvalidParams, "m must be at least 1");
  if (query.size() != matrix_.cols()) {
    throw Error(ErrorCode::kInvalidParams, "query dimension does not match index");
  }
  const Vector<double> q = query.template cast<double>();
  std::vector<double> scores(item_ids_.size());
  for (Eigen::Index r = 0; r < matrix_.rows(); ++r) {
    scores[r] = matrix_.row(r).template cast<double>().dot(q.transpose());
  }

  std::vector<std::size_t> order(item_ids_.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t keep = std::min(m, order.size());
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return item_ids_[a] < item_ids_[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    better);

  std::vector<Match> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back({item_ids_[order[i]], scores[order[i]]});
  return out;
}

template class BasicItemIndex<float>;
template class BasicItemIndex<double>;

ItemIndex build_index(std::span<const Item> items, const Embedder& embedder,
                      const MatchText& render) {
  if (items.empty()) throw Error(ErrorCode::kEmptyCatalog, "no items to index");
  RowMatrix<float> matrix(static_cast<Eigen::Index>(items.size()), embedder.dimension());
  std::vector<std::string> ids;
  ids.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    matrix.row(static_cast<Eigen::Index>(i)) = embedder.embed(render(items[i])).transpose();
    ids.push_back(items[i].item_id);
  }
  return ItemIndex(std::move(ids), std::move(matrix), embedder.id());
}

std::vector<Match> match_top(const ItemIndex& index, const Embedder& embedder,
                             std::string_view query, std::size_t m) {
  if (embedder.id() != index.embedder_id()) {
    throw Error(ErrorCode::kInvalidParams,
                "index built with " + index.embedder_id() + ", queried with " + embedder.id());
  }
  return index.top(embedder.embed(query), m);
}

void save_index(const ItemIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_pod(out, static_cast<std::uint32_t>(index.dimension()));
  write_pod(out, static_cast<std::uint64_t>(index.size()));
  write_string(out, index.embedder_id());
  out.write(reinterpret_cast<const char*>(index.matrix().data()),
            static_cast<std::streamsize>(index.matrix().size() * sizeof(float)));
  for (const auto& id : index.item_ids()) write_string(out, id);
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

ItemIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  const auto dimension = read_pod<std::uint32_t>(in);
  const auto count = read_pod<std::uint64_t>(in);
  std::string embedder_id = read_string(in);
  RowMatrix<float> matrix(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dimension));
  in.read(reinterpret_cast<char*>(matrix.data()),
          static_cast<std::streamsize>(matrix.size() * sizeof(float)));
  if (!in) throw Error(ErrorCode::kIo, "truncated index file");
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) ids.push_back(read_string(in));
  return ItemIndex(std::move(ids), std::move(matrix), std::move(embedder_id));
}

}  // namespace recgpt::matcher
