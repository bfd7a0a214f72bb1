#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "recgpt/data_model.hpp"

namespace recgpt::matcher {

template <class Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using EmbeddingVector = Vector<float>;

inline constexpr Eigen::Index kDefaultDimension = 1024;

// Text -> unit-norm dense vector. Must be deterministic and thread-safe.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  virtual Eigen::Index dimension() const = 0;
  // Throws kEmptyText on blank input.
  virtual EmbeddingVector embed(std::string_view text) const = 0;
};

// Lowercases, hashes every byte trigram into `dimension` buckets, counts and
// L2-normalizes. Inputs shorter than three bytes count as one gram.
class TrigramEmbedder final : public Embedder {
 public:
  explicit TrigramEmbedder(Eigen::Index dimension = kDefaultDimension);
  std::string id() const override;
  Eigen::Index dimension() const override { return dimension_; }
  EmbeddingVector embed(std::string_view text) const override;

 private:
  Eigen::Index dimension_;
};

struct Match {
  std::string item_id;
  double similarity = 0.0;

  bool operator==(const Match&) const = default;
};

// Immutable catalog of unit vectors, one row per item in catalog order.
template <class Scalar>
class BasicItemIndex {
 public:
  BasicItemIndex(std::vector<std::string> item_ids, RowMatrix<Scalar> matrix,
                 std::string embedder_id);

  const std::vector<std::string>& item_ids() const { return item_ids_; }
  const RowMatrix<Scalar>& matrix() const { return matrix_; }
  const std::string& embedder_id() const { return embedder_id_; }
  Eigen::Index dimension() const { return matrix_.cols(); }
  std::size_t size() const { return item_ids_.size(); }

  // Exact top-m by dot product (accumulated in double), descending, ties by
  // ascending item id.
  std::vector<Match> top(const Eigen::Ref<const Vector<Scalar>>& query, std::size_t m) const;

 private:
  std::vector<std::string> item_ids_;
  RowMatrix<Scalar> matrix_;
  std::string embedder_id_;
};

using ItemIndex = BasicItemIndex<float>;

extern template class BasicItemIndex<float>;
extern template class BasicItemIndex<double>;

using MatchText = std::function<std::string(const Item&)>;

// Throws kEmptyCatalog for an empty item list.
ItemIndex build_index(std::span<const Item> items, const Embedder& embedder,
                      const MatchText& render);

std::vector<Match> match_top(const ItemIndex& index, const Embedder& embedder,
                             std::string_view query, std::size_t m);

// Flat little-endian file: u32 dimension, u64 count, u32 id length + embedder
// id bytes, count*dimension float32 rows, then per item u32 length + id.
void save_index(const ItemIndex& index, const std::filesystem::path& path);
ItemIndex load_index(const std::filesystem::path& path);

}  // namespace recgpt::matcher
