#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gridjoin/common.hpp"

namespace gridjoin {

enum class ColumnKind { Int64, Text };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Text;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

/// Ordered columns plus the index of the join key. The key column is Int64.
class Schema {
 public:
  Schema(std::vector<ColumnSpec> columns, std::size_t key_column);

  const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }
  std::size_t size() const noexcept { return columns_.size(); }
  std::size_t key_column() const noexcept { return key_column_; }
  const std::string& key_name() const { return columns_[key_column_].name; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  friend bool operator==(const Schema&, const Schema&) = default;

 private:
  std::vector<ColumnSpec> columns_;
  std::size_t key_column_;
};

/// Row-oriented relation. Immutable after construction.
class Table {
 public:
  Table(Schema schema, std::vector<Row> rows);

  const Schema& schema() const noexcept { return schema_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }
  std::size_t cardinality() const noexcept { return rows_.size(); }
  Key key(std::size_t row) const {
    return std::get<std::int64_t>(rows_[row][schema_.key_column()]);
  }

  friend bool operator==(const Table&, const Table&) = default;

 private:
  Schema schema_;
  std::vector<Row> rows_;
};

/// Text values packed back to back; value i spans [offsets[i], offsets[i+1]).
class TextColumn {
 public:
  TextColumn() { offsets_.push_back(0); }

  void push_back(std::string_view value);
  void reserve(std::size_t rows, std::size_t bytes);
  std::size_t size() const noexcept { return offsets_.size() - 1; }
  std::string_view at(std::size_t i) const {
    return std::string_view(bytes_).substr(offsets_[i],
                                           offsets_[i + 1] - offsets_[i]);
  }
  std::size_t byte_size() const noexcept {
    return bytes_.size() + offsets_.size() * sizeof(std::uint32_t);
  }

 private:
  std::vector<std::uint32_t> offsets_;
  std::string bytes_;
};

using Int64Column = std::vector<std::int64_t>;
using Column = std::variant<Int64Column, TextColumn>;

/// Column-major, positionally aligned form of a projected table. The join
/// key lives in its own buffer; `payload_columns` holds every other schema
/// column in schema order.
struct ColumnarBlock {
  Schema schema;
  std::size_t n_rows = 0;
  std::vector<Key> key_column;
  std::vector<Column> payload_columns;

  /// Appends the schema-ordered values of row `i` to `out`.
  void append_row(std::size_t i, Row& out) const;
  /// Bytes a device copy of this block would occupy.
  std::size_t byte_size() const;
};

Table load_table(const std::filesystem::path& path, const Schema& schema);
/// Reads only the header of `path`: the key column becomes Int64, the rest Text.
Schema infer_schema(const std::filesystem::path& path,
                    std::string_view key_column);
void write_table_csv(const Table& table, const std::filesystem::path& path);

Table project(const Table& table, std::span<const std::string> keep);

ColumnarBlock to_columnar(const Table& table);
ColumnarBlock to_columnar(const Schema& schema, std::span<const Row> rows);

/// Uniform keys in [0, key_max), integer-divided by `divisor`, plus
/// `payload_width` fixed-width text columns derived from the row index.
Table gen_synthetic(std::size_t n_rows, std::int64_t key_max,
                    std::int64_t divisor, std::size_t payload_width,
                    std::uint64_t seed);

}  // namespace gridjoin
