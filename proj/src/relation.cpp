#include "gridjoin/relation.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_set>

namespace gridjoin {

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::optional<std::int64_t> parse_int64(std::string_view text) {
  std::int64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) return std::nullopt;
  return value;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool kind_matches(const Value& v, ColumnKind kind) {
  return kind == ColumnKind::Int64 ? std::holds_alternative<std::int64_t>(v)
                                   : std::holds_alternative<std::string>(v);
}

}  // namespace

Schema::Schema(std::vector<ColumnSpec> columns, std::size_t key_column)
    : columns_(std::move(columns)), key_column_(key_column) {
  std::unordered_set<std::string> seen;
  for (const auto& c : columns_) {
    if (c.name.empty())
      throw Error(ErrorCode::InvalidSchema, "empty column name");
    if (!seen.insert(c.name).second)
      throw Error(ErrorCode::InvalidSchema, "duplicate column '" + c.name + "'");
  }
  if (key_column_ >= columns_.size())
    throw Error(ErrorCode::InvalidSchema, "key column index out of range");
  if (columns_[key_column_].kind != ColumnKind::Int64)
    throw Error(ErrorCode::InvalidSchema, "key column must be Int64");
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == name) return i;
  return std::nullopt;
}

Table::Table(Schema schema, std::vector<Row> rows)
    : schema_(std::move(schema)), rows_(std::move(rows)) {
  const auto& cols = schema_.columns();
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    if (rows_[r].size() != cols.size())
      throw Error(ErrorCode::InvalidTable, "row arity mismatch",
                  static_cast<std::int64_t>(r));
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (!kind_matches(rows_[r][c], cols[c].kind))
        throw Error(ErrorCode::InvalidTable,
                    "value kind mismatch in column '" + cols[c].name + "'",
                    static_cast<std::int64_t>(r));
  }
}

void TextColumn::push_back(std::string_view value) {
  bytes_.append(value);
  offsets_.push_back(static_cast<std::uint32_t>(bytes_.size()));
}

void TextColumn::reserve(std::size_t rows, std::size_t bytes) {
  offsets_.reserve(rows + 1);
  bytes_.reserve(bytes);
}

void ColumnarBlock::append_row(std::size_t i, Row& out) const {
  std::size_t payload = 0;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (c == schema.key_column()) {
      out.emplace_back(key_column[i]);
      continue;
    }
    std::visit(
        [&](const auto& col) {
          using T = std::decay_t<decltype(col)>;
          if constexpr (std::is_same_v<T, Int64Column>)
            out.emplace_back(col[i]);
          else
            out.emplace_back(std::string(col.at(i)));
        },
        payload_columns[payload++]);
  }
}

std::size_t ColumnarBlock::byte_size() const {
  std::size_t bytes = key_column.size() * sizeof(Key);
  for (const auto& col : payload_columns) {
    bytes += std::visit(
        [](const auto& c) -> std::size_t {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, Int64Column>)
            return c.size() * sizeof(std::int64_t);
          else
            return c.byte_size();
        },
        col);
  }
  return bytes;
}

Table load_table(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::MalformedRow, "missing header in " + path.string(),
                1);
  strip_cr(line);
  const auto header = split_csv_line(line);

  // source position of each schema column
  std::vector<std::size_t> source;
  for (const auto& col : schema.columns()) {
    std::optional<std::size_t> found;
    for (std::size_t h = 0; h < header.size(); ++h)
      if (header[h] == col.name) found = h;
    if (!found)
      throw Error(ErrorCode::MissingColumn,
                  "column '" + col.name + "' not in header of " +
                      path.string());
    source.push_back(*found);
  }

  std::vector<Row> rows;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw Error(ErrorCode::MalformedRow,
                  "expected " + std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()),
                  line_no);
    Row row;
    row.reserve(schema.size());
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto cell = cells[source[c]];
      if (schema.columns()[c].kind == ColumnKind::Int64) {
        const auto v = parse_int64(cell);
        if (!v)
          throw Error(ErrorCode::MalformedRow,
                      "non-integer value '" + std::string(cell) +
                          "' in column '" + schema.columns()[c].name + "'",
                      line_no);
        row.emplace_back(*v);
      } else {
        row.emplace_back(std::string(cell));
      }
    }
    rows.push_back(std::move(row));
  }
  return Table(schema, std::move(rows));
}

Schema infer_schema(const std::filesystem::path& path,
                    std::string_view key_column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::MalformedRow, "missing header in " + path.string(),
                1);
  strip_cr(line);
  std::vector<ColumnSpec> cols;
  std::optional<std::size_t> key;
  for (auto name : split_csv_line(line)) {
    const bool is_key = name == key_column;
    if (is_key) key = cols.size();
    cols.push_back({std::string(name),
                    is_key ? ColumnKind::Int64 : ColumnKind::Text});
  }
  if (!key)
    throw Error(ErrorCode::MissingColumn,
                "key column '" + std::string(key_column) + "' not in header of " +
                    path.string());
  return Schema(std::move(cols), *key);
}

void write_table_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  const auto& cols = table.schema().columns();
  for (std::size_t c = 0; c < cols.size(); ++c)
    out << (c ? "," : "") << cols[c].name;
  out << '\n';
  for (const auto& row : table.rows()) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      if (const auto* i = std::get_if<std::int64_t>(&row[c])) {
        out << *i;
      } else {
        const auto& s = std::get<std::string>(row[c]);
        if (s.find(',') != std::string::npos || s.find('\n') != std::string::npos)
          throw Error(ErrorCode::MalformedRow, "cell contains a separator");
        out << s;
      }
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

Table project(const Table& table, std::span<const std::string> keep) {
  const auto& schema = table.schema();
  std::vector<bool> kept(schema.size(), false);
  for (const auto& name : keep) {
    const auto idx = schema.index_of(name);
    if (!idx)
      throw Error(ErrorCode::UnknownColumn, "unknown column '" + name + "'");
    kept[*idx] = true;
  }
  if (!kept[schema.key_column()])
    throw Error(ErrorCode::KeyDropped,
                "projection drops join key '" + schema.key_name() + "'");

  std::vector<ColumnSpec> cols;
  std::vector<std::size_t> source;
  std::size_t new_key = 0;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (!kept[c]) continue;
    if (c == schema.key_column()) new_key = cols.size();
    cols.push_back(schema.columns()[c]);
    source.push_back(c);
  }

  std::vector<Row> rows;
  rows.reserve(table.cardinality());
  for (const auto& row : table.rows()) {
    Row out;
    out.reserve(source.size());
    for (auto c : source) out.push_back(row[c]);
    rows.push_back(std::move(out));
  }
  return Table(Schema(std::move(cols), new_key), std::move(rows));
}

ColumnarBlock to_columnar(const Schema& schema, std::span<const Row> rows) {
  ColumnarBlock block{schema, rows.size(), {}, {}};
  block.key_column.reserve(rows.size());
  for (const auto& row : rows)
    block.key_column.push_back(std::get<std::int64_t>(row[schema.key_column()]));

  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (c == schema.key_column()) continue;
    if (schema.columns()[c].kind == ColumnKind::Int64) {
      Int64Column col;
      col.reserve(rows.size());
      for (const auto& row : rows) col.push_back(std::get<std::int64_t>(row[c]));
      block.payload_columns.emplace_back(std::move(col));
    } else {
      std::size_t bytes = 0;
      for (const auto& row : rows) bytes += std::get<std::string>(row[c]).size();
      TextColumn col;
      col.reserve(rows.size(), bytes);
      for (const auto& row : rows) col.push_back(std::get<std::string>(row[c]));
      block.payload_columns.emplace_back(std::move(col));
    }
  }
  return block;
}

ColumnarBlock to_columnar(const Table& table) {
  return to_columnar(table.schema(), table.rows());
}

Table gen_synthetic(std::size_t n_rows, std::int64_t key_max,
                    std::int64_t divisor, std::size_t payload_width,
                    std::uint64_t seed) {
  if (key_max < 1 || divisor < 1)
    throw Error(ErrorCode::InvalidConfig, "key_max and divisor must be >= 1");

  std::vector<ColumnSpec> cols{{"key", ColumnKind::Int64}};
  for (std::size_t w = 0; w < payload_width; ++w)
    cols.push_back({"p" + std::to_string(w), ColumnKind::Text});

  // mt19937_64 output is fixed by the standard; distributions are not, so
  // keys are reduced by plain modulo.
  std::mt19937_64 rng(seed);
  const auto range = static_cast<std::uint64_t>(key_max);
  std::vector<Row> rows;
  rows.reserve(n_rows);
  char buf[32];
  for (std::size_t r = 0; r < n_rows; ++r) {
    Row row;
    row.reserve(1 + payload_width);
    const auto raw = static_cast<std::int64_t>(rng() % range);
    row.emplace_back(raw / divisor);
    for (std::size_t w = 0; w < payload_width; ++w) {
      std::snprintf(buf, sizeof buf, "%02zu-%010zu", w % 100, r);
      row.emplace_back(std::string(buf));
    }
    rows.push_back(std::move(row));
  }
  return Table(Schema(std::move(cols), 0), std::move(rows));
}

}  // namespace gridjoin
