#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "oodselect/core_data.hpp"

namespace oodselect {

namespace csv {

/// Splits one CSV line on commas. Double-quoted fields may contain commas;
/// a doubled quote inside a quoted field is a literal quote.
inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

/// Non-empty lines of a file with trailing CR stripped.
inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

inline double parse_double(std::string_view text, std::string_view context) {
  double v = 0.0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  while (begin != end && *begin == ' ') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end)
    fail(ErrorKind::Parse, std::string(context) + ": not a number '" + std::string(text) + "'");
  return v;
}

/// Round-trippable shortest decimal representation.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace csv

/// Reads `model_id,<example ids...>` followed by one 0/1 row per model.
inline CorrectnessMatrix load_correctness(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.size() < 2) fail(ErrorKind::EmptyMatrix, "'" + path.string() + "' has no model rows");
  auto header = csv::split_line(lines.front());
  if (header.size() < 2) fail(ErrorKind::EmptyMatrix, "'" + path.string() + "' has no example columns");
  std::vector<std::string> example_ids(header.begin() + 1, header.end());
  const std::size_t d = example_ids.size();

  std::vector<std::string> model_ids;
  model_ids.reserve(lines.size() - 1);
  BitMatrix z(lines.size() - 1, d);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = csv::split_line(lines[i]);
    if (fields.size() != d + 1)
      fail(ErrorKind::RaggedRow, "line " + std::to_string(i + 1) + " has " + std::to_string(fields.size()) +
                                     " fields, expected " + std::to_string(d + 1));
    model_ids.push_back(fields[0]);
    for (std::size_t j = 0; j < d; ++j) {
      const auto& cell = fields[j + 1];
      if (cell == "1") {
        z.set(i - 1, j, true);
      } else if (cell != "0") {
        fail(ErrorKind::NonBinaryCell, "row=" + fields[0] + " col=" + example_ids[j] + " value='" + cell + "'");
      }
    }
  }
  return {std::move(z), std::move(model_ids), std::move(example_ids)};
}

inline void write_correctness(const std::filesystem::path& path, const CorrectnessMatrix& z) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << "model_id";
  for (const auto& id : z.example_ids()) out << ',' << csv::escape(id);
  out << '\n';
  std::string row;
  for (std::size_t i = 0; i < z.n_models(); ++i) {
    row = csv::escape(z.model_ids()[i]);
    for (std::size_t j = 0; j < z.n_examples(); ++j) {
      row += ',';
      row += z(i, j) ? '1' : '0';
    }
    out << row << '\n';
  }
}

/// Reads `model_id,id_accuracy[,family[,split]]`. Accuracies of exactly 0 or 1
/// are clipped to [eps, 1 - eps]; each clip appends a message to `warnings`.
inline ModelTable load_models(const std::filesystem::path& path, double eps = kDefaultClipEps,
                              std::vector<std::string>* warnings = nullptr) {
  check_clip_eps(eps);
  const auto lines = csv::read_lines(path);
  if (lines.empty()) fail(ErrorKind::Parse, "'" + path.string() + "' is empty");
  const auto header = csv::split_line(lines.front());
  if (header.size() < 2 || header[0] != "model_id" || header[1] != "id_accuracy")
    fail(ErrorKind::Parse, "'" + path.string() + "' header must start with model_id,id_accuracy");
  int family_col = -1;
  int split_col = -1;
  for (std::size_t k = 2; k < header.size(); ++k) {
    if (header[k] == "family") family_col = static_cast<int>(k);
    if (header[k] == "split") split_col = static_cast<int>(k);
  }

  ModelTable table;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = csv::split_line(lines[i]);
    if (fields.size() != header.size()) fail(ErrorKind::RaggedRow, "line " + std::to_string(i + 1));
    ModelRecord rec;
    rec.model_id = fields[0];
    rec.id_accuracy = csv::parse_double(fields[1], "id_accuracy of " + rec.model_id);
    if (!(rec.id_accuracy >= 0.0 && rec.id_accuracy <= 1.0))
      fail(ErrorKind::Parse, "id_accuracy of " + rec.model_id + " outside [0,1]");
    if (rec.id_accuracy < eps || rec.id_accuracy > 1.0 - eps) {
      rec.id_accuracy = std::clamp(rec.id_accuracy, eps, 1.0 - eps);
      if (warnings) warnings->push_back("clipped id_accuracy of " + rec.model_id);
    }
    if (family_col >= 0) rec.family = fields[family_col];
    if (split_col >= 0) rec.split = parse_split(fields[split_col]);
    table.records.push_back(std::move(rec));
  }
  detail::index_ids([&] {
    std::vector<std::string> ids;
    for (const auto& r : table.records) ids.push_back(r.model_id);
    return ids;
  }(), ErrorKind::DuplicateModelId, "model id");
  return table;
}

inline void write_models(const std::filesystem::path& path, const ModelTable& models, bool with_split = false) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << "model_id,id_accuracy,family" << (with_split ? ",split" : "") << '\n';
  for (const auto& m : models.records) {
    out << csv::escape(m.model_id) << ',' << csv::format_double(m.id_accuracy) << ',' << csv::escape(m.family);
    if (with_split) out << ',' << to_string(m.split);
    out << '\n';
  }
}

/// Reads `example_id,label,<attr_1>,...`; empty cells are treated as missing.
inline std::vector<ExampleMeta> load_example_meta(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) fail(ErrorKind::Parse, "'" + path.string() + "' is empty");
  const auto header = csv::split_line(lines.front());
  if (header.empty() || header[0] != "example_id")
    fail(ErrorKind::Parse, "'" + path.string() + "' header must start with example_id");
  const bool has_label = header.size() > 1 && header[1] == "label";
  std::vector<ExampleMeta> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = csv::split_line(lines[i]);
    if (fields.size() != header.size()) fail(ErrorKind::RaggedRow, "line " + std::to_string(i + 1));
    ExampleMeta meta;
    meta.example_id = fields[0];
    std::size_t k = 1;
    if (has_label) {
      if (!fields[1].empty()) meta.label = fields[1];
      k = 2;
    }
    for (; k < header.size(); ++k)
      if (!fields[k].empty()) meta.attributes[header[k]] = fields[k];
    out.push_back(std::move(meta));
  }
  return out;
}

inline void write_example_meta(const std::filesystem::path& path, const std::vector<ExampleMeta>& examples,
                               const std::vector<std::string>& attribute_names) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << "example_id,label";
  for (const auto& a : attribute_names) out << ',' << csv::escape(a);
  out << '\n';
  for (const auto& e : examples) {
    out << csv::escape(e.example_id) << ',' << csv::escape(e.label.value_or(""));
    for (const auto& a : attribute_names) {
      auto it = e.attributes.find(a);
      out << ',' << (it == e.attributes.end() ? "" : csv::escape(it->second));
    }
    out << '\n';
  }
}

/// Reads `id,v_0,...,v_{dim-1}`.
inline EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.size() < 2) fail(ErrorKind::Parse, "'" + path.string() + "' has no vectors");
  const auto header = csv::split_line(lines.front());
  if (header.size() < 2) fail(ErrorKind::Parse, "'" + path.string() + "' has no vector columns");
  EmbeddingTable table;
  table.dim = header.size() - 1;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = csv::split_line(lines[i]);
    if (fields.size() != header.size()) fail(ErrorKind::DimensionMismatch, "line " + std::to_string(i + 1));
    table.ids.push_back(fields[0]);
    std::vector<double> v(table.dim);
    for (std::size_t k = 0; k < table.dim; ++k) v[k] = csv::parse_double(fields[k + 1], "embedding " + fields[0]);
    table.vectors.push_back(std::move(v));
  }
  table.validate();
  detail::index_ids(table.ids, ErrorKind::DuplicateExampleId, "embedding id");
  return table;
}

inline void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << "id";
  for (std::size_t k = 0; k < table.dim; ++k) out << ",v_" << k;
  out << '\n';
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    out << csv::escape(table.ids[i]);
    for (double x : table.vectors[i]) out << ',' << csv::format_double(x);
    out << '\n';
  }
}

}  // namespace oodselect
