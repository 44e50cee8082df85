#include "adrpipe/delimited.hpp"

#include <fstream>
#include <sstream>

#include "adrpipe/errors.hpp"

namespace adrpipe {

std::vector<std::vector<std::string>> parse_delimited(std::string_view content, char delimiter) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  // Strip a UTF-8 BOM if present.
  if (content.size() >= 3 && content.substr(0, 3) == "\xEF\xBB\xBF") {
    content.remove_prefix(3);
  }

  const std::size_t n = content.size();
  std::size_t i = 0;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (i < n) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && content[i + 1] == '"') {
          field.push_back('"');
          i += 2;
        } else {
          in_quotes = false;
          ++i;
        }
      } else {
        field.push_back(c);
        ++i;
      }
      continue;
    }
    if (c == '"' && !field_started && field.empty()) {
      in_quotes = true;
      field_started = true;
      ++i;
    } else if (c == delimiter) {
      end_field();
      ++i;
    } else if (c == '\n') {
      end_row();
      ++i;
    } else if (c == '\r') {
      if (i + 1 < n && content[i + 1] == '\n') {
        end_row();
        i += 2;
      } else {
        end_row();
        ++i;
      }
    } else {
      field.push_back(c);
      field_started = true;
      ++i;
    }
  }
  if (in_quotes) throw parse_error("unterminated quoted field at end of input");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::vector<std::vector<std::string>> read_delimited_file(const std::filesystem::path& path,
                                                          char delimiter) {
  return parse_delimited(read_text_file(path), delimiter);
}

std::string escape_field(std::string_view field, char delimiter) {
  const bool needs_quotes = field.find(delimiter) != std::string_view::npos ||
                            field.find('"') != std::string_view::npos ||
                            field.find('\n') != std::string_view::npos ||
                            field.find('\r') != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_delimited_file(const std::filesystem::path& path,
                          const std::vector<std::vector<std::string>>& rows, char delimiter) {
  std::ostringstream out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << delimiter;
      out << escape_field(row[i], delimiter);
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

char detect_delimiter(std::string_view content) {
  const std::size_t eol = content.find('\n');
  std::string_view head = eol == std::string_view::npos ? content : content.substr(0, eol);
  return head.find('\t') != std::string_view::npos ? '\t' : ',';
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error("cannot write file: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw error("short write: " + path.string());
}

}  // namespace adrpipe
