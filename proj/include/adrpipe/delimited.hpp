#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace adrpipe {

// Minimal RFC 4180 reader/writer. Quoted fields may contain the delimiter,
// doubled quotes and newlines; \r\n and \n are both accepted as row ends.
std::vector<std::vector<std::string>> parse_delimited(std::string_view content, char delimiter);

std::vector<std::vector<std::string>> read_delimited_file(const std::filesystem::path& path,
                                                          char delimiter);

std::string escape_field(std::string_view field, char delimiter);

void write_delimited_file(const std::filesystem::path& path,
                          const std::vector<std::vector<std::string>>& rows, char delimiter);

// Picks '\t' when the first line contains a tab, ',' otherwise.
char detect_delimiter(std::string_view content);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace adrpipe
