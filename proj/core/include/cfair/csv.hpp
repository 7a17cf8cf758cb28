#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cfair::csv {

using Row = std::vector<std::string>;

struct Document {
  Row header;
  std::vector<Row> rows;
};

/// Parses RFC-4180 text: quoted fields, doubled quotes, embedded newlines,
/// CRLF or LF line ends. Lines starting with '#' before the header are
/// treated as comments (artifact format tags). Throws DataError on ragged rows.
Document parse(std::string_view text);
Document read_file(const std::string& path);

std::string escape(std::string_view field);

/// Writes a format tag comment, a header, then rows.
class Writer {
 public:
  Writer(std::ostream& out, std::string_view format_tag, const Row& header);

  void row(const Row& fields);

 private:
  std::ostream& out_;
  std::size_t width_;
};

/// Shortest round-trip decimal form of a double.
std::string format_number(double value);

}  // namespace cfair::csv
