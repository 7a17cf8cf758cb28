#include "cfair/csv.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "cfair/error.hpp"

namespace cfair {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "config_error";
    case ErrorKind::data: return "data_error";
    case ErrorKind::systematic_difference: return "systematic_differences_too_severe";
    case ErrorKind::numerical: return "numerical_failure";
  }
  return "unknown";
}

namespace csv {
namespace {

// Splits the text into records. Returns false at end of input.
class RecordReader {
 public:
  explicit RecordReader(std::string_view text) : text_(text) {}

  bool next(Row& out) {
    out.clear();
    if (pos_ >= text_.size()) return false;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    while (pos_ < text_.size()) {
      char c = text_[pos_++];
      if (quoted) {
        if (c == '"') {
          if (pos_ < text_.size() && text_[pos_] == '"') {
            field.push_back('"');
            ++pos_;
          } else {
            quoted = false;
          }
        } else {
          field.push_back(c);
        }
        continue;
      }
      if (c == '"' && !field_started) {
        quoted = true;
        field_started = true;
      } else if (c == ',') {
        out.push_back(std::move(field));
        field.clear();
        field_started = false;
      } else if (c == '\r') {
        if (pos_ < text_.size() && text_[pos_] == '\n') ++pos_;
        break;
      } else if (c == '\n') {
        break;
      } else {
        field.push_back(c);
        field_started = true;
      }
    }
    if (quoted) throw DataError("csv: unterminated quoted field");
    out.push_back(std::move(field));
    return true;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

bool blank(const Row& row) { return row.size() == 1 && row.front().empty(); }

}  // namespace

Document parse(std::string_view text) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  Document doc;
  RecordReader reader(text);
  Row row;
  bool have_header = false;
  std::size_t line = 0;
  while (reader.next(row)) {
    ++line;
    if (!have_header) {
      if (blank(row) || (!row.empty() && !row.front().empty() && row.front()[0] == '#')) continue;
      doc.header = row;
      have_header = true;
      continue;
    }
    if (blank(row)) continue;
    if (row.size() != doc.header.size()) {
      throw DataError("csv: record " + std::to_string(line) + " has " + std::to_string(row.size()) +
                      " fields, header has " + std::to_string(doc.header.size()));
    }
    doc.rows.push_back(row);
  }
  if (!have_header) throw DataError("csv: missing header row");
  return doc;
}

Document read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

Writer::Writer(std::ostream& out, std::string_view format_tag, const Row& header)
    : out_(out), width_(header.size()) {
  out_ << "# format=" << format_tag << '\n';
  row(header);
}

void Writer::row(const Row& fields) {
  if (fields.size() != width_) throw DataError("csv writer: row width mismatch");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << escape(fields[i]);
  }
  out_ << '\n';
}

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return std::to_string(value);
  return std::string(buf, end);
}

}  // namespace csv
}  // namespace cfair
