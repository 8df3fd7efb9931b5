#include "repcap/io.hpp"

#include "repcap/error.hpp"
#include "repcap/format.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

namespace repcap {

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

EmbeddingSet parse_embeddings(const std::string& text, const std::string& source) {
  std::string_view rest(text);
  if (rest.starts_with("\xEF\xBB\xBF")) rest.remove_prefix(3);
  int line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (rest.empty()) return false;
    const std::size_t nl = rest.find('\n');
    line = trim_cr(rest.substr(0, nl));
    rest = nl == std::string_view::npos ? std::string_view() : rest.substr(nl + 1);
    ++line_no;
    return true;
  };
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::Format, source + ":" + std::to_string(line_no) + ": " + why);
  };

  std::string_view line;
  if (!next_line(line)) fail("empty file");
  const auto header = split_commas(line);
  if (header.size() < 2 || header[0] != "label") fail("header must be label,f0,f1,...");
  const int dim = static_cast<int>(header.size()) - 1;
  for (int j = 0; j < dim; ++j) {
    if (header[static_cast<std::size_t>(j) + 1] != "f" + std::to_string(j)) {
      fail("header column " + std::to_string(j + 1) + " must be f" + std::to_string(j));
    }
  }

  std::vector<std::string> labels;
  std::vector<double> values;
  while (next_line(line)) {
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (static_cast<int>(cells.size()) != dim + 1) {
      fail("expected " + std::to_string(dim + 1) + " columns, found " +
           std::to_string(cells.size()));
    }
    if (cells[0].empty()) fail("empty label");
    labels.emplace_back(cells[0]);
    for (int j = 1; j <= dim; ++j) {
      std::string_view cell = cells[static_cast<std::size_t>(j)];
      if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
      double v = 0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        fail("bad number '" + std::string(cells[static_cast<std::size_t>(j)]) + "'");
      }
      values.push_back(v);
    }
  }
  if (labels.empty()) fail("no records");
  Matrix m = Eigen::Map<const Matrix>(values.data(), dim, static_cast<Eigen::Index>(labels.size()));
  return EmbeddingSet(std::move(labels), std::move(m));
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(read_text_file(path), path.string());
}

std::string format_embeddings(const EmbeddingSet& set) {
  std::string out = "label";
  for (int j = 0; j < set.dim(); ++j) out += ",f" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    out += set.label(i);
    const auto v = set.vector(i);
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      out += ',';
      out += format_number(v[j]);
    }
    out += '\n';
  }
  return out;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set) {
  write_text_file(path, format_embeddings(set));
}

}  // namespace repcap
