#include "sdsolve/sdpa_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace sdsolve::sdpa {

ParseError::ParseError(int line, const std::string& reason)
    : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}

namespace {

struct Line {
  int number;
  std::string_view text;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  int number = 1;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view l = text.substr(start, end - start);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    lines.push_back({number++, l});
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

bool is_separator(char c) {
  return c == ' ' || c == '\t' || c == ',' || c == '{' || c == '}' || c == '(' || c == ')';
}

std::vector<std::string_view> tokens(std::string_view s, bool header) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (header ? is_separator(s[i]) : (s[i] == ' ' || s[i] == '\t'))) ++i;
    std::size_t j = i;
    while (j < s.size() && !(header ? is_separator(s[j]) : (s[j] == ' ' || s[j] == '\t'))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool blank(std::string_view s) {
  for (char c : s)
    if (!is_separator(c)) return false;
  return true;
}

int parse_int(std::string_view tok, int line, const char* what) {
  int v = 0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last)
    throw ParseError(line, std::string("malformed integer for ") + what + ": '" + std::string(tok) + "'");
  return v;
}

double parse_double(std::string_view tok, int line, const char* what) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last || !std::isfinite(v))
    throw ParseError(line, std::string("malformed number for ") + what + ": '" + std::string(tok) + "'");
  return v;
}

// Leading integer of a header line such as "100 =mdim".
int header_int(const Line& l, const char* what) {
  const auto t = tokens(l.text, true);
  if (t.empty()) throw ParseError(l.number, std::string("missing ") + what);
  std::string_view tok = t[0];
  const std::size_t eq = tok.find('=');
  if (eq != std::string_view::npos && eq > 0) tok = tok.substr(0, eq);
  return parse_int(tok, l.number, what);
}

}  // namespace

SdpProblem parse_sdpa(std::string_view text, const ParseOptions& opts) {
  const auto lines = split_lines(text);
  std::size_t pos = 0;
  auto next_content = [&](const char* what) -> const Line& {
    while (pos < lines.size() && blank(lines[pos].text)) ++pos;
    if (pos >= lines.size()) {
      const int at = lines.empty() ? 1 : lines.back().number;
      throw ParseError(at, std::string("unexpected end of input, expected ") + what);
    }
    return lines[pos++];
  };

  // comments only precede the header
  while (pos < lines.size()) {
    const auto t = lines[pos].text;
    std::size_t k = 0;
    while (k < t.size() && (t[k] == ' ' || t[k] == '\t')) ++k;
    if (k < t.size() && (t[k] == '"' || t[k] == '*')) {
      ++pos;
      continue;
    }
    if (blank(t)) {
      ++pos;
      continue;
    }
    break;
  }

  const Line& mline = next_content("constraint count");
  const int m = header_int(mline, "constraint count");
  if (m < 1) throw ParseError(mline.number, "constraint count must be positive");

  const Line& nbline = next_content("block count");
  const int nblocks = header_int(nbline, "block count");
  if (nblocks < 1) throw ParseError(nbline.number, "block count must be positive");

  const Line& bsline = next_content("block sizes");
  const auto bs = tokens(bsline.text, true);
  if (static_cast<int>(bs.size()) != nblocks)
    throw ParseError(bsline.number, "expected " + std::to_string(nblocks) + " block sizes, found " +
                                        std::to_string(bs.size()));
  std::vector<int> sizes;
  for (auto tok : bs) {
    const int s = parse_int(tok, bsline.number, "block size");
    if (s == 0) throw ParseError(bsline.number, "block size must be nonzero");
    sizes.push_back(s);
  }

  const Line& bline = next_content("right-hand side");
  const auto bt = tokens(bline.text, true);
  if (static_cast<int>(bt.size()) != m)
    throw ParseError(bline.number,
                     "expected " + std::to_string(m) + " right-hand side values, found " + std::to_string(bt.size()));
  Vector b(m);
  for (int i = 0; i < m; ++i) b(i) = parse_double(bt[i], bline.number, "right-hand side");

  SdpProblem p(m, sizes);
  p.b = b;
  // (matno, blkno) -> (i, j) -> value, 0-based, i <= j
  std::map<std::pair<int, int>, std::map<std::pair<int, int>, double>> acc;
  for (; pos < lines.size(); ++pos) {
    const Line& l = lines[pos];
    if (blank(l.text)) continue;
    const auto t = tokens(l.text, false);
    if (t.size() < 5) throw ParseError(l.number, "entry needs 5 fields: matno blkno i j value");
    if (t.size() > 5) throw ParseError(l.number, "entry has more than 5 fields");
    const int matno = parse_int(t[0], l.number, "matrix number");
    const int blkno = parse_int(t[1], l.number, "block number");
    int i = parse_int(t[2], l.number, "row index");
    int j = parse_int(t[3], l.number, "column index");
    const double v = parse_double(t[4], l.number, "entry value");
    if (matno < 0 || matno > m) throw ParseError(l.number, "matrix number out of range");
    if (blkno < 1 || blkno > nblocks) throw ParseError(l.number, "block number out of range");
    const int order = p.block_order(blkno - 1);
    if (i < 1 || j < 1 || i > order || j > order) throw ParseError(l.number, "entry index out of range");
    if (i > j) std::swap(i, j);
    if (p.is_diagonal(blkno - 1) && i != j) throw ParseError(l.number, "off-diagonal entry in diagonal block");
    acc[{matno, blkno - 1}][{i - 1, j - 1}] += v;
  }

  for (const auto& [key, values] : acc) {
    const auto [matno, k] = key;
    const int n = p.block_order(k);
    std::vector<SparseEntry> entries;
    std::size_t nnz = 0;
    for (const auto& [ij, v] : values) {
      if (v == 0.0) continue;
      entries.push_back({ij.first, ij.second, v});
      nnz += ij.first == ij.second ? 1 : 2;
    }
    CoeffMatrix c;
    const double fraction = static_cast<double>(nnz) / (static_cast<double>(n) * n);
    if (p.is_diagonal(k) || fraction < opts.sparsity_threshold) {
      c = CoeffMatrix::sparse(n, std::move(entries));
    } else {
      std::vector<double> packed(static_cast<std::size_t>(n) * (n + 1) / 2, 0.0);
      for (const auto& e : entries) packed[packed_index(e.row, e.col)] = e.value;
      c = CoeffMatrix::dense(n, std::move(packed));
    }
    if (matno == 0)
      p.C[k] = opts.negate_objective ? c.scaled(-1.0) : c;
    else
      p.A[matno - 1][k] = c;
  }
  return p;
}

SdpProblem read_sdpa_file(const std::string& path, const ParseOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_sdpa(ss.str(), opts);
}

namespace {

void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void append_entries(std::string& out, int matno, int blk, const CoeffMatrix& c) {
  for (const auto& e : c.to_entries()) {
    out += std::to_string(matno) + ' ' + std::to_string(blk + 1) + ' ' + std::to_string(e.row + 1) + ' ' +
           std::to_string(e.col + 1) + ' ';
    append_double(out, e.value);
    out += '\n';
  }
}

}  // namespace

std::string write_sdpa(const SdpProblem& problem) {
  std::string out;
  out += std::to_string(problem.m) + "\n";
  out += std::to_string(problem.num_blocks()) + "\n";
  for (int k = 0; k < problem.num_blocks(); ++k) {
    if (k) out += ' ';
    out += std::to_string(problem.blocks[k]);
  }
  out += '\n';
  for (int i = 0; i < problem.m; ++i) {
    if (i) out += ' ';
    append_double(out, problem.b(i));
  }
  out += '\n';
  for (int k = 0; k < problem.num_blocks(); ++k) append_entries(out, 0, k, problem.C[k]);
  for (int i = 0; i < problem.m; ++i)
    for (int k = 0; k < problem.num_blocks(); ++k) append_entries(out, i + 1, k, problem.A[i][k]);
  return out;
}

void write_sdpa_file(const SdpProblem& problem, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << write_sdpa(problem);
}

std::string write_report(const std::vector<ReportRow>& rows) {
  std::string out = "instance,err1,err2,err3,err4,err5,err6,time_seconds,status\n";
  char buf[64];
  for (const auto& r : rows) {
    out += r.instance;
    for (double e : r.errors) {
      std::snprintf(buf, sizeof buf, ",%.2e", e);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.3f", r.time_seconds);
    out += buf;
    out += ',' + r.status + '\n';
  }
  return out;
}

}  // namespace sdsolve::sdpa
