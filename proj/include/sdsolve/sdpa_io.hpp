#pragma once

#include "sdsolve/model.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sdsolve::sdpa {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& reason);
  int line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  int line_;
  std::string reason_;
};

struct SdpaEntry {
  int matno = 0;  // 0 = objective
  int blkno = 1;  // 1-based
  int i = 1;      // 1-based, i <= j
  int j = 1;
  double value = 0.0;
};

struct ParseOptions {
  // SDPA files describe max <F0,Y> s.t. <Fi,Y> = ci. Negating F0 yields the
  // same pair in min <C,X> form; the default keeps C = F0 as written.
  bool negate_objective = false;
  double sparsity_threshold = 0.25;
};

SdpProblem parse_sdpa(std::string_view text, const ParseOptions& opts = {});
SdpProblem read_sdpa_file(const std::string& path, const ParseOptions& opts = {});

std::string write_sdpa(const SdpProblem& problem);
void write_sdpa_file(const SdpProblem& problem, const std::string& path);

struct ReportRow {
  std::string instance;
  std::array<double, 6> errors{};
  double time_seconds = 0.0;
  std::string status;
};

std::string write_report(const std::vector<ReportRow>& rows);

}  // namespace sdsolve::sdpa
