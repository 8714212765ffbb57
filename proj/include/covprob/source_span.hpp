#pragma once

#include <string>

namespace covprob {

struct SourceSpan {
  std::string file;
  int line = 0;
  int col_begin = 0;
  int col_end = 0;

  std::string to_string() const;
};

}  // namespace covprob
