#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "covprob/dsl.hpp"

namespace covprob::testing {

inline std::string fixture_path(const std::string& name) {
  return std::string(COVPROB_FIXTURE_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SystemModel load_fixture_model(const std::string& name) {
  return parse_model(read_file(fixture_path(name)), name);
}

inline UsageProfile load_fixture_profile(const std::string& name, const SystemModel& m) {
  return parse_profile(read_file(fixture_path(name)), m, name);
}

}  // namespace covprob::testing
