#pragma once

#include <string>
#include <vector>

#include "mnarppca/model.hpp"

namespace mnarppca {

inline constexpr const char* kNaToken = "NA";

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

/// Header row of names, then decimal literals or NA. Roles are left empty.
Dataset parse_csv(const std::string& text, const std::string& source = "<input>");
Dataset load_csv(const std::string& path);

/// Writes masked cells as NA. Missing names become V1..Vp.
std::string format_csv(const Matrix& y, const Mask& omega, const std::vector<std::string>& names);
std::string format_csv(const Matrix& y, const std::vector<std::string>& names);
void write_csv(const std::string& path, const Dataset& data);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

std::vector<std::string> default_column_names(Index p);

}  // namespace mnarppca
