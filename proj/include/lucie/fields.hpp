#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lucie {

enum class Role : uint8_t {
  Prognostic = 0,
  Diagnostic = 1,
  Forcing = 2,
  Static = 3,
};

struct VariableSpec {
  std::string name;
  int levels = 1;
  Role role = Role::Prognostic;
};

/// Channel key for per-(variable, level) bookkeeping: "T:3" or "logP".
std::string channel_key(const std::string& var, int level, int nlevels);

/// Named physical fields on (level, lat, lon). One time slice.
struct FieldSet {
  int nlat = 0;
  int nlon = 0;
  std::vector<VariableSpec> variables;
  std::vector<std::vector<double>> data;  // per variable, levels*nlat*nlon

  int find(const std::string& name) const;
  std::span<const double> level_view(int var, int level) const;
  std::span<double> level_view(int var, int level);
  void add(VariableSpec spec, std::vector<double> values);
};

}  // namespace lucie
