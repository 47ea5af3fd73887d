#include "lucie/fields.hpp"

#include <stdexcept>

namespace lucie {

std::string channel_key(const std::string& var, int level, int nlevels) {
  if (nlevels <= 1) return var;
  return var + ":" + std::to_string(level);
}

int FieldSet::find(const std::string& name) const {
  for (size_t i = 0; i < variables.size(); ++i)
    if (variables[i].name == name) return static_cast<int>(i);
  return -1;
}

std::span<const double> FieldSet::level_view(int var, int level) const {
  size_t n = static_cast<size_t>(nlat) * nlon;
  return {data[var].data() + level * n, n};
}

std::span<double> FieldSet::level_view(int var, int level) {
  size_t n = static_cast<size_t>(nlat) * nlon;
  return {data[var].data() + level * n, n};
}

void FieldSet::add(VariableSpec spec, std::vector<double> values) {
  if (values.size() != static_cast<size_t>(spec.levels) * nlat * nlon)
    throw std::invalid_argument("FieldSet::add: size mismatch for " + spec.name);
  variables.push_back(std::move(spec));
  data.push_back(std::move(values));
}

}  // namespace lucie
