#pragma once

#include <string>
#include <utility>
#include <vector>

namespace ice::svg {

using Series = std::pair<std::string, std::vector<double>>;

// Polylines over a shared x index; `marks` draws dashed vertical lines at the
// given x positions (phase boundaries).
std::string line_chart(const std::string& title, const std::vector<Series>& series,
                       const std::vector<std::pair<double, std::string>>& marks = {});

// Grouped bars: one group per category, one bar per series.
std::string bar_chart(const std::string& title, const std::vector<std::string>& categories,
                      const std::vector<Series>& series);

}  // namespace ice::svg
