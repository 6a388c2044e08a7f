#pragma once

#include "snekhorn/matrix.hpp"

#include <map>
#include <string>
#include <string_view>

namespace snekhorn {

enum class AffinityKind { ea, ea_symmetrized, rs, rs_symmetrized, ds, sea, st };

std::string_view to_string(AffinityKind kind);

// Dense nonnegative affinity plus the parameters that produced it and the
// solver's final diagnostics (residuals, iteration counts).
struct Affinity {
    Matrix P;
    AffinityKind kind = AffinityKind::ea;
    std::map<std::string, double> params;
    std::map<std::string, double> diagnostics;
};

} // namespace snekhorn
