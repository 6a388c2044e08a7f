#include "snekhorn/affinity.hpp"

namespace snekhorn {

std::string_view to_string(AffinityKind kind) {
    switch (kind) {
    case AffinityKind::ea: return "ea";
    case AffinityKind::ea_symmetrized: return "ea-sym";
    case AffinityKind::rs: return "rs";
    case AffinityKind::rs_symmetrized: return "rs-sym";
    case AffinityKind::ds: return "ds";
    case AffinityKind::sea: return "sea";
    case AffinityKind::st: return "st";
    }
    return "unknown";
}

} // namespace snekhorn
