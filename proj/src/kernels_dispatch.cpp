#include <cstdlib>
#include <string_view>

#include "fregan/kernels.hpp"

namespace fregan::kernels {

const KernelTable& active() {
    static const KernelTable& table = [] () -> const KernelTable& {
        const char* env = std::getenv("FREGAN_KERNELS");
        if (env != nullptr && std::string_view(env) == "scalar") return scalar_table();
        if (const KernelTable* simd = avx2_table()) return *simd;
        return scalar_table();
    }();
    return table;
}

}  // namespace fregan::kernels
