#pragma once

#include "svrtune/simd.hpp"

namespace svrtune::simd::detail {

extern const KernelTable kScalarTable;
#if defined(SVRTUNE_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

}  // namespace svrtune::simd::detail
