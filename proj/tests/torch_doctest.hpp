#pragma once

// libtorch's logging header defines CHECK/CHECK_EQ/... as aborting asserts.
// Pull it in first and drop those so doctest's macros are the ones in effect.
#include <torch/torch.h>

#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LE
#undef CHECK_LT
#undef CHECK_GE
#undef CHECK_GT

#include <doctest.h>
