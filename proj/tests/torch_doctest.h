// SPDX-License-Identifier: Apache-2.0
#pragma once

// LibTorch defines its own CHECK macro. Pull torch in first, drop that
// definition, then let doctest define the test macros.
#include <torch/torch.h>

#undef CHECK
#include <doctest.h>
