#pragma once

// libtorch defines its own CHECK macro; the test framework's wins here.
#include <torch/torch.h>
#undef CHECK
#include "doctest.h"
