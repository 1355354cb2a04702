#pragma once

#include "reskit/errors.hpp"
#include "reskit/io.hpp"
#include "reskit/ks.hpp"
#include "reskit/learning.hpp"
#include "reskit/parallel.hpp"
#include "reskit/recurrent_kernel.hpp"
#include "reskit/reservoir.hpp"
#include "reskit/rng.hpp"
#include "reskit/series.hpp"
#include "reskit/transforms.hpp"
