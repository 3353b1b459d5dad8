#pragma once

// Everything except preftrans/config.hpp, which additionally needs the
// nlohmann json header on the include path.

#include "preftrans/error.hpp"
#include "preftrans/sphere.hpp"
#include "preftrans/cost.hpp"
#include "preftrans/parallel.hpp"
#include "preftrans/mapping.hpp"
#include "preftrans/mtw.hpp"
#include "preftrans/transport.hpp"
#include "preftrans/optics.hpp"
#include "preftrans/rng.hpp"
#include "preftrans/io.hpp"
#include "preftrans/validation.hpp"
