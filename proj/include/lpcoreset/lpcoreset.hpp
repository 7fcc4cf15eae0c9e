#pragma once

// Everything except io.hpp, which needs nlohmann/json.

#include "lpcoreset/errors.hpp"
#include "lpcoreset/matrix.hpp"
#include "lpcoreset/random.hpp"
#include "lpcoreset/generators.hpp"
#include "lpcoreset/scores.hpp"
#include "lpcoreset/flatten.hpp"
#include "lpcoreset/sampling.hpp"
#include "lpcoreset/verify.hpp"
#include "lpcoreset/calibrate.hpp"
#include "lpcoreset/recursive.hpp"
