#pragma once

#include "parzenfiber/constellation.hpp"
#include "parzenfiber/detect.hpp"
#include "parzenfiber/fft.hpp"
#include "parzenfiber/fiberlink.hpp"
#include "parzenfiber/harness.hpp"
#include "parzenfiber/metrics.hpp"
#include "parzenfiber/rng.hpp"
#include "parzenfiber/rxdsp.hpp"
#include "parzenfiber/txdsp.hpp"
