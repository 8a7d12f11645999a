#pragma once

#include "bandwidth.hpp"
#include "error.hpp"
#include "frechet.hpp"
#include "io.hpp"
#include "kernels.hpp"
#include "metric.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "simulate.hpp"
#include "torus.hpp"
