#pragma once

#include "dcut/entropy.hpp"
#include "dcut/exact_mixing.hpp"
#include "dcut/fft.hpp"
#include "dcut/group.hpp"
#include "dcut/harness.hpp"
#include "dcut/normal.hpp"
#include "dcut/parallel.hpp"
#include "dcut/pmf.hpp"
#include "dcut/rng.hpp"
#include "dcut/srw.hpp"
#include "dcut/stats.hpp"
#include "dcut/walk.hpp"
