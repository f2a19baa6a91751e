#pragma once

// Umbrella header for the pixelsne library: screen-resolution-bounded
// stochastic neighbor embedding with exact, Barnes-Hut and pixel-aligned
// backends.

#include "pixelsne/affinity.hpp"
#include "pixelsne/core.hpp"
#include "pixelsne/io.hpp"
#include "pixelsne/manifest.hpp"
#include "pixelsne/metrics.hpp"
#include "pixelsne/neighbors.hpp"
#include "pixelsne/optimizer.hpp"
#include "pixelsne/pca.hpp"
#include "pixelsne/quadtree.hpp"
#include "pixelsne/rng.hpp"
#include "pixelsne/svg.hpp"
#include "pixelsne/synth.hpp"
