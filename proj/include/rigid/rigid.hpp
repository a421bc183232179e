#pragma once

#include "rigid/backends.hpp"
#include "rigid/config.hpp"
#include "rigid/core.hpp"
#include "rigid/corruptions.hpp"
#include "rigid/detector.hpp"
#include "rigid/embedder.hpp"
#include "rigid/experiments.hpp"
#include "rigid/fixtures.hpp"
#include "rigid/image.hpp"
#include "rigid/image_io.hpp"
#include "rigid/manifest.hpp"
#include "rigid/metrics.hpp"
#include "rigid/onnx_embedder.hpp"
#include "rigid/perturbation.hpp"
#include "rigid/random.hpp"
#include "rigid/scoring.hpp"
