#pragma once

// Umbrella header for the quality-aware translation toolkit.

#include "qaware/corpus.hpp"
#include "qaware/decode.hpp"
#include "qaware/eval.hpp"
#include "qaware/io.hpp"
#include "qaware/manifest.hpp"
#include "qaware/metrics.hpp"
#include "qaware/model.hpp"
#include "qaware/quality.hpp"
#include "qaware/select.hpp"
#include "qaware/types.hpp"
#include "qaware/util.hpp"
