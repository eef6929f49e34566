#pragma once

#include "analysis.hpp"
#include "baselines.hpp"
#include "error.hpp"
#include "gmm_embed.hpp"
#include "io.hpp"
#include "matrix.hpp"
#include "metric_core.hpp"
#include "pt_model.hpp"
#include "trainer.hpp"
#include "transport.hpp"
