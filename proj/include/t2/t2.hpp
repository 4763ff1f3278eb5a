#pragma once

// Everything except the remote backend, which needs the t2_remote target.

#include "t2/backend.hpp"
#include "t2/cost.hpp"
#include "t2/csv.hpp"
#include "t2/diversity.hpp"
#include "t2/encoding.hpp"
#include "t2/error.hpp"
#include "t2/logistic.hpp"
#include "t2/metrics.hpp"
#include "t2/mlp.hpp"
#include "t2/mock_backend.hpp"
#include "t2/models.hpp"
#include "t2/orchestrator.hpp"
#include "t2/pipeline.hpp"
#include "t2/plan.hpp"
#include "t2/quality.hpp"
#include "t2/random.hpp"
#include "t2/resample.hpp"
#include "t2/sanity.hpp"
#include "t2/sim.hpp"
#include "t2/tabular.hpp"
