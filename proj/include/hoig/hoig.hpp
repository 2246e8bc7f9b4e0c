#pragma once

// Umbrella header: the full attribution toolkit in one include.

#include "hoig/core/attribution_tensor.hpp"
#include "hoig/core/errors.hpp"
#include "hoig/core/multi_index.hpp"
#include "hoig/core/quadrature.hpp"
#include "hoig/core/tensor_json.hpp"
#include "hoig/engine/engine.hpp"
#include "hoig/engine/path.hpp"
#include "hoig/models/closed_form.hpp"
#include "hoig/models/glm.hpp"
#include "hoig/models/gpr.hpp"
#include "hoig/models/model.hpp"
#include "hoig/models/model_io.hpp"
#include "hoig/models/polynomial.hpp"
#include "hoig/topology/graph.hpp"
#include "hoig/topology/graph_export.hpp"
#include "hoig/workbench/dataset.hpp"
#include "hoig/workbench/experiments.hpp"
#include "hoig/workbench/synthetic.hpp"
