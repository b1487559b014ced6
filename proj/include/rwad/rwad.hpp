#pragma once

#include "rwad/errors.hpp"
#include "rwad/graph.hpp"
#include "rwad/features.hpp"
#include "rwad/models.hpp"
#include "rwad/perturbation.hpp"
#include "rwad/graph_attack.hpp"
#include "rwad/feature_attack.hpp"
#include "rwad/gadgets.hpp"
#include "rwad/metrics.hpp"
#include "rwad/synthetic.hpp"
#include "rwad/io.hpp"
#include "rwad/experiment.hpp"
