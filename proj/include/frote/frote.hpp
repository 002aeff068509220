#pragma once

#include "frote/benchmark.hpp"
#include "frote/conflicts.hpp"
#include "frote/dataset.hpp"
#include "frote/domain.hpp"
#include "frote/engine.hpp"
#include "frote/error.hpp"
#include "frote/generation.hpp"
#include "frote/harness.hpp"
#include "frote/metric.hpp"
#include "frote/models.hpp"
#include "frote/modification.hpp"
#include "frote/objective.hpp"
#include "frote/relaxation.hpp"
#include "frote/rng.hpp"
#include "frote/rule_parser.hpp"
#include "frote/rules.hpp"
#include "frote/selection.hpp"
