#pragma once

#include "genattr/attribution.hpp"
#include "genattr/engine.hpp"
#include "genattr/errors.hpp"
#include "genattr/evaluator.hpp"
#include "genattr/harness.hpp"
#include "genattr/hierarchy.hpp"
#include "genattr/hierarchy_spec.hpp"
#include "genattr/models.hpp"
#include "genattr/remote.hpp"
#include "genattr/rng.hpp"
#include "genattr/spectree.hpp"
#include "genattr/synthetic.hpp"
#include "genattr/text.hpp"
#include "genattr/toy_models.hpp"
#include "genattr/types.hpp"
#include "genattr/vocabulary.hpp"
