#pragma once

#include "lgtl/attention.hpp"
#include "lgtl/bound_checks.hpp"
#include "lgtl/checks.hpp"
#include "lgtl/errors.hpp"
#include "lgtl/experiments.hpp"
#include "lgtl/gat.hpp"
#include "lgtl/generators.hpp"
#include "lgtl/graph.hpp"
#include "lgtl/graph_io.hpp"
#include "lgtl/hop_matrix.hpp"
#include "lgtl/lgtl.hpp"
#include "lgtl/params_io.hpp"
#include "lgtl/rational.hpp"
#include "lgtl/rng.hpp"
#include "lgtl/templates.hpp"
#include "lgtl/training.hpp"
