#pragma once

#include "cartanlab/errors.hpp"
#include "cartanlab/parallel.hpp"
#include "cartanlab/random.hpp"
#include "cartanlab/torus.hpp"
#include "cartanlab/int_matrix.hpp"
#include "cartanlab/polynomial.hpp"
#include "cartanlab/json_io.hpp"
#include "cartanlab/cartan_action.hpp"
#include "cartanlab/weyl.hpp"
#include "cartanlab/trig_field.hpp"
#include "cartanlab/diffeo.hpp"
#include "cartanlab/perturbed_action.hpp"
#include "cartanlab/grid_field.hpp"
#include "cartanlab/semiconjugacy.hpp"
#include "cartanlab/exponents.hpp"
#include "cartanlab/invariant_density.hpp"
#include "cartanlab/stable_leaf.hpp"
#include "cartanlab/linearization.hpp"
