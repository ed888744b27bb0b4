#pragma once

#include "dppfit/cli.hpp"
#include "dppfit/errors.hpp"
#include "dppfit/index_set.hpp"
#include "dppfit/io.hpp"
#include "dppfit/learn.hpp"
#include "dppfit/model.hpp"
#include "dppfit/rng.hpp"
#include "dppfit/sampling.hpp"
#include "dppfit/sym_matrix.hpp"
#include "dppfit/synthgen.hpp"
