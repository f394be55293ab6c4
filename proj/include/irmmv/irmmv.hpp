#ifndef IRMMV_IRMMV_HPP
#define IRMMV_IRMMV_HPP

#include "irmmv/baselines.hpp"
#include "irmmv/bench.hpp"
#include "irmmv/dynamics.hpp"
#include "irmmv/errors.hpp"
#include "irmmv/matrix.hpp"
#include "irmmv/mnist.hpp"
#include "irmmv/problem.hpp"
#include "irmmv/random.hpp"
#include "irmmv/solver.hpp"

#endif
