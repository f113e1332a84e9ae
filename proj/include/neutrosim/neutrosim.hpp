#pragma once

// Library modules in one include. The command-line layer (cli.hpp) is kept
// separate because it pulls in the argument parser.

#include "neutrosim/autodiff.hpp"
#include "neutrosim/compositor.hpp"
#include "neutrosim/dataio.hpp"
#include "neutrosim/gan.hpp"
#include "neutrosim/gan_eval.hpp"
#include "neutrosim/image.hpp"
#include "neutrosim/lbfgs.hpp"
#include "neutrosim/motion_ar.hpp"
#include "neutrosim/network.hpp"
#include "neutrosim/tensor.hpp"
#include "neutrosim/trajectory.hpp"
