#pragma once

#include "mdcs/physics.hpp"
#include "mdcs/simulator.hpp"
#include "mdcs/spectra.hpp"
#include "mdcs/nlls.hpp"
#include "mdcs/fitting.hpp"
#include "mdcs/io.hpp"
#include "mdcs/version.hpp"
