/// Umbrella header for the netchemo library.
#pragma once

#include "netchemo/error.hpp"
#include "netchemo/network.hpp"
#include "netchemo/grid.hpp"
#include "netchemo/elliptic.hpp"
#include "netchemo/state.hpp"
#include "netchemo/stationary.hpp"
#include "netchemo/diagnostics.hpp"
#include "netchemo/evolution.hpp"
#include "netchemo/expression.hpp"
#include "netchemo/config.hpp"
#include "netchemo/io.hpp"
