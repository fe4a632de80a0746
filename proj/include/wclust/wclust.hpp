#pragma once

#include "wclust/cluster.hpp"
#include "wclust/detmetrics.hpp"
#include "wclust/energy.hpp"
#include "wclust/engine.hpp"
#include "wclust/error.hpp"
#include "wclust/netdef.hpp"
#include "wclust/report.hpp"
#include "wclust/scope.hpp"
#include "wclust/synth.hpp"
#include "wclust/traffic.hpp"
#include "wclust/weights_io.hpp"
