#pragma once

// Umbrella header for the change-point detection toolkit.

#include "nmfcpd/common.hpp"
#include "nmfcpd/config.hpp"
#include "nmfcpd/io.hpp"
#include "nmfcpd/network.hpp"
#include "nmfcpd/nmf.hpp"
#include "nmfcpd/parallel.hpp"
#include "nmfcpd/pipeline.hpp"
#include "nmfcpd/preprocess.hpp"
#include "nmfcpd/rank.hpp"
#include "nmfcpd/rng.hpp"
#include "nmfcpd/search.hpp"
#include "nmfcpd/simulate.hpp"
#include "nmfcpd/stats.hpp"
#include "nmfcpd/version.hpp"
