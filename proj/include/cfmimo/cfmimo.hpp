#pragma once

#include "cfmimo/allocation.hpp"
#include "cfmimo/channel.hpp"
#include "cfmimo/evaluation.hpp"
#include "cfmimo/fp_centralized.hpp"
#include "cfmimo/fp_decentralized.hpp"
#include "cfmimo/fp_exchange.hpp"
#include "cfmimo/harness.hpp"
#include "cfmimo/linalg.hpp"
#include "cfmimo/model.hpp"
#include "cfmimo/multipliers.hpp"
#include "cfmimo/pathloss.hpp"
#include "cfmimo/received_gram.hpp"
#include "cfmimo/topology.hpp"
