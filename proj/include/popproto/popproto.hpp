#pragma once

#include "popproto/core.hpp"
#include "popproto/errors.hpp"
#include "popproto/linear.hpp"
#include "popproto/protocol_io.hpp"
#include "popproto/protocols.hpp"
#include "popproto/rng.hpp"
#include "popproto/sim.hpp"
#include "popproto/stats.hpp"
#include "popproto/surgery.hpp"
#include "popproto/verify.hpp"
