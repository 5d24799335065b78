#pragma once

#include "ergot/core.hpp"
#include "ergot/ergodic.hpp"
#include "ergot/group.hpp"
#include "ergot/lp.hpp"
#include "ergot/restriction.hpp"
#include "ergot/transport.hpp"
#include "ergot/verify.hpp"
