#pragma once

#include "marvin/frames.hpp"
#include "marvin/vision_sim.hpp"
#include "marvin/apf_guidance.hpp"
#include "marvin/chaser_fleet.hpp"
#include "marvin/swarm_net.hpp"
#include "marvin/transport.hpp"
#include "marvin/scenario.hpp"
#include "marvin/sim_runner.hpp"
