#pragma once

#include "inforeasoner/error.hpp"
#include "inforeasoner/random.hpp"
#include "inforeasoner/text.hpp"
#include "inforeasoner/belief.hpp"
#include "inforeasoner/cluster.hpp"
#include "inforeasoner/reward.hpp"
#include "inforeasoner/rollout.hpp"
#include "inforeasoner/grpo.hpp"
#include "inforeasoner/toy.hpp"
#include "inforeasoner/experiments.hpp"
#include "inforeasoner/io.hpp"
#include "inforeasoner/remote.hpp"
