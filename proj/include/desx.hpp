#pragma once

#include "desx/core.hpp"
#include "desx/spaces.hpp"
#include "desx/mvee.hpp"
#include "desx/des.hpp"
#include "desx/duality.hpp"
#include "desx/cli.hpp"
