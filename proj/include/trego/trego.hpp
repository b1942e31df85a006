#pragma once

#include "trego/acquisition.hpp"
#include "trego/design.hpp"
#include "trego/engine.hpp"
#include "trego/gp.hpp"
#include "trego/harness.hpp"
#include "trego/kernel.hpp"
#include "trego/record_io.hpp"
#include "trego/testbed.hpp"
