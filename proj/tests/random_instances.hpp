#pragma once

#include "captree/instances.hpp"

namespace captree::fixtures {
using namespace captree::instances;
}
