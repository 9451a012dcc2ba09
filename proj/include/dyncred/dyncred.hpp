#pragma once

#include "dyncred/credibility.hpp"
#include "dyncred/error.hpp"
#include "dyncred/glm.hpp"
#include "dyncred/linalg.hpp"
#include "dyncred/panel_io.hpp"
#include "dyncred/premiums.hpp"
#include "dyncred/processes.hpp"
#include "dyncred/random.hpp"
#include "dyncred/tables.hpp"
