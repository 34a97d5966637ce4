#pragma once

#include "flatcert/ledger.hpp"
#include "flatcert/grid.hpp"
#include "flatcert/poisson.hpp"
#include "flatcert/mse.hpp"
#include "flatcert/envelope.hpp"
#include "flatcert/harmonic.hpp"
#include "flatcert/pipeline.hpp"
#include "flatcert/report.hpp"
