#ifndef BRIDGEGP_BRIDGEGP_HPP
#define BRIDGEGP_BRIDGEGP_HPP

#include "bridgegp/ball_map.hpp"
#include "bridgegp/basis.hpp"
#include "bridgegp/benchmarks.hpp"
#include "bridgegp/csv_io.hpp"
#include "bridgegp/dataset.hpp"
#include "bridgegp/design.hpp"
#include "bridgegp/errors.hpp"
#include "bridgegp/evaluation.hpp"
#include "bridgegp/gibbs.hpp"
#include "bridgegp/gp.hpp"
#include "bridgegp/hmc.hpp"
#include "bridgegp/kernel.hpp"
#include "bridgegp/report_json.hpp"
#include "bridgegp/rng.hpp"
#include "bridgegp/sph_hmc.hpp"
#include "bridgegp/trace_io.hpp"

#endif
