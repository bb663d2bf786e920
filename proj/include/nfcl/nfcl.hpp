#ifndef NFCL_NFCL_HPP
#define NFCL_NFCL_HPP

#include "nfcl/backward.hpp"
#include "nfcl/baselines.hpp"
#include "nfcl/checkpoint.hpp"
#include "nfcl/dataset.hpp"
#include "nfcl/forward.hpp"
#include "nfcl/interpret.hpp"
#include "nfcl/metrics.hpp"
#include "nfcl/model.hpp"
#include "nfcl/optim.hpp"
#include "nfcl/pipeline.hpp"
#include "nfcl/rng.hpp"
#include "nfcl/verify.hpp"

#endif // NFCL_NFCL_HPP
