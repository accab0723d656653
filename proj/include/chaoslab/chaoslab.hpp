#ifndef CHAOSLAB_CHAOSLAB_HPP
#define CHAOSLAB_CHAOSLAB_HPP

#include "chaoslab/error.hpp"
#include "chaoslab/tensor.hpp"
#include "chaoslab/filtered_space.hpp"
#include "chaoslab/random.hpp"
#include "chaoslab/chaos.hpp"
#include "chaoslab/malliavin.hpp"
#include "chaoslab/transport.hpp"
#include "chaoslab/parallel.hpp"
#include "chaoslab/statistics.hpp"
#include "chaoslab/limit_lab.hpp"
#include "chaoslab/suites.hpp"
#include "chaoslab/report.hpp"
#include "chaoslab/kernel_file.hpp"
#include "chaoslab/cli.hpp"

#endif  // CHAOSLAB_CHAOSLAB_HPP
