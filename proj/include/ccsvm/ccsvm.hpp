/**
 * @file ccsvm.hpp
 * @brief Umbrella header.
 */
#ifndef CCSVM_CCSVM_HPP_
#define CCSVM_CCSVM_HPP_
#pragma once

#include "ccsvm/data.hpp"
#include "ccsvm/experiments.hpp"
#include "ccsvm/geometry.hpp"
#include "ccsvm/kernels.hpp"
#include "ccsvm/miqp.hpp"
#include "ccsvm/model_io.hpp"
#include "ccsvm/models.hpp"
#include "ccsvm/parallel.hpp"
#include "ccsvm/qp.hpp"

#endif  // CCSVM_CCSVM_HPP_
