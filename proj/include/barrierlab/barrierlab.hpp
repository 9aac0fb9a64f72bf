/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#ifndef BARRIERLAB_BARRIERLAB_HPP
#define BARRIERLAB_BARRIERLAB_HPP

#include "barrierlab/alpha.hpp"
#include "barrierlab/barrier.hpp"
#include "barrierlab/experiment.hpp"
#include "barrierlab/feller.hpp"
#include "barrierlab/io.hpp"
#include "barrierlab/linalg.hpp"
#include "barrierlab/model.hpp"
#include "barrierlab/montecarlo.hpp"
#include "barrierlab/quadrature.hpp"
#include "barrierlab/rng.hpp"
#include "barrierlab/sde.hpp"
#include "barrierlab/special_functions.hpp"

#endif  // BARRIERLAB_BARRIERLAB_HPP
