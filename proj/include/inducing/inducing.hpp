#pragma once

#include "inducing/numeric.hpp"
#include "inducing/maps1d.hpp"
#include "inducing/scheme.hpp"
#include "inducing/tower.hpp"
#include "inducing/entropy.hpp"
#include "inducing/counterexample.hpp"
#include "inducing/skew2d.hpp"
#include "inducing/verify.hpp"
#include "inducing/report.hpp"
