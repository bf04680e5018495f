#pragma once

#include "locfield/builtin_models.hpp"
#include "locfield/config_space.hpp"
#include "locfield/csv.hpp"
#include "locfield/errors.hpp"
#include "locfield/experiment.hpp"
#include "locfield/expression.hpp"
#include "locfield/graphs.hpp"
#include "locfield/integrator.hpp"
#include "locfield/local_field_ode.hpp"
#include "locfield/master_equation.hpp"
#include "locfield/mean_field.hpp"
#include "locfield/mlfe.hpp"
#include "locfield/model.hpp"
#include "locfield/model_config.hpp"
#include "locfield/random.hpp"
#include "locfield/simulate.hpp"
#include "locfield/svg.hpp"
