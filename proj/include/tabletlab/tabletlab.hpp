#pragma once

#include "tabletlab/campaign.hpp"
#include "tabletlab/chemometrics.hpp"
#include "tabletlab/core.hpp"
#include "tabletlab/error.hpp"
#include "tabletlab/formulator.hpp"
#include "tabletlab/gp.hpp"
#include "tabletlab/io.hpp"
#include "tabletlab/materials.hpp"
#include "tabletlab/mixture.hpp"
#include "tabletlab/mobo.hpp"
#include "tabletlab/optim.hpp"
#include "tabletlab/physics.hpp"
#include "tabletlab/pibo.hpp"
#include "tabletlab/plant.hpp"
#include "tabletlab/surrogate.hpp"
