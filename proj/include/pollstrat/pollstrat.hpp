#pragma once

#include <pollstrat/attrs.hpp>
#include <pollstrat/bootstrap.hpp>
#include <pollstrat/csv.hpp>
#include <pollstrat/error.hpp>
#include <pollstrat/ingest.hpp>
#include <pollstrat/model.hpp>
#include <pollstrat/normalize.hpp>
#include <pollstrat/parallel.hpp>
#include <pollstrat/poststrat.hpp>
#include <pollstrat/random.hpp>
#include <pollstrat/serialize.hpp>
#include <pollstrat/stats.hpp>
#include <pollstrat/synth.hpp>

namespace pollstrat {

inline constexpr char const* kVersion = "0.1.0";

}  // namespace pollstrat
