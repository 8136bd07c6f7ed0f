#pragma once

#include "coplan/dispatch.hpp"

namespace coplan::dispatch::detail {

WorstCase kkt_worst_case(const network::PlanDecision& plan, const Table& hub_load_kw, const io::InstanceSpec& instance,
                         const WorstCaseOptions& options);

}  // namespace coplan::dispatch::detail
