#pragma once

#include <string>

#include "cn/model.hpp"

namespace cn {

inline constexpr int kCheckpointFormatVersion = 1;

// Structured-text (JSON) container holding everything train() produced:
// config, both estimators with their running statistics, standardization
// constants, the inversion grid, loss traces, and flags. Doubles are written
// in shortest round-trip form, so save -> load -> save is bit-stable.
//
// An oracle fixed f is stored by name only; loading leaves its quantile
// function unbound (rebind it before f-side queries). An unnamed oracle
// cannot be saved. Unknown payloads, wrong format versions, and truncated
// files raise IoError.
void checkpoint_save(const TrainedCnModel& model, const std::string& path);
TrainedCnModel checkpoint_load(const std::string& path);

}  // namespace cn
