#pragma once

#include <optional>
#include <string>

namespace dkmc {

/// Reference point estimates used for the relative-error column of reports.
/// GBM max-call values are the deep-optimal-stopping point estimates of
/// Becker, Cheridito & Jentzen (2019); the jump-diffusion geometric basket
/// reduces to a single known 1-d value for every dimension (Hu & Zastawniak,
/// 2020). Returns nothing for configurations without a stored reference.
std::optional<double> benchmark_price(const std::string& model_kind, int d, double s0);

}  // namespace dkmc
