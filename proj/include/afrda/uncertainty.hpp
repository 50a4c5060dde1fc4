#pragma once

#include "afrda/autodiff.hpp"
#include "afrda/tensor.hpp"

namespace afrda {

// Per-pixel uncertainty U = 1 - max_c softmax(logits)_c, shape B x 1 x H x W.
// U lies in [0, 1 - 1/C]; 0 at a one-hot softmax, 1 - 1/C at a uniform one.

Tensor uncertainty_from_logits(const Tensor& logits);
Var uncertainty_from_logits(Var logits);

/// U_HR: uncertainty of the HR branch's auxiliary logits head.
inline Var hr_uncertainty_source(Var hr_logits_aux) { return uncertainty_from_logits(hr_logits_aux); }

}  // namespace afrda
