"""Verify the hand-written backpropagation against central finite
differences, then show that the checker catches a planted fault.
"""

import numpy as np

from demandcast import gradient_check, init_params, reduced_proposed

model = reduced_proposed(window=8)
init_params(model, seed=208)
rng = np.random.default_rng([208, 1])
inputs = rng.random((4, 8))
targets = rng.random(4)

report = gradient_check(model, inputs, targets, delta=1e-5, tolerance=1e-4)
print(f"checked {report.checked} parameters")
print(f"max relative error {report.max_rel_error:.3e} at "
      f"{report.worst_param}[{report.worst_index}] -> "
      f"{'PASS' if report.passed else 'FAIL'}")


def double_one_entry(grads):
    flat = grads["layer11.dense.weights"].reshape(-1)
    flat[int(np.argmax(np.abs(flat)))] *= 2.0


report = gradient_check(model, inputs, targets, corrupt=double_one_entry)
print(f"with a planted fault the checker reports "
      f"{report.worst_param} at {report.max_rel_error:.2e} -> "
      f"{'PASS' if report.passed else 'FAIL (as it should)'}")
