"""Backpropagation through the convolutional Q-network, checked against
central finite differences on small random networks in float64."""
import numpy as np

from deepq.nn import GRADCHECK_GEOMETRY, finite_diff_grad, gradcheck, init_params, max_relative_error

rng = np.random.default_rng(0)
params = init_params(GRADCHECK_GEOMETRY, 0, dtype=np.float64)
states = rng.uniform(size=(3, *GRADCHECK_GEOMETRY.input_shape))
actions = np.array([0, 2, 2])
targets = rng.normal(size=3)

loss, analytic = params.loss_and_grad(states, actions, targets)
numeric = finite_diff_grad(params, states, actions, targets, 1e-6)
print(f"loss {loss:.6f}")
for name in analytic:
    print(f"  {name:8s} {str(analytic[name].shape):16s} rel err "
          f"{max_relative_error({name: analytic[name]}, {name: numeric[name]}):.2e}")

errors = gradcheck(instances=20, seed=1)
print(f"20 random instances: worst relative error {max(errors):.2e}")
