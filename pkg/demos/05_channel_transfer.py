"""Grow a 1-mic model into 2- and 3-mic models without changing what it computes."""

import numpy as np

from mctasnet.cstl import cstl_expand
from mctasnet.errors import InvalidArgument
from mctasnet.model import ModelConfig, init_parameters, separate

rng = np.random.default_rng(0)
x = rng.uniform(-0.5, 0.5, (3, 4000)).astype(np.float32)

one = init_parameters(ModelConfig(), seed=5)  # stands in for a trained 1-ch model
for variant in ("early_fusion", "late_fusion"):
    two = cstl_expand(one, ModelConfig(variant=variant, M=2))
    three = cstl_expand(two, ModelConfig(variant=variant, M=3))
    ref = separate(x[:1], one)
    for model, M in ((two, 2), (three, 3)):
        diff = max(float(np.abs(a.data - b.data).max()) for a, b in zip(ref, separate(x[:M], model)))
        print(f"{variant} M={M}: {model.num_elements()} parameters, output change {diff:.1e}")

# skipping a hop is refused
try:
    cstl_expand(one, ModelConfig(variant="late_fusion", M=3))
except InvalidArgument as err:
    print("refused:", err)
