"""Single-channel, early-fusion and late-fusion separators side by side."""

import numpy as np

from mctasnet.model import ModelConfig, ParameterSet, count_parameters, init_parameters, separate

# full-size parameter budgets
for variant in ("single", "early_fusion", "late_fusion"):
    for M in ((1,) if variant == "single" else (2, 3, 4)):
        n = count_parameters(ModelConfig.full_scale(variant, M))
        print(f"{variant:13s} M={M}  {n / 1e6:.3f} M parameters")

# desk-scale forward passes
rng = np.random.default_rng(0)
x = rng.uniform(-0.5, 0.5, (2, 8000)).astype(np.float32)
for variant, M in (("single", 1), ("early_fusion", 2), ("late_fusion", 2)):
    params = init_parameters(ModelConfig(variant=variant, M=M), seed=1)
    est = separate(x[:M], params)
    print(variant, "->", [e.shape for e in est])

# with one microphone the fused models are the single-channel model
single = init_parameters(ModelConfig(), seed=2)
ef1 = ParameterSet.from_arrays(ModelConfig(variant="early_fusion", M=1), single.arrays())
a, b = separate(x[0], single), separate(x[0], ef1)
print("max |EF(M=1) - single| =", max(float(np.abs(p.data - q.data).max()) for p, q in zip(a, b)))
