"""Score the ideal-binary-mask oracle against doing nothing, bucketed by speaker angle."""

from mctasnet.metrics import compare_systems, ibm_system, passthrough_system
from mctasnet.spatial.corpus import child_seed, synthesize_sample
from mctasnet.spatial.sources import SyntheticSpeech

talkers = SyntheticSpeech()
test_set = []
for i in range(24):
    sample, _ = synthesize_sample(child_seed(3, i), talkers, "test", M=2, seconds=1.0)
    sample.metadata["id"] = f"test{i:03d}"
    test_set.append(sample)

table = compare_systems(test_set, {"mixture": passthrough_system, "ibm": ibm_system})
print(table.to_text(buckets=True))
print()
print(table.reports["ibm"].to_csv().splitlines()[:4])
