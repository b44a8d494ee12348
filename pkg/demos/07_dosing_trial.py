"""One scripted dosing trial per feedback condition, same seed.

The scripted operator fills the 1.5 ml pipette from the beaker and doses
2 ml into the marked tube, seeing only its condition's channels: V is
vision alone, +F adds the grasp-force value, +E the electrode pattern.
Richer feedback reads the squeeze more precisely, so it doses better and
moves with less double-checking.
"""

from telehaptic import default_scenario
from telehaptic.policies import FeedbackCondition
from telehaptic.trial import replay, run_trial, state_digest

spec = default_scenario().replace(seed=4)

print(f"target: {spec.target_volume_ml} ml into tube {spec.target_tube}, seed {spec.seed}\n")
print(f"{'condition':>9}  {'dispensed':>9}  {'error':>6}  {'time':>7}  {'squeezes':>8}")
results = {}
for condition in FeedbackCondition:
    result = run_trial(spec, condition)
    results[condition] = result
    m = result.metrics
    print(f"{condition.value:>9}  {m.dispensed_ml[0]:8.4f}   {m.relative_error*100:5.2f}%"
          f"  {m.task_time_s:6.1f}s  {m.squeeze_count:8d}")

print("\nreplaying the VFE log against a fresh slave...")
vfe = results[FeedbackCondition.VFE]
final = replay(vfe.records)
print("  digest match:", state_digest(final) == state_digest(vfe.final_state))
print("  records in log:", len(vfe.records))
