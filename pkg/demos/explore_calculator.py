# Explore the bundled calculator mock and look at what the engine learned.

from guiknow import Explorer, ExplorerConfig, MockEnv, load_fixture
from guiknow.knowledge import export_dot

spec = load_fixture("calculator")
env = MockEnv(spec, seed=0)
res = Explorer(env, ExplorerConfig(rng_seed=0)).run()

print(res.steps, "steps, stopped because", res.stop_reason)
print("activities:", sorted(res.coverage.reached_activities))

k = res.knowledge
# ten digit buttons collapse into one abstract action, so the main screen
# costs a handful of steps instead of one per button
for a in sorted(k.abstract_actions.values(), key=lambda a: a.abs_action_id):
    members = len(a.element_group.member_element_keys)
    print(f"s{a.abs_state_id} a{a.abs_action_id} {a.action_type:<10} members={members:<3} flags={sorted(a.flag)}")

print()
print(export_dot(k))  # paste into graphviz to draw the interaction graph

print("queries:", res.ledger.query_count, "tokens:", res.ledger.total_tokens)
